"""Bit-level encoding of designs into CNF and time-frame unrolling.

Words are lists of DIMACS literals, least significant bit first.  Literal
``TRUE`` (variable 1) is fixed by a unit clause so constants fold away
before they reach the solver; identical gates are shared through a
structural hash.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import ir

TRUE = 1
FALSE = -1


class CapacityExceeded(RuntimeError):
    pass


class CnfBuilder:
    """Emits Tseitin clauses for gates into a solver-like sink."""

    def __init__(self, sink, clause_budget: int | None = None):
        self.sink = sink
        self.budget = clause_budget
        self.n_clauses = 0
        self.cache: dict[tuple, int] = {}
        v = sink.new_var()
        if v != TRUE:
            raise ValueError("the builder must own variable 1 of a fresh solver")
        self.clause([TRUE])

    def clause(self, lits):
        self.n_clauses += 1
        if self.budget is not None and self.n_clauses > self.budget:
            raise CapacityExceeded(f"clause budget of {self.budget} exceeded")
        self.sink.add_clause(lits)

    def fresh(self) -> int:
        return self.sink.new_var()

    # -- gates -------------------------------------------------------------
    def AND(self, a: int, b: int) -> int:
        if a == FALSE or b == FALSE or a == -b:
            return FALSE
        if a == TRUE or a == b:
            return b
        if b == TRUE:
            return a
        if a > b:
            a, b = b, a
        key = ("&", a, b)
        g = self.cache.get(key)
        if g is None:
            g = self.fresh()
            self.clause([-g, a])
            self.clause([-g, b])
            self.clause([g, -a, -b])
            self.cache[key] = g
        return g

    def OR(self, a: int, b: int) -> int:
        return -self.AND(-a, -b)

    def XOR(self, a: int, b: int) -> int:
        if a == FALSE:
            return b
        if b == FALSE:
            return a
        if a == TRUE:
            return -b
        if b == TRUE:
            return -a
        if a == b:
            return FALSE
        if a == -b:
            return TRUE
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        if a > b:
            a, b = b, a
        key = ("^", a, b)
        g = self.cache.get(key)
        if g is None:
            g = self.fresh()
            self.clause([-g, a, b])
            self.clause([-g, -a, -b])
            self.clause([g, -a, b])
            self.clause([g, a, -b])
            self.cache[key] = g
        return sign * g

    def MUX(self, s: int, t: int, e: int) -> int:
        """``t`` when ``s`` holds, else ``e``."""
        if s == TRUE or t == e:
            return t
        if s == FALSE:
            return e
        if s < 0:
            s, t, e = -s, e, t
        if t == TRUE or t == s:
            return self.OR(s, e)
        if t == FALSE or t == -s:
            return self.AND(-s, e)
        if e == TRUE or e == -s:
            return self.OR(-s, t)
        if e == FALSE or e == s:
            return self.AND(s, t)
        if t == -e:
            return -self.XOR(s, t)
        key = ("?", s, t, e)
        g = self.cache.get(key)
        if g is None:
            g = self.fresh()
            self.clause([-s, -t, g])
            self.clause([-s, t, -g])
            self.clause([s, -e, g])
            self.clause([s, e, -g])
            self.clause([-t, -e, g])
            self.clause([t, e, -g])
            self.cache[key] = g
        return g

    def MAJ(self, a: int, b: int, c: int) -> int:
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            if z == TRUE:
                return self.OR(x, y)
            if z == FALSE:
                return self.AND(x, y)
            if x == y:
                return x
            if x == -y:
                return z
        key = ("maj",) + tuple(sorted((a, b, c)))
        g = self.cache.get(key)
        if g is None:
            g = self.fresh()
            for x, y in ((a, b), (b, c), (a, c)):
                self.clause([-x, -y, g])
                self.clause([x, y, -g])
            self.cache[key] = g
        return g

    def AND_ALL(self, lits: Iterable[int]) -> int:
        out = TRUE
        for x in lits:
            out = self.AND(out, x)
            if out == FALSE:
                break
        return out

    def OR_ALL(self, lits: Iterable[int]) -> int:
        return -self.AND_ALL(-x for x in lits)

    # -- words -------------------------------------------------------------
    def const_word(self, value: int, width: int) -> list[int]:
        return [TRUE if (value >> i) & 1 else FALSE for i in range(width)]

    def fresh_word(self, width: int) -> list[int]:
        return [self.fresh() for _ in range(width)]

    def add(self, a, b, carry=FALSE):
        out = []
        for x, y in zip(a, b):
            out.append(self.XOR(self.XOR(x, y), carry))
            carry = self.MAJ(x, y, carry)
        return out

    def sub(self, a, b):
        return self.add(a, [-y for y in b], TRUE)

    def mul(self, a, b):
        w = len(a)
        acc = [FALSE] * w
        for i in range(w):
            if b[i] == FALSE:
                continue
            part = [FALSE] * i + [self.AND(x, b[i]) for x in a[:w - i]]
            acc = self.add(acc, part)
        return acc

    def eq(self, a, b) -> int:
        return self.AND_ALL(-self.XOR(x, y) for x, y in zip(a, b))

    def ult(self, a, b) -> int:
        lt = FALSE
        for x, y in zip(a, b):
            lt = self.MUX(self.XOR(x, y), y, lt)
        return lt

    def shift(self, a, amount, left: bool):
        w = len(a)
        cur = list(a)
        for k, bit in enumerate(amount):
            if bit == FALSE:
                continue
            sh = 1 << k
            if sh >= w:
                cur = [self.AND(-bit, x) for x in cur]
                continue
            if left:
                moved = [FALSE] * sh + cur[:w - sh]
            else:
                moved = cur[sh:] + [FALSE] * sh
            cur = [self.MUX(bit, m, c) for m, c in zip(moved, cur)]
        return cur

    def word_mux(self, s, t, e):
        return [self.MUX(s, x, y) for x, y in zip(t, e)]

    # -- expressions -------------------------------------------------------
    def expr(self, e: ir.Expr, env: Mapping[str, list], memo: dict | None = None) -> list[int]:
        """Encode ``e`` with variables bound to the words in ``env``."""
        memo = {} if memo is None else memo
        for node in e.walk():
            if node in memo:
                continue
            op = node.op
            if op == "const":
                r = self.const_word(node.value, node.width)
            elif op == "var":
                r = env[node.value]
            else:
                a = [memo[x] for x in node.args]
                if op == "not":
                    r = [-x for x in a[0]]
                elif op == "and":
                    r = [self.AND(x, y) for x, y in zip(a[0], a[1])]
                elif op == "or":
                    r = [self.OR(x, y) for x, y in zip(a[0], a[1])]
                elif op == "xor":
                    r = [self.XOR(x, y) for x, y in zip(a[0], a[1])]
                elif op == "add":
                    r = self.add(a[0], a[1])
                elif op == "sub":
                    r = self.sub(a[0], a[1])
                elif op == "mul":
                    r = self.mul(a[0], a[1])
                elif op == "eq":
                    r = [self.eq(a[0], a[1])]
                elif op == "neq":
                    r = [-self.eq(a[0], a[1])]
                elif op == "lt":
                    r = [self.ult(a[0], a[1])]
                elif op == "shl":
                    r = self.shift(a[0], a[1], True)
                elif op == "shr":
                    r = self.shift(a[0], a[1], False)
                elif op == "mux":
                    r = self.word_mux(a[0][0], a[1], a[2])
                elif op == "slice":
                    hi, lo = node.value
                    r = a[0][lo:hi + 1]
                elif op == "concat":
                    r = []
                    for part in reversed(a):
                        r += part
                elif op == "zext":
                    r = a[0] + [FALSE] * (node.width - len(a[0]))
                else:
                    raise AssertionError(op)
            memo[node] = r
        return memo[e]


def word_value(solver, word) -> int:
    v = 0
    for i, lit in enumerate(word):
        if lit == TRUE or (lit != FALSE and solver.model_value(lit)):
            v |= 1 << i
    return v


@dataclass
class UnrolledFormula:
    """Time-frame expansion of a design from the reset cycle up to ``bound``.

    ``frames[f + 1]`` maps each cone signal to its word at cycle ``f``; frame
    ``-1`` is the reset cycle.  Data inputs keep one word for all cycles.
    """

    design: ir.Design
    builder: CnfBuilder
    bound: int
    cone: frozenset
    inputs: dict
    frames: list = field(default_factory=list)

    def word(self, name: str, frame: int) -> list[int]:
        return self.frames[frame + 1][name]

    def lit(self, name: str, frame: int) -> int:
        w = self.word(name, frame)
        if len(w) != 1:
            raise ValueError(f"{name!r} is {len(w)} bits wide")
        return w[0]

    @property
    def solver(self):
        return self.builder.sink

    def decode_inputs(self) -> dict[str, int]:
        return {name: word_value(self.solver, w) for name, w in self.inputs.items()}

    def decode(self, name: str, frame: int) -> int:
        return word_value(self.solver, self.word(name, frame))


def unroll_and_blast(d: ir.Design, bound: int, targets: Iterable[str], builder: CnfBuilder,
                     inputs: Mapping[str, list] | None = None,
                     fixed: Mapping[str, int] | None = None,
                     assume: bool = True) -> UnrolledFormula:
    """Unroll the cone of ``targets`` for cycles -1..bound into ``builder``.

    ``inputs`` supplies pre-made words for data inputs (shared between copies
    in self-composition); ``fixed`` pins data inputs to constants.  With
    ``assume`` the design's input assumptions are asserted.
    """
    if bound < 1:
        raise ValueError("bound must be at least 1")
    a = d.annot
    targets = list(targets)
    roots = set(targets)
    if assume:
        for e in a.assumes:
            roots |= e.support()
    cone = ir.cone_of_many(d, roots)
    b = builder
    proto = {d.reset, a.start, d.clock}
    words: dict[str, list] = {}
    for p in d.inputs:
        if p.name in proto:
            continue
        if inputs is not None and p.name in inputs:
            words[p.name] = list(inputs[p.name])
        elif fixed is not None and p.name in fixed:
            words[p.name] = b.const_word(fixed[p.name], p.width)
        elif p.name in cone:
            words[p.name] = b.fresh_word(p.width)
    if assume:
        env = dict(words)
        for p in d.inputs:
            env.setdefault(p.name, b.const_word(0, p.width))
        for e in a.assumes:
            b.clause([b.expr(e, env)[0]])

    order = [n for n in ir.comb_topo_order(d) if n in cone]
    regs = [r for r in d.regs if r.name in cone]
    uf = UnrolledFormula(d, b, bound, frozenset(cone), words)
    state = {r.name: b.const_word(0, r.width) for r in regs}
    for f in range(-1, bound + 1):
        env = dict(words)
        env.update(state)
        env[d.reset] = [TRUE if f == -1 else FALSE]
        env[a.start] = [TRUE if f == 0 else FALSE]
        env[d.clock] = [FALSE]
        memo: dict = {}
        for name in order:
            env[name] = b.expr(d.net(name).expr, env, memo)
        uf.frames.append(env)
        if f == bound:
            break
        nxt = {}
        for r in regs:
            if f == -1 and r.reset is not None:
                nxt[r.name] = b.const_word(r.reset, r.width)
            else:
                nxt[r.name] = b.expr(d.next[r.name], env, memo)
        state = nxt
    return uf


def first_done_literals(b: CnfBuilder, uf: UnrolledFormula, done: str | None = None) -> dict[int, int]:
    """Literal per cycle t >= 1 that holds iff done first rises at cycle t."""
    done = done or uf.design.annot.done
    out = {}
    before = FALSE
    for t in range(1, uf.bound + 1):
        lit = uf.lit(done, t)
        out[t] = b.AND(lit, -before)
        before = b.OR(before, lit)
    return out
