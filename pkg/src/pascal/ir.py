"""Word-level sequential circuit IR.

A :class:`Design` is a flat, single-clock synchronous circuit: input/output
ports, registers with optional synchronous reset values, combinational nets
and a next-state expression per register.  All values are unsigned two-valued
bit-vectors of 1..64 bits.

Output ports have no driver of their own; each one aliases the register or
net of the same name.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping

MAX_WIDTH = 64

OPS = (
    "const", "var", "not", "and", "or", "xor", "add", "sub", "mul",
    "eq", "neq", "lt", "shl", "shr", "mux", "slice", "concat", "zext",
)
_BITWISE = {"and", "or", "xor", "add", "sub", "mul"}
_COMPARE = {"eq", "neq", "lt"}


class WidthError(ValueError):
    """An expression violates the operator width rules."""


class CombinationalLoop(Exception):
    def __init__(self, nets):
        self.nets = list(nets)
        super().__init__(f"combinational loop through {', '.join(self.nets)}")


class UnknownSignal(KeyError):
    pass


def mask(width: int) -> int:
    return (1 << width) - 1


class Expr:
    """Immutable expression node with structural equality and a cached hash.

    ``value`` carries the operator's static parameter: the integer of a
    ``const``, the signal name of a ``var`` and ``(hi, lo)`` of a ``slice``.
    """

    __slots__ = ("op", "args", "width", "value", "_hash")

    def __init__(self, op: str, args: tuple, width: int, value=None):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", hash((op, args, width, value)))

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return (self.op == other.op and self.width == other.width
                and self.value == other.value and self.args == other.args)

    def __repr__(self):
        if self.op == "const":
            return f"{self.width}'d{self.value}"
        if self.op == "var":
            return self.value
        if self.op == "slice":
            return f"{self.args[0]!r}[{self.value[0]}:{self.value[1]}]"
        if self.op == "zext":
            return f"zext{self.width}({self.args[0]!r})"
        return f"{self.op}({', '.join(map(repr, self.args))})"

    def __reduce__(self):
        return (Expr, (self.op, self.args, self.width, self.value))

    def walk(self) -> Iterator["Expr"]:
        """Yield every distinct sub-expression once, children before parents."""
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                yield node
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((a, False) for a in reversed(node.args))

    def support(self) -> set[str]:
        return {e.value for e in self.walk() if e.op == "var"}


def make(op: str, args: Iterable[Expr], value=None) -> Expr:
    """Build a node, inferring its width and checking the operator rules."""
    args = tuple(args)
    if op not in OPS:
        raise WidthError(f"unknown operator {op!r}")
    for a in args:
        if not isinstance(a, Expr):
            raise TypeError(f"operand of {op} is not an Expr: {a!r}")

    def arity(n):
        if len(args) != n:
            raise WidthError(f"{op} takes {n} operands, got {len(args)}")

    if op == "const":
        arity(0)
        v, w = value
        _check_width(w)
        if not 0 <= v <= mask(w):
            raise WidthError(f"constant {v} does not fit in {w} bits")
        return Expr(op, (), w, v)
    if op == "var":
        arity(0)
        name, w = value
        _check_width(w)
        return Expr(op, (), w, name)
    if op == "not":
        arity(1)
        return Expr(op, args, args[0].width)
    if op in _BITWISE or op in _COMPARE:
        arity(2)
        a, b = args
        if a.width != b.width:
            raise WidthError(f"{op} operands differ in width ({a.width} vs {b.width})")
        return Expr(op, args, 1 if op in _COMPARE else a.width)
    if op in ("shl", "shr"):
        arity(2)
        return Expr(op, args, args[0].width)
    if op == "mux":
        arity(3)
        c, a, b = args
        if c.width != 1:
            raise WidthError(f"mux condition must be 1 bit, got {c.width}")
        if a.width != b.width:
            raise WidthError(f"mux arms differ in width ({a.width} vs {b.width})")
        return Expr(op, args, a.width)
    if op == "slice":
        arity(1)
        hi, lo = value
        if not 0 <= lo <= hi < args[0].width:
            raise WidthError(f"slice [{hi}:{lo}] out of range for width {args[0].width}")
        return Expr(op, args, hi - lo + 1, (hi, lo))
    if op == "concat":
        if not args:
            raise WidthError("empty concatenation")
        w = sum(a.width for a in args)
        _check_width(w)
        return Expr(op, args, w)
    if op == "zext":
        arity(1)
        w = value
        _check_width(w)
        if w < args[0].width:
            raise WidthError(f"zext to {w} bits narrows a {args[0].width}-bit operand")
        return Expr(op, args, w, w)
    raise AssertionError(op)


def _check_width(w):
    if not isinstance(w, int) or not 1 <= w <= MAX_WIDTH:
        raise WidthError(f"width {w!r} outside 1..{MAX_WIDTH}")


def const(v: int, width: int) -> Expr:
    return make("const", (), (v, width))


def var(name: str, width: int) -> Expr:
    return make("var", (), (name, width))


def bnot(a): return make("not", (a,))
def band(a, b): return make("and", (a, b))
def bor(a, b): return make("or", (a, b))
def bxor(a, b): return make("xor", (a, b))
def add(a, b): return make("add", (a, b))
def sub(a, b): return make("sub", (a, b))
def mul(a, b): return make("mul", (a, b))
def eq(a, b): return make("eq", (a, b))
def neq(a, b): return make("neq", (a, b))
def lt(a, b): return make("lt", (a, b))
def shl(a, b): return make("shl", (a, b))
def shr(a, b): return make("shr", (a, b))
def mux(c, a, b): return make("mux", (c, a, b))
def slice_bits(a, hi, lo): return make("slice", (a,), (hi, lo))
def concat(*parts): return make("concat", parts)


def zext(a: Expr, width: int) -> Expr:
    return a if a.width == width else make("zext", (a,), width)


def rebuild(e: Expr, args) -> Expr:
    if e.op == "const":
        return e
    if e.op == "var":
        return e
    value = e.value
    return make(e.op, args, value)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions of equal width."""
    memo: dict[Expr, Expr] = {}
    for node in e.walk():
        if node.op == "var":
            new = mapping.get(node.value, node)
            if new.width != node.width:
                raise WidthError(f"substitution for {node.value} changes width")
            memo[node] = new
        elif node.op == "const":
            memo[node] = node
        else:
            memo[node] = make(node.op, (memo[a] for a in node.args), node.value)
    return memo[e]


def rename(e: Expr, names: Mapping[str, str]) -> Expr:
    if not names:
        return e
    return substitute(e, {n.value: var(names[n.value], n.width)
                          for n in e.walk() if n.op == "var" and n.value in names})


def eval_expr(e: Expr, env: Mapping[str, int]) -> int:
    """Reference interpreter for one expression under a signal valuation."""
    vals: dict[Expr, int] = {}
    for n in e.walk():
        op = n.op
        m = mask(n.width)
        if op == "const":
            r = n.value
        elif op == "var":
            r = env[n.value]
        else:
            a = [vals[x] for x in n.args]
            if op == "not":
                r = ~a[0] & m
            elif op == "and":
                r = a[0] & a[1]
            elif op == "or":
                r = a[0] | a[1]
            elif op == "xor":
                r = a[0] ^ a[1]
            elif op == "add":
                r = (a[0] + a[1]) & m
            elif op == "sub":
                r = (a[0] - a[1]) & m
            elif op == "mul":
                r = (a[0] * a[1]) & m
            elif op == "eq":
                r = int(a[0] == a[1])
            elif op == "neq":
                r = int(a[0] != a[1])
            elif op == "lt":
                r = int(a[0] < a[1])
            elif op == "shl":
                r = (a[0] << a[1]) & m if a[1] < n.width else 0
            elif op == "shr":
                r = a[0] >> a[1] if a[1] < n.width else 0
            elif op == "mux":
                r = a[1] if a[0] else a[2]
            elif op == "slice":
                r = (a[0] >> n.value[1]) & m
            elif op == "concat":
                r = 0
                for x, v in zip(n.args, a):
                    r = (r << x.width) | v
            elif op == "zext":
                r = a[0]
            else:
                raise AssertionError(op)
        vals[n] = r
    return vals[e]


# ---------------------------------------------------------------------------
# Designs

@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int = 1


@dataclass(frozen=True)
class RegDef:
    name: str
    width: int
    reset: int | None = 0  # None: not affected by the synchronous reset


@dataclass(frozen=True)
class NetDef:
    name: str
    width: int
    expr: Expr


@dataclass(frozen=True)
class SecurityAnnotations:
    secret: frozenset
    observable: frozenset
    start: str
    done: str
    # 1-bit expressions over input ports that every admissible stimulus satisfies
    assumes: tuple = ()
    # 1-bit outputs that flag an internal assertion failure when high
    alarms: frozenset = frozenset()
    bound: int | None = None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    name: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.name!r}: {self.message}"


@dataclass(frozen=True, eq=False)
class Design:
    name: str
    ports: tuple
    regs: tuple
    nets: tuple
    next: Mapping[str, Expr]
    annot: SecurityAnnotations
    clock: str = "clk"
    reset: str = "rst"
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "regs", tuple(self.regs))
        object.__setattr__(self, "nets", tuple(self.nets))
        object.__setattr__(self, "next", dict(self.next))
        idx = {
            "port": {p.name: p for p in self.ports},
            "reg": {r.name: r for r in self.regs},
            "net": {n.name: n for n in self.nets},
        }
        object.__setattr__(self, "_index", idx)

    def port(self, name) -> Port | None:
        return self._index["port"].get(name)

    def reg(self, name) -> RegDef | None:
        return self._index["reg"].get(name)

    def net(self, name) -> NetDef | None:
        return self._index["net"].get(name)

    def width(self, name) -> int:
        for kind in ("reg", "net", "port"):
            obj = self._index[kind].get(name)
            if obj is not None:
                return obj.width
        raise UnknownSignal(name)

    def has_signal(self, name) -> bool:
        return any(name in self._index[k] for k in ("reg", "net", "port"))

    def signal_names(self) -> list[str]:
        names = [p.name for p in self.ports if p.direction == "input"]
        names += [r.name for r in self.regs] + [n.name for n in self.nets]
        return names

    @property
    def inputs(self) -> list[Port]:
        return [p for p in self.ports if p.direction == "input"]

    @property
    def outputs(self) -> list[Port]:
        return [p for p in self.ports if p.direction == "output"]

    @property
    def secret_ports(self) -> list[Port]:
        return [p for p in self.inputs if p.name in self.annot.secret]

    @property
    def public_ports(self) -> list[Port]:
        """Data inputs that are neither secret nor protocol signals."""
        skip = {self.clock, self.reset, self.annot.start} | set(self.annot.secret)
        return [p for p in self.inputs if p.name not in skip]

    @property
    def data_observables(self) -> list[Port]:
        return [p for p in self.outputs
                if p.name in self.annot.observable and p.name != self.annot.done]

    def evolve(self, **changes) -> "Design":
        changes.setdefault("_index", None)
        return replace(self, **changes)

    def expressions(self) -> Iterator[tuple[str, Expr]]:
        for n in self.nets:
            yield n.name, n.expr
        for r in self.regs:
            if r.name in self.next:
                yield r.name, self.next[r.name]


def _expr_diagnostics(d: Design, owner: str, e: Expr, out: list):
    for node in e.walk():
        if node.op != "var":
            continue
        name = node.value
        if not d.has_signal(name):
            out.append(Diagnostic("UNKNOWN_SIGNAL", name, f"referenced by {owner} but not declared"))
        elif d.width(name) != node.width:
            out.append(Diagnostic("WIDTH_MISMATCH", name,
                                  f"used as {node.width} bits in {owner}, declared {d.width(name)}"))
        elif name == d.clock:
            out.append(Diagnostic("CLOCK_IN_EXPR", name, f"clock used as data in {owner}"))


def validate_design(d: Design) -> list[Diagnostic]:
    """Check every structural invariant; an empty list means well-formed."""
    out: list[Diagnostic] = []
    seen: dict[str, str] = {}
    for kind, items in (("port", d.ports), ("reg", d.regs), ("net", d.nets)):
        for obj in items:
            if not isinstance(obj.width, int) or not 1 <= obj.width <= MAX_WIDTH:
                out.append(Diagnostic("WIDTH_RANGE", obj.name, f"width {obj.width} outside 1..{MAX_WIDTH}"))
            prev = seen.get(obj.name)
            if kind == "port" and obj.direction not in ("input", "output"):
                out.append(Diagnostic("BAD_DIRECTION", obj.name, f"direction {obj.direction!r}"))
            # an output port legitimately shares its name with its driver
            if prev is not None and not (prev == "output" and kind in ("reg", "net")):
                out.append(Diagnostic("DUPLICATE_NAME", obj.name, f"declared as {prev} and {kind}"))
            seen[obj.name] = obj.direction if kind == "port" else kind

    for p in d.outputs:
        drv = d.reg(p.name) or d.net(p.name)
        if drv is None:
            out.append(Diagnostic("OUTPUT_UNDRIVEN", p.name, "no register or net drives this output"))
        elif drv.width != p.width:
            out.append(Diagnostic("WIDTH_MISMATCH", p.name,
                                  f"output is {p.width} bits, driver is {drv.width}"))

    for n in d.nets:
        if n.expr.width != n.width:
            out.append(Diagnostic("WIDTH_MISMATCH", n.name,
                                  f"net is {n.width} bits, expression is {n.expr.width}"))
        _expr_diagnostics(d, f"net {n.name}", n.expr, out)
    for r in d.regs:
        e = d.next.get(r.name)
        if e is None:
            out.append(Diagnostic("MISSING_NEXT", r.name, "register has no next-state function"))
            continue
        if e.width != r.width:
            out.append(Diagnostic("WIDTH_MISMATCH", r.name,
                                  f"register is {r.width} bits, next-state is {e.width}"))
        if r.reset is not None and not 0 <= r.reset <= mask(min(r.width, MAX_WIDTH)):
            out.append(Diagnostic("RESET_RANGE", r.name, f"reset value {r.reset} does not fit"))
        _expr_diagnostics(d, f"next({r.name})", e, out)
    for name in d.next:
        if d.reg(name) is None:
            out.append(Diagnostic("NEXT_UNKNOWN_REG", name, "next-state given for a non-register"))

    for sig in (d.clock, d.reset):
        p = d.port(sig)
        if p is None or p.direction != "input" or p.width != 1:
            code = "NO_CLOCK" if sig == d.clock else "NO_RESET"
            out.append(Diagnostic(code, sig, "must be a 1-bit input port"))
    if d.clock == d.reset:
        out.append(Diagnostic("NO_RESET", d.reset, "clock and reset are the same port"))

    out.extend(_annotation_diagnostics(d))

    try:
        comb_topo_order(d)
    except CombinationalLoop:
        for scc in _net_cycles(d):
            out.append(Diagnostic("COMB_LOOP", scc[0], f"cycle through {' -> '.join(scc)}"))
    return out


def _annotation_diagnostics(d: Design) -> list[Diagnostic]:
    a = d.annot
    out = []
    for s in sorted(a.secret):
        p = d.port(s)
        if p is None or p.direction != "input":
            out.append(Diagnostic("SECRET_NOT_INPUT", s, "secret must name an input port"))
        elif s in (d.clock, d.reset, a.start):
            out.append(Diagnostic("SECRET_NOT_INPUT", s, "secret cannot be a protocol port"))
    for o in sorted(a.observable):
        p = d.port(o)
        if p is None or p.direction != "output":
            out.append(Diagnostic("OBSERVABLE_NOT_OUTPUT", o, "observable must name an output port"))
    for s in sorted(set(a.secret) & set(a.observable)):
        out.append(Diagnostic("SECRET_OBSERVABLE_OVERLAP", s, "signal is both secret and observable"))
    p = d.port(a.start)
    if p is None or p.direction != "input" or p.width != 1:
        out.append(Diagnostic("BAD_START", a.start, "start must be a 1-bit input port"))
    p = d.port(a.done)
    if p is None or p.direction != "output" or p.width != 1:
        out.append(Diagnostic("BAD_DONE", a.done, "done must be a 1-bit output port"))
    if a.done not in a.observable:
        out.append(Diagnostic("DONE_NOT_OBSERVABLE", a.done, "done must be observable"))
    for name in sorted(a.alarms):
        p = d.port(name)
        if p is None or p.direction != "output" or p.width != 1:
            out.append(Diagnostic("BAD_ALARM", name, "alarm must be a 1-bit output port"))
    inputs = {p.name for p in d.inputs}
    for i, e in enumerate(a.assumes):
        if e.width != 1:
            out.append(Diagnostic("BAD_ASSUME", f"assume#{i}", "assumption must be 1 bit wide"))
        for name in sorted(e.support() - inputs):
            out.append(Diagnostic("BAD_ASSUME", name, "assumptions may only mention input ports"))
        _expr_diagnostics(d, f"assume#{i}", e, out)
    if a.bound is not None and a.bound < 1:
        out.append(Diagnostic("BAD_BOUND", str(a.bound), "bound must be at least 1"))
    return out


def _net_deps(d: Design) -> dict[str, list[str]]:
    nets = {n.name for n in d.nets}
    return {n.name: sorted(s for s in n.expr.support() if s in nets) for n in d.nets}


def comb_topo_order(d: Design) -> list[str]:
    """Nets in evaluation order; ties go to the earlier declaration."""
    import heapq

    deps = _net_deps(d)
    pos = {n.name: i for i, n in enumerate(d.nets)}
    users: dict[str, list[str]] = {n: [] for n in deps}
    indeg = {}
    for n, ds in deps.items():
        indeg[n] = len(set(ds))
        for m in set(ds):
            users[m].append(n)
    ready = [(pos[n], n) for n, k in indeg.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, n = heapq.heappop(ready)
        order.append(n)
        for u in users[n]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, (pos[u], u))
    if len(order) != len(deps):
        stuck = [n.name for n in d.nets if indeg[n.name] > 0]
        raise CombinationalLoop(stuck)
    return order


def _net_cycles(d: Design) -> list[list[str]]:
    """Strongly connected net groups that form combinational cycles."""
    deps = _net_deps(d)
    pos = {n.name: i for i, n in enumerate(d.nets)}
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    sccs = []
    counter = 0
    for root in deps:
        if root in index:
            continue
        work = [(root, iter(deps[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(deps[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in deps[v]:
                    sccs.append(sorted(comp, key=pos.__getitem__))
    return sorted(sccs, key=lambda c: pos[c[0]])


def fanin(d: Design, name: str) -> set[str]:
    """Signals appearing in the defining or next-state expression of ``name``."""
    net = d.net(name)
    if net is not None:
        return net.expr.support()
    if d.reg(name) is not None:
        e = d.next.get(name)
        return e.support() if e is not None else set()
    if d.port(name) is not None:
        return set()
    raise UnknownSignal(name)


def cone_of_influence(d: Design, target: str) -> set[str]:
    """Transitive fan-in of ``target`` through nets and registers."""
    if not d.has_signal(target):
        raise UnknownSignal(target)
    cone = {target}
    todo = deque([target])
    while todo:
        s = todo.popleft()
        for t in fanin(d, s):
            if t not in cone:
                cone.add(t)
                todo.append(t)
    return cone


def cone_of_many(d: Design, targets: Iterable[str]) -> set[str]:
    out: set[str] = set()
    for t in targets:
        if t not in out:
            out |= cone_of_influence(d, t)
    return out
