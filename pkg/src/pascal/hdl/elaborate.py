"""Lowering of a parsed module plus security pragmas into an :class:`ir.Design`."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import ir
from .lexer import HdlError
from .parser import (Always, Assign, Binary, Block, Concat, Decl, Ident, If, NonBlocking,
                     Num, Pragma, SourceModule, Slice, Ternary, Unary, parse_expr)


class ElabError(HdlError):
    def __init__(self, message, line=None, col=None, code="ELAB", diagnostics=()):
        super().__init__(message, line, col, code)
        self.diagnostics = list(diagnostics)


@dataclass
class PragmaSet:
    secret: list = field(default_factory=list)
    observable: list = field(default_factory=list)
    start: list = field(default_factory=list)
    done: list = field(default_factory=list)
    assume: list = field(default_factory=list)  # expression ASTs
    alarm: list = field(default_factory=list)
    bound: int | None = None

    @classmethod
    def from_module(cls, m: SourceModule) -> "PragmaSet":
        ps = cls()
        for p in m.pragmas:
            ps.add(p)
        return ps

    def add(self, p: Pragma):
        if p.kind == "bound":
            self.bound = p.args[0]
        else:
            getattr(self, p.kind).extend(p.args)

    def override(self, other: "PragmaSet") -> "PragmaSet":
        """Fields set in ``other`` replace ours."""
        out = PragmaSet(**{k: list(v) if isinstance(v, list) else v for k, v in vars(self).items()})
        for k, v in vars(other).items():
            if v:
                setattr(out, k, list(v) if isinstance(v, list) else v)
        return out

    @classmethod
    def from_mapping(cls, data: dict) -> "PragmaSet":
        """Build from a sidecar mapping such as ``{"secret": ["key"], "done": "done"}``."""
        ps = cls()
        for key, value in data.items():
            if key not in ("secret", "observable", "start", "done", "assume", "alarm", "bound"):
                raise ElabError(f"unknown sidecar key {key!r}", code="BAD_SIDECAR")
            if key == "bound":
                ps.bound = int(value)
                continue
            items = [value] if isinstance(value, str) else list(value)
            if key == "assume":
                items = [parse_expr(s) for s in items]
            setattr(ps, key, items)
        return ps

    @classmethod
    def load(cls, path) -> "PragmaSet":
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith((".yaml", ".yml")):
            import yaml
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        return cls.from_mapping(data)


_ARITH = {"&": "and", "|": "or", "^": "xor", "+": "add", "-": "sub", "*": "mul"}
_CMP = {"==": "eq", "!=": "neq", "<": "lt"}


def _at(node):
    return getattr(node, "line", None), getattr(node, "col", None)


def _truth(e: ir.Expr) -> ir.Expr:
    return e if e.width == 1 else ir.neq(e, ir.const(0, e.width))


def _extend(e: ir.Expr, width: int) -> ir.Expr:
    if e.op == "const":
        return ir.const(e.value, width)
    return ir.zext(e, width)


class _Elaborator:
    def __init__(self, m: SourceModule):
        self.m = m
        self.widths: dict[str, int] = {}
        self.kind: dict[str, str] = {}  # input | wire | reg
        self.declared: set[str] = set()
        self.outputs: list[str] = []

    def fail(self, msg, node=None, code="ELAB"):
        line, col = _at(node) if node is not None else (None, None)
        return ElabError(msg, line, col, code)

    def declare(self, name, width, kind, node):
        if name in self.declared:
            prev = self.kind[name]
            # `output pt` followed by `reg pt` promotes the port to a register
            if prev == "wire" and kind == "reg" and name in self.outputs and self.widths[name] == width:
                self.kind[name] = "reg"
                return
            raise self.fail(f"{name!r} declared twice", node, "DUPLICATE_DECL")
        self.declared.add(name)
        self.widths[name] = width
        self.kind[name] = kind

    # -- expressions -------------------------------------------------------
    def expr(self, node) -> ir.Expr:
        try:
            return self._expr(node)
        except ir.WidthError as exc:
            raise self.fail(str(exc), node, "WIDTH_MISMATCH") from None

    def _expr(self, node) -> ir.Expr:
        if isinstance(node, Num):
            v, w = node.value, node.width
            if w is None:
                w = max(1, v.bit_length())
                if w > ir.MAX_WIDTH:
                    raise self.fail(f"literal {v} exceeds 64 bits", node, "WIDTH_MISMATCH")
            elif v > ir.mask(w):
                raise self.fail(f"literal value {v} does not fit in {w} bits", node, "WIDTH_MISMATCH")
            return ir.const(v, w)
        if isinstance(node, Ident):
            return ir.var(node.name, self.use(node.name, node))
        if isinstance(node, Slice):
            w = self.use(node.name, node)
            if not 0 <= node.lo <= node.hi < w:
                raise self.fail(f"slice [{node.hi}:{node.lo}] out of range for {node.name!r}",
                                node, "WIDTH_MISMATCH")
            return ir.slice_bits(ir.var(node.name, w), node.hi, node.lo)
        if isinstance(node, Unary):
            a = self.expr(node.operand)
            if node.op == "~":
                return ir.bnot(a)
            return ir.sub(ir.const(0, a.width), a)
        if isinstance(node, Binary):
            a, b = self.expr(node.left), self.expr(node.right)
            if node.op in ("<<", ">>"):
                return ir.make("shl" if node.op == "<<" else "shr", (a, b))
            w = max(a.width, b.width)
            a, b = _extend(a, w), _extend(b, w)
            if node.op in _CMP:
                return ir.make(_CMP[node.op], (a, b))
            return ir.make(_ARITH[node.op], (a, b))
        if isinstance(node, Ternary):
            c = _truth(self.expr(node.cond))
            a, b = self.expr(node.then), self.expr(node.other)
            w = max(a.width, b.width)
            return ir.mux(c, _extend(a, w), _extend(b, w))
        if isinstance(node, Concat):
            parts = []
            for p in node.parts:
                if isinstance(p, Num) and p.width is None:
                    raise self.fail("unsized literal inside concatenation", p, "WIDTH_MISMATCH")
                parts.append(self.expr(p))
            return ir.concat(*parts)
        raise self.fail(f"unsupported expression {type(node).__name__}", node)

    def use(self, name, node) -> int:
        if name not in self.declared:
            raise self.fail(f"{name!r} used before declaration", node, "UNDECLARED")
        return self.widths[name]

    def fit(self, target, e: ir.Expr, node) -> ir.Expr:
        w = self.widths[target]
        if e.width > w:
            raise self.fail(f"{e.width}-bit value assigned to {w}-bit {target!r}", node, "WIDTH_MISMATCH")
        return _extend(e, w)

    # -- statements --------------------------------------------------------
    def execute(self, stmt, env: dict, owned: set, node_owner) -> dict:
        if isinstance(stmt, Block):
            for s in stmt.stmts:
                env = self.execute(s, env, owned, node_owner)
            return env
        if isinstance(stmt, NonBlocking):
            name = stmt.target
            if name not in self.declared:
                raise self.fail(f"{name!r} assigned before declaration", stmt, "UNDECLARED")
            if self.kind[name] != "reg":
                raise self.fail(f"{name!r} is not a register", stmt, "NOT_A_REG")
            owner = self.reg_owner.setdefault(name, node_owner)
            if owner is not node_owner:
                raise self.fail(f"{name!r} assigned in more than one always block", stmt,
                                "MULTIPLE_DRIVERS")
            owned.add(name)
            env = dict(env)
            env[name] = self.fit(name, self.expr(stmt.expr), stmt)
            return env
        if isinstance(stmt, If):
            c = _truth(self.expr(stmt.cond))
            then = self.execute(stmt.then, env, owned, node_owner)
            other = self.execute(stmt.other, env, owned, node_owner) if stmt.other is not None else env
            if c.op == "const":
                return then if c.value else other
            out = dict(env)
            for name in set(then) | set(other):
                cur = env.get(name, ir.var(name, self.widths[name]))
                a, b = then.get(name, cur), other.get(name, cur)
                out[name] = a if a == b else ir.mux(c, a, b)
            return out
        raise self.fail(f"unsupported statement {type(stmt).__name__}", stmt)

    # -- module ------------------------------------------------------------
    def run(self, pragmas: PragmaSet) -> ir.Design:
        m = self.m
        ports = []
        for p in m.ports:
            self.declare(p.name, p.width, "reg" if p.is_reg else ("input" if p.direction == "input" else "wire"), p)
            if p.direction == "output":
                self.outputs.append(p.name)
            ports.append(ir.Port(p.name, p.direction, p.width))

        self.reg_owner: dict[str, object] = {}
        nets: dict[str, ir.NetDef] = {}
        reg_order: list[str] = []
        wire_order: list[str] = []
        nxt: dict[str, ir.Expr] = {}
        resets: dict[str, int | None] = {}
        clocks = set()
        for p in m.ports:
            if p.is_reg:
                reg_order.append(p.name)
            elif p.direction == "output":
                wire_order.append(p.name)

        for item in m.items:
            if isinstance(item, Decl):
                for name in item.names:
                    self.declare(name, item.width, item.kind, item)
                    if item.kind == "reg":
                        if name in wire_order:
                            wire_order.remove(name)
                        reg_order.append(name)
                    else:
                        wire_order.append(name)
            elif isinstance(item, Assign):
                name = item.target
                if name not in self.declared:
                    raise self.fail(f"{name!r} assigned before declaration", item, "UNDECLARED")
                if self.kind[name] != "wire":
                    raise self.fail(f"continuous assignment to non-wire {name!r}", item, "NOT_A_WIRE")
                if name in nets:
                    raise self.fail(f"wire {name!r} assigned more than once", item, "MULTIPLE_DRIVERS")
                e = self.fit(name, self.expr(item.expr), item)
                nets[name] = ir.NetDef(name, self.widths[name], e)
            elif isinstance(item, Always):
                clocks.add(item.clock)
                self.use(item.clock, item)
                self.always(item, nxt, resets)
            else:  # pragma: no cover
                raise self.fail(f"unsupported item {type(item).__name__}", item)

        for name in wire_order:
            if name not in nets:
                raise self.fail(f"wire {name!r} is never assigned", None, "UNDRIVEN")

        clock = clocks.pop() if len(clocks) == 1 else "clk"
        if clocks:
            raise self.fail("more than one clock", None, "MULTI_CLOCK")
        reset = next((n for n in ("rst", "reset") if self.kind.get(n) == "input"), None)
        if reset is None:
            raise self.fail("no synchronous reset input ('rst' or 'reset')", None, "NO_RESET")

        regs = []
        for name in reg_order:
            regs.append(ir.RegDef(name, self.widths[name], resets.get(name, 0)))
            nxt.setdefault(name, ir.var(name, self.widths[name]))

        # reset-branch extraction may have produced references to the reset port
        for name, e in list(nxt.items()):
            nxt[name] = ir.rename(e, {"__reset__": reset}) if "__reset__" in e.support() else e

        annot = self.annotations(pragmas)
        d = ir.Design(m.name, tuple(ports), tuple(regs),
                      tuple(nets[w] for w in wire_order), nxt, annot, clock=clock, reset=reset)
        diags = ir.validate_design(d)
        if diags:
            raise ElabError("; ".join(map(str, diags)), code=diags[0].code, diagnostics=diags)
        return d

    def always(self, item: Always, nxt, resets):
        body = item.body
        while isinstance(body, Block) and len(body.stmts) == 1:
            body = body.stmts[0]
        owned: set[str] = set()
        if (isinstance(body, If) and isinstance(body.cond, Ident)
                and body.cond.name in ("rst", "reset") and self.kind.get(body.cond.name) == "input"):
            rst_env = self.execute(body.then, {}, owned, item)
            run_env = self.execute(body.other, {}, owned, item) if body.other is not None else {}
            for name, e in rst_env.items():
                if e.op != "const":
                    raise self.fail(f"reset value of {name!r} is not a constant", body, "RESET_NOT_CONST")
                resets[name] = e.value
            for name in owned:
                w = self.widths[name]
                e = run_env.get(name, ir.var(name, w))
                if name in rst_env:
                    nxt[name] = e
                else:
                    # not reset: holds during reset, like the source would
                    nxt[name] = ir.mux(ir.var("__reset__", 1), ir.var(name, w), e)
                    resets[name] = None
        else:
            env = self.execute(body, {}, owned, item)
            for name in owned:
                nxt[name] = env.get(name, ir.var(name, self.widths[name]))
                resets[name] = None

    def annotations(self, ps: PragmaSet) -> ir.SecurityAnnotations:
        ports = {p.name: p for p in self.m.ports}
        for kind in ("secret", "observable", "start", "done", "alarm"):
            for name in getattr(ps, kind):
                if name not in ports:
                    raise self.fail(f"@{kind} names undeclared port {name!r}", None, "UNKNOWN_PRAGMA_NAME")
        for kind in ("start", "done"):
            names = getattr(ps, kind)
            if not names:
                raise self.fail(f"missing @{kind} pragma", None, f"MISSING_{kind.upper()}")
            if len(names) != 1:
                raise self.fail(f"@{kind} must name exactly one port", None, "BAD_PRAGMA")
        if not ps.secret:
            raise self.fail("missing @secret pragma", None, "MISSING_SECRET")
        if not ps.observable:
            raise self.fail("missing @observable pragma", None, "MISSING_OBSERVABLE")
        assumes = tuple(_truth(self.expr(e)) for e in ps.assume)
        return ir.SecurityAnnotations(
            secret=frozenset(ps.secret), observable=frozenset(ps.observable),
            start=ps.start[0], done=ps.done[0], assumes=assumes,
            alarms=frozenset(ps.alarm), bound=ps.bound)


def elaborate(m: SourceModule, pragmas: PragmaSet | None = None) -> ir.Design:
    """Lower ``m``; ``pragmas`` overrides the ones found in the source comments."""
    ps = PragmaSet.from_module(m)
    if pragmas is not None:
        ps = ps.override(pragmas)
    return _Elaborator(m).run(ps)
