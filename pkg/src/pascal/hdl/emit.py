"""Pretty-printing of a :class:`ir.Design` back to mini-HDL text."""

from __future__ import annotations

from .. import ir

_INFIX = {"and": "&", "or": "|", "xor": "^", "add": "+", "sub": "-", "mul": "*",
          "eq": "==", "neq": "!=", "lt": "<", "shl": "<<", "shr": ">>"}


def _lit(value: int, width: int) -> str:
    if width > 8 and value > 9:
        return f"{width}'h{value:X}"
    return f"{width}'d{value}"


class _Printer:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.hoisted: list[tuple[str, int, str]] = []
        self.memo: dict[ir.Expr, str] = {}

    def fresh(self) -> str:
        k = len(self.hoisted)
        while f"_emit_t{k}" in self.taken:
            k += 1
        name = f"_emit_t{k}"
        self.taken.add(name)
        return name

    def expr(self, e: ir.Expr) -> str:
        # iterative post-order keeps deep expressions off the Python stack
        for node in e.walk():
            if node not in self.memo:
                self.memo[node] = self._node(node)
        return self.memo[e]

    def _node(self, e: ir.Expr) -> str:
        op = e.op
        if op == "const":
            return _lit(e.value, e.width)
        if op == "var":
            return e.value
        a = [self.memo[x] for x in e.args]
        if op == "not":
            return f"~{a[0]}"
        if op in _INFIX:
            return f"({a[0]} {_INFIX[op]} {a[1]})"
        if op == "mux":
            return f"({a[0]} ? {a[1]} : {a[2]})"
        if op == "concat":
            return "{" + ", ".join(a) + "}"
        if op == "zext":
            pad = e.width - e.args[0].width
            return "{" + f"{_lit(0, pad)}, {a[0]}" + "}"
        if op == "slice":
            hi, lo = e.value
            base = e.args[0]
            if base.op == "var":
                name = base.value
            else:
                name = self.fresh()
                self.hoisted.append((name, base.width, a[0]))
            return f"{name}[{hi}:{lo}]" if hi != lo else f"{name}[{hi}]"
        raise AssertionError(op)


def _range(width: int) -> str:
    return f"[{width - 1}:0] " if width > 1 else ""


def emit(d: ir.Design) -> str:
    """Render ``d`` as mini-HDL, security pragmas included."""
    pr = _Printer(set(d.signal_names()) | {p.name for p in d.ports})
    a = d.annot
    lines = []
    secret = [p.name for p in d.inputs if p.name in a.secret]
    observable = [p.name for p in d.outputs if p.name in a.observable]
    lines.append(f"// @secret {' '.join(secret)}")
    lines.append(f"// @observable {' '.join(observable)}")
    lines.append(f"// @start {a.start}")
    lines.append(f"// @done {a.done}")
    for e in a.assumes:
        lines.append(f"// @assume {pr.expr(e)}")
    alarms = [p.name for p in d.outputs if p.name in a.alarms]
    if alarms:
        lines.append(f"// @alarm {' '.join(alarms)}")
    if a.bound is not None:
        lines.append(f"// @bound {a.bound}")

    port_names = {p.name for p in d.ports}
    port_txt = []
    for p in d.ports:
        kind = "output reg" if p.direction == "output" and d.reg(p.name) else p.direction
        port_txt.append(f"{kind} {_range(p.width)}{p.name}")
    lines.append(f"module {d.name}(" + ", ".join(port_txt) + ");")

    body = []
    for r in d.regs:
        if r.name not in port_names:
            body.append(f"  reg {_range(r.width)}{r.name};")
    for n in d.nets:
        if n.name not in port_names:
            body.append(f"  wire {_range(n.width)}{n.name};")

    assigns = [f"  assign {n.name} = {pr.expr(n.expr)};" for n in d.nets]
    reset_regs = [r for r in d.regs if r.reset is not None]
    free_regs = [r for r in d.regs if r.reset is None]
    blocks = []
    if reset_regs:
        blocks.append(f"  always @(posedge {d.clock}) begin")
        blocks.append(f"    if ({d.reset}) begin")
        for r in reset_regs:
            blocks.append(f"      {r.name} <= {_lit(r.reset, r.width)};")
        blocks.append("    end else begin")
        for r in reset_regs:
            blocks.append(f"      {r.name} <= {pr.expr(d.next[r.name])};")
        blocks.append("    end")
        blocks.append("  end")
    if free_regs:
        blocks.append(f"  always @(posedge {d.clock}) begin")
        for r in free_regs:
            blocks.append(f"    {r.name} <= {pr.expr(d.next[r.name])};")
        blocks.append("  end")

    # hoisted temporaries are only known after printing everything else
    for name, width, _ in pr.hoisted:
        body.append(f"  wire {_range(width)}{name};")
    assigns += [f"  assign {name} = {txt};" for name, _, txt in pr.hoisted]

    lines += body + assigns + blocks
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
