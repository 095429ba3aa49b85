"""Latency compensation: pad every transaction to the worst-case latency.

The hardened design renames the original ``done`` and data observables to
internal signals and drives the visible ports from a small wrapper:

* ``comp_cnt`` counts cycles since ``start`` and stops at ``t_max``;
* visible ``done`` is ``comp_cnt == t_max``;
* one holding register per data port captures the internal result on the
  first internal ``done``;
* visible data is AND-gated by the same comparator, so it stays zero until
  ``t_max`` and then shows the captured value;
* ``comp_overrun`` flags a transaction whose internal ``done`` has not come
  by ``t_max`` (impossible when ``t_max`` comes from an exhaustive report).

Original nets and next-state functions are copied untouched apart from the
renaming, so no existing combinational path changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .enumeration import TimingClassReport, counter_width


class NotExhaustive(ValueError):
    pass


class EmptyReport(ValueError):
    pass


class PortCollision(ValueError):
    pass


_RETRIES = 16


@dataclass(frozen=True)
class CompensatorSpec:
    t_max: int
    width: int
    latencies: tuple = ()

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be positive")
        if self.width != counter_width(self.t_max):
            raise ValueError(f"counter width {self.width} cannot hold exactly {self.t_max}")
        if any(t > self.t_max for t in self.latencies):
            raise ValueError("t_max is below a known latency")

    @classmethod
    def for_t_max(cls, t_max: int, latencies=()):
        return cls(t_max, counter_width(t_max), tuple(sorted(latencies)))

    def to_json(self) -> dict:
        return {"t_max": self.t_max, "counter_width": self.width,
                "latencies": list(self.latencies)}

    @classmethod
    def from_json(cls, doc: dict) -> "CompensatorSpec":
        return cls(int(doc["t_max"]), int(doc["counter_width"]),
                   tuple(int(t) for t in doc.get("latencies", ())))


def synthesize_spec(r: TimingClassReport) -> CompensatorSpec:
    """Compensator parameters from a complete class report."""
    if not r.exhausted:
        raise NotExhaustive(f"{r.design}: the class report is partial; refusing to harden")
    if not r.classes:
        raise EmptyReport(f"{r.design}: no timing class to compensate")
    return CompensatorSpec.for_t_max(r.t_max, r.latencies)


def _pick(base: str, taken: set) -> str:
    if base not in taken:
        return base
    for k in range(1, _RETRIES + 1):
        name = f"{base}_{k}"
        if name not in taken:
            return name
    raise PortCollision(f"no free name for {base!r} after {_RETRIES} suffixes")


@dataclass
class HardenedNames:
    """Where each piece of the wrapper ended up in the hardened design."""

    renamed: dict  # original observable -> internal name
    counter: str
    captured: str
    overrun: str
    holds: dict = field(default_factory=dict)  # visible data port -> holding register


def _names(d: ir.Design) -> tuple[HardenedNames, dict]:
    taken = set(d.signal_names()) | {p.name for p in d.ports}

    def grab(base):
        name = _pick(base, taken)
        taken.add(name)
        return name

    a = d.annot
    gated = [p.name for p in d.data_observables]
    renamed = {name: grab(f"{name}_int") for name in [a.done] + gated}
    names = HardenedNames(renamed, grab("comp_cnt"), grab("comp_captured"), grab("comp_overrun"))
    names.holds = {name: grab(f"{name}_hold") for name in gated}
    return names, renamed


def rename_map(d: ir.Design) -> dict:
    """Original signal -> its name inside ``harden(d, ...)``."""
    return _names(d)[1]


def harden(d: ir.Design, spec: CompensatorSpec) -> ir.Design:
    names, ren = _names(d)
    a = d.annot
    w = spec.width

    def rn(e):
        return ir.rename(e, ren)

    nets = [ir.NetDef(ren.get(n.name, n.name), n.width, rn(n.expr)) for n in d.nets]
    regs = [ir.RegDef(ren.get(r.name, r.name), r.width, r.reset) for r in d.regs]
    nxt = {ren.get(k, k): rn(e) for k, e in d.next.items()}

    start = ir.var(a.start, 1)
    done_int = ir.var(ren[a.done], 1)
    cnt = ir.var(names.counter, w)
    captured = ir.var(names.captured, 1)
    top = ir.const(spec.t_max, w)
    at_max = ir.eq(cnt, top)
    idle = ir.eq(cnt, ir.const(0, w))

    nxt[names.counter] = ir.mux(start, ir.const(1, w),
                                ir.mux(ir.bor(idle, at_max), cnt, ir.add(cnt, ir.const(1, w))))
    regs.append(ir.RegDef(names.counter, w, 0))
    nxt[names.captured] = ir.mux(start, ir.const(0, 1), ir.bor(captured, done_int))
    regs.append(ir.RegDef(names.captured, 1, 0))
    capture = ir.band(done_int, ir.bnot(captured))

    nets.append(ir.NetDef(a.done, 1, at_max))
    for port, hold_name in names.holds.items():
        pw = d.width(port)
        inner = ir.var(ren[port], pw)
        hold = ir.var(hold_name, pw)
        zero = ir.const(0, pw)
        nxt[hold_name] = ir.mux(start, zero, ir.mux(capture, inner, hold))
        regs.append(ir.RegDef(hold_name, pw, 0))
        value = ir.mux(captured, hold, inner)
        nets.append(ir.NetDef(port, pw, ir.mux(at_max, value, zero)))
    nets.append(ir.NetDef(names.overrun, 1,
                          ir.band(at_max, ir.band(ir.bnot(captured), ir.bnot(done_int)))))

    ports = [p for p in d.ports] + [ir.Port(names.overrun, "output", 1)]
    annot = ir.SecurityAnnotations(a.secret, a.observable, a.start, a.done, a.assumes,
                                   a.alarms | {names.overrun}, a.bound)
    sd = d.evolve(name=f"{d.name}_hardened", ports=tuple(ports), regs=tuple(regs),
                  nets=tuple(nets), next=nxt, annot=annot)
    diags = ir.validate_design(sd)
    if diags:
        raise AssertionError(f"hardened design is malformed: {diags[0]}")
    return sd


def structural_diff(d: ir.Design, sd: ir.Design) -> list[str]:
    """Original definitions that ``sd`` does not carry verbatim (modulo renaming).

    An empty list means the hardening only added logic.
    """
    ren = rename_map(d)
    problems = []
    for n in d.nets:
        new = sd.net(ren.get(n.name, n.name))
        if new is None:
            problems.append(f"net {n.name} is missing")
        elif new.width != n.width or new.expr != ir.rename(n.expr, ren):
            problems.append(f"net {n.name} changed")
    for r in d.regs:
        name = ren.get(r.name, r.name)
        new = sd.reg(name)
        if new is None:
            problems.append(f"register {r.name} is missing")
        elif (new.width, new.reset) != (r.width, r.reset):
            problems.append(f"register {r.name} changed width or reset value")
        elif sd.next.get(name) != ir.rename(d.next[r.name], ren):
            problems.append(f"next state of {r.name} changed")
    for p in d.inputs:
        q = sd.port(p.name)
        if q is None or q.direction != "input" or q.width != p.width:
            problems.append(f"input {p.name} changed")
    return problems


@dataclass
class OverheadReport:
    counter_flops: int
    hold_flops: int
    total_added_flops: int
    path_balanced_unit: int
    path_balanced_datapath: int
    savings_ratio: float
    note: str | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def overhead(r: TimingClassReport, d: ir.Design) -> OverheadReport:
    """Flop cost of the compensator against delay-line path balancing.

    Path balancing pads each class with ``t_max - t`` delay stages; the unit
    figure counts one flop per stage, the datapath figure multiplies by the
    total width of the data observables.
    """
    spec = synthesize_spec(r)
    data_width = sum(p.width for p in d.data_observables)
    unit = sum(spec.t_max - t for t in r.latencies)
    note = None
    if unit == 0:
        ratio = 1.0
        note = "single timing class: nothing to balance"
    else:
        ratio = unit / spec.width
    return OverheadReport(
        counter_flops=spec.width,
        hold_flops=data_width,
        total_added_flops=spec.width + data_width + 1,
        path_balanced_unit=unit,
        path_balanced_datapath=unit * max(1, data_width),
        savings_ratio=ratio,
        note=note,
    )
