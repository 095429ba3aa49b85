"""Cycle-accurate two-valued simulation.

Protocol shared by every engine in the package: one reset cycle (``rst=1``,
``start=0``), then cycle 0 with ``start=1`` and ``rst=0``, then ``start=0``
forever.  Data inputs hold their stimulus value throughout.  Latency is the
index of the first cycle >= 1 in which ``done`` is high.

Designs are compiled to straight-line Python, once for scalar integers and
once for numpy ``uint64`` vectors (one lane per stimulus).
"""

from __future__ import annotations

import itertools
import random
import weakref
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import ir

U64 = np.uint64


class StimulusWidthMismatch(ValueError):
    pass


class DomainTooLarge(ValueError):
    pass


class NonCompletion(RuntimeError):
    def __init__(self, stimuli, classes):
        self.stimuli = stimuli
        self.classes = classes
        shown = ", ".join(map(str, stimuli[:4])) + (" ..." if len(stimuli) > 4 else "")
        super().__init__(f"{len(stimuli)} stimuli never raised done: {shown}")


class SignatureMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Stimulus:
    public: Mapping[str, int] = field(default_factory=dict)
    secret: Mapping[str, int] = field(default_factory=dict)
    bound: int = 64

    def inputs(self) -> dict[str, int]:
        return {**self.public, **self.secret}


@dataclass
class TraceWitness:
    stimulus: Stimulus
    values: dict  # signal -> per-cycle values, cycle 0 first
    latency: int | None
    completed: bool
    alarms: list = field(default_factory=list)  # (cycle, signal)

    def to_json(self) -> dict:
        return {
            "public": dict(self.stimulus.public),
            "secret": dict(self.stimulus.secret),
            "bound": self.stimulus.bound,
            "latency": self.latency,
            "completed": self.completed,
        }


# ---------------------------------------------------------------------------
# code generation

class _Codegen:
    def __init__(self, d: ir.Design, vector: bool):
        self.d = d
        self.vector = vector
        self.lines: list[str] = []
        self.consts: dict[int, str] = {}
        self.memo: dict[ir.Expr, str] = {}
        self.local: dict[str, str] = {}
        self.tmp = 0

    def const(self, v: int) -> str:
        if not self.vector:
            return str(v)
        name = self.consts.get(v)
        if name is None:
            name = self.consts[v] = f"K{len(self.consts)}"
        return name

    def fresh(self) -> str:
        self.tmp += 1
        return f"t{self.tmp}"

    def expr(self, e: ir.Expr) -> str:
        for node in e.walk():
            if node in self.memo:
                continue
            if node.op == "var":
                self.memo[node] = self.local[node.value]
            elif node.op == "const":
                self.memo[node] = self.const(node.value)
            elif all(a.op == "const" for a in node.args):
                self.memo[node] = self.const(ir.eval_expr(node, {}))
            else:
                t = self.fresh()
                self.lines.append(f"    {t} = {self._code(node)}")
                self.memo[node] = t
        return self.memo[e]

    def _code(self, e: ir.Expr) -> str:
        a = [self.memo[x] for x in e.args]
        w = e.width
        m = self.const(ir.mask(w))
        v = self.vector
        op = e.op
        if op == "not":
            return f"{a[0]} ^ {m}"
        if op in ("and", "or", "xor"):
            sym = {"and": "&", "or": "|", "xor": "^"}[op]
            return f"{a[0]} {sym} {a[1]}"
        if op in ("add", "sub", "mul"):
            sym = {"add": "+", "sub": "-", "mul": "*"}[op]
            return f"({a[0]} {sym} {a[1]}) & {m}"
        if op in ("eq", "neq", "lt"):
            sym = {"eq": "==", "neq": "!=", "lt": "<"}[op]
            return f"({a[0]} {sym} {a[1]}).astype(U64)" if v else f"int({a[0]} {sym} {a[1]})"
        if op == "shl":
            if v:
                return (f"np.where({a[1]} < {self.const(w)}, "
                        f"({a[0]} << np.minimum({a[1]}, {self.const(63)})) & {m}, {self.const(0)})")
            return f"(({a[0]} << {a[1]}) & {m} if {a[1]} < {w} else 0)"
        if op == "shr":
            if v:
                return (f"np.where({a[1]} < {self.const(w)}, "
                        f"{a[0]} >> np.minimum({a[1]}, {self.const(63)}), {self.const(0)})")
            return f"({a[0]} >> {a[1]} if {a[1]} < {w} else 0)"
        if op == "mux":
            return f"np.where({a[0]}, {a[1]}, {a[2]})" if v else f"({a[1]} if {a[0]} else {a[2]})"
        if op == "slice":
            return f"({a[0]} >> {self.const(e.value[1])}) & {m}"
        if op == "concat":
            parts = []
            shift = w
            for x, code in zip(e.args, a):
                shift -= x.width
                parts.append(f"({code} << {self.const(shift)})" if shift else code)
            return " | ".join(parts)
        if op == "zext":
            return a[0]
        raise AssertionError(op)

    def build(self):
        d = self.d
        order = ir.comb_topo_order(d)
        for i, name in enumerate(p.name for p in d.inputs):
            self.local[name] = f"s{i}"
            self.lines.append(f"    s{i} = v[{name!r}]")
        for i, r in enumerate(d.regs):
            self.local[r.name] = f"r{i}"
            self.lines.append(f"    r{i} = v[{r.name!r}]")
        nets = {n.name: n for n in d.nets}
        for name in order:
            code = self.expr(nets[name].expr)
            self.local[name] = code
            self.lines.append(f"    v[{name!r}] = {code}")
        nxt = []
        for r in d.regs:
            code = self.expr(d.next[r.name])
            if r.reset is not None:
                code = f"({self.const(r.reset)} if rst else {code})"
            nxt.append(f"{r.name!r}: {code}")
        assume_code = [self.expr(e) for e in d.annot.assumes]
        body = "\n".join(self.lines)
        src = (f"def cycle(v, rst):\n{body}\n    return {{{', '.join(nxt)}}}\n")
        ok = " & ".join(assume_code) if assume_code else self.const(1)
        src += f"\ndef assumed(v):\n{body}\n    return {ok}\n"
        ns = {"np": np, "U64": U64}
        for val, name in self.consts.items():
            ns[name] = U64(val)
        exec(compile(src, f"<sim {d.name}>", "exec"), ns)
        return ns["cycle"], ns["assumed"], src


class Compiled:
    def __init__(self, d: ir.Design):
        self.design = d
        self.cycle, self.assumed, self.source = _Codegen(d, False).build()
        self.vcycle, self.vassumed, self.vsource = _Codegen(d, True).build()


_cache: "weakref.WeakKeyDictionary[ir.Design, Compiled]" = weakref.WeakKeyDictionary()


def compiled(d: ir.Design) -> Compiled:
    c = _cache.get(d)
    if c is None:
        c = _cache[d] = Compiled(d)
    return c


# ---------------------------------------------------------------------------
# single runs

def _check_stimulus(d: ir.Design, stim: Stimulus) -> dict[str, int]:
    vals = stim.inputs()
    known = {p.name: p for p in d.public_ports + d.secret_ports}
    for name, value in vals.items():
        p = known.get(name)
        if p is None:
            raise StimulusWidthMismatch(f"{name!r} is not a data input of {d.name}")
        if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= ir.mask(p.width):
            raise StimulusWidthMismatch(f"value {value!r} does not fit {p.width}-bit {name!r}")
    if stim.bound < 1:
        raise StimulusWidthMismatch("bound must be at least 1")
    out = {name: 0 for name in known}
    out.update({k: int(v) for k, v in vals.items()})
    return out


def assumptions_hold(d: ir.Design, inputs: Mapping[str, int]) -> bool:
    env = {p.name: 0 for p in d.inputs}
    env.update(inputs)
    return all(ir.eval_expr(e, env) for e in d.annot.assumes)


def run(d: ir.Design, stim: Stimulus, signals: Iterable[str] | None = None,
        stop_at_done: bool = True) -> TraceWitness:
    """Simulate one stimulus and measure its completion latency."""
    data = _check_stimulus(d, stim)
    c = compiled(d)
    a = d.annot
    if signals is None:
        signals = [a.start, a.done] + sorted(a.observable - {a.done}) + sorted(a.alarms)
    signals = list(dict.fromkeys(signals))
    for s in signals:
        if not d.has_signal(s):
            raise ir.UnknownSignal(s)
    base = {p.name: 0 for p in d.inputs}
    base.update(data)
    state = {r.name: 0 for r in d.regs}

    v = dict(base)
    v[d.reset] = 1
    v.update(state)
    state = c.cycle(v, True)

    values = {s: [] for s in signals}
    latency = None
    alarms = []
    for cyc in range(stim.bound + 1):
        v = dict(base)
        v[d.reset] = 0
        v[a.start] = 1 if cyc == 0 else 0
        v.update(state)
        nxt = c.cycle(v, False)
        for s in signals:
            values[s].append(int(v[s]))
        for s in sorted(a.alarms):
            if v[s]:
                alarms.append((cyc, s))
        if cyc >= 1 and v[a.done] and latency is None:
            latency = cyc
            if stop_at_done:
                break
        state = nxt
    return TraceWitness(stim, values, latency, latency is not None, alarms)


def write_trace(w: TraceWitness, path) -> None:
    """Dump a witness as ``cycle signal value`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# cycle signal value\n")
        n = max((len(v) for v in w.values.values()), default=0)
        for cyc in range(n):
            for name, vals in w.values.items():
                fh.write(f"{cyc} {name} {vals[cyc]}\n")


# ---------------------------------------------------------------------------
# batched runs

def _lanes(x, n):
    return np.broadcast_to(np.asarray(x, dtype=U64), (n,))


def simulate_batch(d: ir.Design, inputs: Mapping[str, np.ndarray], bound: int):
    """Run many stimuli at once.

    Returns ``(latency, data)``: ``latency`` holds 0 for lanes that never
    completed within ``bound``; ``data`` maps each data observable to its value
    in the done cycle.
    """
    c = compiled(d)
    a = d.annot
    lanes = {k: np.asarray(v, dtype=U64) for k, v in inputs.items()}
    n = len(next(iter(lanes.values()))) if lanes else 1
    base = {p.name: np.zeros(n, dtype=U64) for p in d.inputs}
    base.update(lanes)
    zeros, ones = np.zeros(n, dtype=U64), np.ones(n, dtype=U64)
    state = {r.name: zeros for r in d.regs}

    v = dict(base)
    v[d.reset] = ones
    v.update(state)
    state = {k: _lanes(x, n) for k, x in c.vcycle(v, True).items()}

    latency = np.zeros(n, dtype=np.int64)
    data = {p.name: np.zeros(n, dtype=U64) for p in d.data_observables}
    for cyc in range(bound + 1):
        v = dict(base)
        v[d.reset] = zeros
        v[a.start] = ones if cyc == 0 else zeros
        v.update(state)
        nxt = c.vcycle(v, False)
        if cyc >= 1:
            fresh = (_lanes(v[a.done], n) != 0) & (latency == 0)
            if fresh.any():
                latency[fresh] = cyc
                for name in data:
                    data[name][fresh] = _lanes(v[name], n)[fresh]
                if (latency > 0).all():
                    break
        state = {k: _lanes(x, n) for k, x in nxt.items()}
    return latency, data


def trace_batch(d: ir.Design, inputs: Mapping[str, np.ndarray], cycles: int,
                signals: Iterable[str]) -> dict[str, np.ndarray]:
    """Per-cycle values of ``signals`` for many stimuli, ignoring done.

    Returns arrays of shape ``(cycles, lanes)``, cycle 0 being the start cycle.
    """
    c = compiled(d)
    a = d.annot
    signals = list(signals)
    lanes = {k: np.asarray(v, dtype=U64) for k, v in inputs.items()}
    n = len(next(iter(lanes.values()))) if lanes else 1
    base = {p.name: np.zeros(n, dtype=U64) for p in d.inputs}
    base.update(lanes)
    zeros, ones = np.zeros(n, dtype=U64), np.ones(n, dtype=U64)
    v = dict(base)
    v[d.reset] = ones
    v.update({r.name: zeros for r in d.regs})
    state = {k: _lanes(x, n) for k, x in c.vcycle(v, True).items()}
    out = {s: np.zeros((cycles, n), dtype=U64) for s in signals}
    for cyc in range(cycles):
        v = dict(base)
        v[d.reset] = zeros
        v[a.start] = ones if cyc == 0 else zeros
        v.update(state)
        nxt = c.vcycle(v, False)
        for s in signals:
            out[s][cyc] = _lanes(v[s], n)
        state = {k: _lanes(x, n) for k, x in nxt.items()}
    return out


def assumed_batch(d: ir.Design, inputs: Mapping[str, np.ndarray], n: int) -> np.ndarray:
    if not d.annot.assumes:
        return np.ones(n, dtype=bool)
    v = {p.name: np.zeros(n, dtype=U64) for p in d.inputs}
    v.update({k: np.asarray(x, dtype=U64) for k, x in inputs.items()})
    v.update({r.name: np.zeros(n, dtype=U64) for r in d.regs})
    return _lanes(compiled(d).vassumed(v), n) != 0


def _domain_chunks(ports, fixed: Mapping[str, int], chunk: int):
    """Yield input-array dicts covering every valuation of ``ports``."""
    total = sum(p.width for p in ports)
    count = 1 << total
    for lo in range(0, count, chunk):
        idx = np.arange(lo, min(count, lo + chunk), dtype=U64)
        out = {k: np.full(len(idx), v, dtype=U64) for k, v in fixed.items()}
        shift = 0
        for p in ports:
            out[p.name] = (idx >> U64(shift)) & U64(ir.mask(p.width))
            shift += p.width
        yield out


def _explicit_chunks(secrets: Iterable[Mapping[str, int]], names, fixed, chunk):
    it = iter(secrets)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        out = {k: np.full(len(block), v, dtype=U64) for k, v in fixed.items()}
        for name in names:
            out[name] = np.array([s.get(name, 0) for s in block], dtype=U64)
        yield out


def exhaustive_classes(d: ir.Design, public: Mapping[str, int] | None, secrets=None,
                       bound: int = 64, force: bool = False, allow_incomplete: bool = False,
                       max_bits: int = 24, chunk: int = 1 << 16,
                       examples: dict | None = None) -> dict[int, int]:
    """Brute-force latency classes: latency -> number of stimuli reaching it.

    ``public=None`` enumerates the public inputs as well; ``secrets=None``
    enumerates every secret valuation.  Stimuli violating the design's
    assumptions are skipped.  When ``examples`` is a dict it receives the
    first input valuation found for each latency.
    """
    secret_ports = d.secret_ports
    public_ports = d.public_ports
    fixed: dict[str, int] = {}
    enum_ports = []
    if public is None:
        enum_ports += public_ports
    else:
        known = {p.name: p for p in public_ports}
        for k, v in public.items():
            if k not in known or not 0 <= v <= ir.mask(known[k].width):
                raise StimulusWidthMismatch(f"bad public value {k}={v!r}")
        fixed = {p.name: int(public.get(p.name, 0)) for p in public_ports}
    if secrets is None:
        enum_ports += secret_ports
    bits = sum(p.width for p in enum_ports)
    if bits > max_bits and not force:
        raise DomainTooLarge(f"{bits} enumerated input bits exceed the {max_bits}-bit guard")

    if secrets is None:
        chunks = _domain_chunks(enum_ports, fixed, chunk)
    else:
        if public is None and public_ports:
            raise ValueError("explicit secret domains need a fixed public valuation")
        chunks = _explicit_chunks(secrets, [p.name for p in secret_ports], fixed, chunk)

    counts: Counter = Counter()
    stuck = []
    for inputs in chunks:
        n = len(next(iter(inputs.values()))) if inputs else 1
        keep = assumed_batch(d, inputs, n)
        if not keep.all():
            inputs = {k: v[keep] for k, v in inputs.items()}
            n = int(keep.sum())
            if n == 0:
                continue
        lat, _ = simulate_batch(d, inputs, bound)
        counts.update(lat[lat > 0].tolist())
        if examples is not None:
            for t in np.unique(lat[lat > 0]).tolist():
                if t not in examples:
                    i = int(np.nonzero(lat == t)[0][0])
                    examples[t] = {k: int(v[i]) for k, v in inputs.items()}
        for i in np.nonzero(lat == 0)[0][:64].tolist():
            stuck.append({k: int(v[i]) for k, v in inputs.items()})
    result = dict(sorted(counts.items()))
    if stuck and not allow_incomplete:
        raise NonCompletion(stuck, result)
    return result


# ---------------------------------------------------------------------------
# co-simulation

@dataclass
class CosimResult:
    verdict: str  # PASS | FAIL
    samples: int
    mismatch: dict | None = None

    @property
    def ok(self) -> bool:
        return self.verdict == "PASS"


def _signature(d: ir.Design):
    return ({p.name: p.width for p in d.public_ports},
            {p.name: p.width for p in d.secret_ports},
            {p.name: p.width for p in d.data_observables})


def random_inputs(d: ir.Design, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """``n`` random stimuli satisfying the design's assumptions."""
    ports = d.public_ports + d.secret_ports

    def draw(k):
        out = {}
        for p in ports:
            hi = rng.integers(0, 1 << 32, size=k, dtype=np.uint64)
            lo = rng.integers(0, 1 << 32, size=k, dtype=np.uint64)
            out[p.name] = ((hi << U64(32)) | lo) & U64(ir.mask(p.width))
        return out

    got = draw(n)
    for _ in range(64):
        ok = assumed_batch(d, got, n)
        if ok.all():
            return got
        fill = draw(n)
        got = {k: np.where(ok, got[k], fill[k]) for k in got}
    raise ValueError(f"could not sample stimuli satisfying the assumptions of {d.name}")


def cosim_equiv(a: ir.Design, b: ir.Design, samples: int = 1000, seed: int = 0,
                bound: int = 256, bound_b: int | None = None) -> CosimResult:
    """Compare observable data at each design's own done cycle."""
    sa, sb = _signature(a), _signature(b)
    if sa != sb:
        raise SignatureMismatch(f"{a.name} and {b.name} differ in port signature: {sa} vs {sb}")
    rng = np.random.default_rng(seed)
    inputs = random_inputs(a, samples, rng)
    la, da = simulate_batch(a, inputs, bound)
    lb, db = simulate_batch(b, inputs, bound if bound_b is None else bound_b)
    bad = (la > 0) != (lb > 0)
    for name in da:
        bad |= (la > 0) & (da[name] != db[name])
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        stim = {k: int(v[i]) for k, v in inputs.items()}
        detail = {"inputs": stim, "latency_a": int(la[i]), "latency_b": int(lb[i]),
                  "data_a": {k: int(v[i]) for k, v in da.items()},
                  "data_b": {k: int(v[i]) for k, v in db.items()}}
        return CosimResult("FAIL", samples, detail)
    return CosimResult("PASS", samples)


def random_stimulus(d: ir.Design, rng: random.Random, bound: int) -> Stimulus:
    """A single random stimulus respecting the assumptions (rejection sampling)."""
    for _ in range(10_000):
        pub = {p.name: rng.getrandbits(p.width) for p in d.public_ports}
        sec = {p.name: rng.getrandbits(p.width) for p in d.secret_ports}
        if assumptions_hold(d, {**pub, **sec}):
            return Stimulus(pub, sec, bound)
    raise ValueError(f"could not sample a stimulus satisfying the assumptions of {d.name}")
