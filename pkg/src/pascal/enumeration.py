"""Completion-latency class enumeration by bounded model checking.

Each round asks the solver for a run whose first ``done`` lands on a latency
not seen yet, replays the answer in the simulator, blocks that latency and
asks again.  The loop ends when the query becomes unsatisfiable, at which
point every latency reachable within the bound has been found.

Two formulations are provided and are expected to agree:

``property``
    one incremental solver session; blocking adds a unit clause on the
    "first done at cycle t" literal.
``instrumented``
    the design is wrapped with a cycle counter and a ``pascal_hit`` output
    (see :func:`build_modified_duv`) and re-unrolled for every round.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import ir, sim, taint
from .bitblast import FALSE, CnfBuilder, first_done_literals, unroll_and_blast
from .sat import SAT, UNSAT, make_solver

NO_PATH = "NO_PATH"
NEVER_COMPLETES = "NEVER_COMPLETES"
CONSTANT = "CONSTANT"
DISPARATE = "DISPARATE"
INCONCLUSIVE = "INCONCLUSIVE"

SECURE = "SECURE"
LEAKS = "LEAKS"

MODES = ("property", "instrumented")


class BoundTooSmall(ValueError):
    pass


class SolverTimeout(RuntimeError):
    pass


class ReplayMismatch(AssertionError):
    """The solver's model does not reproduce in the simulator."""


class BlockedSet:
    """Latencies already found, in discovery order."""

    def __init__(self, items=(), bound: int | None = None):
        self.bound = bound
        self._items: list[int] = []
        for t in items:
            self.add(t)

    def add(self, t: int):
        if t in self._items:
            raise ValueError(f"latency {t} is already blocked")
        if self.bound is not None and t > self.bound:
            raise BoundTooSmall(f"latency {t} exceeds the bound {self.bound}")
        self._items.append(int(t))

    def __contains__(self, t):
        return t in self._items

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __repr__(self):
        return f"BlockedSet({self._items})"


@dataclass
class Iteration:
    index: int
    latency: int | None  # None: the query was unsatisfiable or undecided
    wall_ms: float
    result: str  # SAT | UNSAT | UNKNOWN


@dataclass
class TimingClassReport:
    design: str
    bound: int
    engine: str
    mode: str | None
    classes: list = field(default_factory=list)  # (latency, TraceWitness), discovery order
    exhausted: bool = False
    verdict: str = INCONCLUSIVE
    iterations: list = field(default_factory=list)
    taint_verdict: str | None = None

    @property
    def latencies(self) -> list[int]:
        return [t for t, _ in self.classes]

    @property
    def t_max(self) -> int | None:
        return max(self.latencies) if self.classes else None

    def witness(self, latency: int) -> sim.TraceWitness:
        for t, w in self.classes:
            if t == latency:
                return w
        raise KeyError(latency)


def _verdict(classes, exhausted) -> str:
    if not exhausted:
        return INCONCLUSIVE
    if not classes:
        return NEVER_COMPLETES
    return CONSTANT if len(classes) == 1 else DISPARATE


def counter_width(limit: int) -> int:
    """Bits needed to count from 0 up to ``limit``."""
    if limit < 1:
        raise ValueError("limit must be positive")
    return limit.bit_length()


def _fresh(d: ir.Design, base: str) -> str:
    name, k = base, 1
    taken = set(d.signal_names()) | {p.name for p in d.ports}
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    return name


def build_modified_duv(d: ir.Design, blocked: BlockedSet | Iterable, bound: int) -> ir.Design:
    """Wrap ``d`` with a latency counter and a ``pascal_hit`` output.

    The counter holds the number of cycles since the start pulse (it saturates
    at its maximum), a sticky flag remembers an earlier ``done``, and
    ``pascal_hit`` rises on the first ``done`` whose latency is not blocked.
    The hit port is always the last port of the returned design.
    """
    blocked = list(blocked)
    for t in blocked:
        if t > bound:
            raise BoundTooSmall(f"blocked latency {t} exceeds the bound {bound}")
    a = d.annot
    w = counter_width(bound)
    cnt_n, seen_n, hit_n = _fresh(d, "pascal_cnt"), _fresh(d, "pascal_seen"), _fresh(d, "pascal_hit")
    cnt = ir.var(cnt_n, w)
    seen = ir.var(seen_n, 1)
    start = ir.var(a.start, 1)
    done = ir.var(a.done, 1)
    top = ir.const(ir.mask(w), w)
    cnt_next = ir.mux(start, ir.const(1, w),
                      ir.mux(ir.eq(cnt, top), cnt, ir.add(cnt, ir.const(1, w))))
    seen_next = ir.mux(start, ir.const(0, 1), ir.bor(seen, done))
    hit = ir.band(ir.band(done, ir.bnot(seen)), ir.bnot(start))
    for t in blocked:  # the union clause: counter differs from every blocked latency
        hit = ir.band(hit, ir.neq(cnt, ir.const(t, w)))
    nxt = dict(d.next)
    nxt[cnt_n] = cnt_next
    nxt[seen_n] = seen_next
    annot = ir.SecurityAnnotations(a.secret, a.observable | {hit_n}, a.start, a.done,
                                   a.assumes, a.alarms, a.bound)
    md = d.evolve(
        name=f"{d.name}_modified",
        ports=d.ports + (ir.Port(hit_n, "output", 1),),
        regs=d.regs + (ir.RegDef(cnt_n, w, 0), ir.RegDef(seen_n, 1, 0)),
        nets=d.nets + (ir.NetDef(hit_n, 1, hit),),
        next=nxt,
        annot=annot,
    )
    diags = ir.validate_design(md)
    if diags:
        raise AssertionError(f"modified design is malformed: {diags[0]}")
    return md


def hit_port(md: ir.Design) -> str:
    return md.ports[-1].name


def replay(d: ir.Design, inputs: Mapping[str, int], bound: int, expect: int | None = None,
           public: Mapping[str, int] | None = None) -> sim.TraceWitness:
    """Rebuild a stimulus from decoded inputs and simulate it."""
    secret_names = {p.name for p in d.secret_ports}
    pub = {p.name: int(inputs.get(p.name, 0)) for p in d.public_ports}
    if public:
        pub.update(public)
    sec = {p.name: int(inputs.get(p.name, 0)) for p in d.secret_ports if p.name in secret_names}
    w = sim.run(d, sim.Stimulus(pub, sec, bound))
    if expect is not None and w.latency != expect:
        raise ReplayMismatch(f"{d.name}: solver claimed latency {expect}, simulation gives {w.latency}")
    return w


class _PropertySession:
    """One incremental solver; latencies are blocked with unit clauses."""

    def __init__(self, d, bound, public, solver_cmd, clause_budget):
        self.d = d
        self.solver = make_solver(solver_cmd)
        self.b = CnfBuilder(self.solver, clause_budget)
        self.uf = unroll_and_blast(d, bound, [d.annot.done], self.b, fixed=public)
        self.first = first_done_literals(self.b, self.uf)
        self.b.clause([lit for lit in self.first.values()] or [FALSE])

    def block(self, t):
        self.b.clause([-self.first[t]])

    def query(self, blocked, timeout):
        res = self.solver.solve(time_budget=timeout)
        if res is not SAT:
            return res, None, None
        hits = [t for t, lit in self.first.items()
                if lit != FALSE and self.solver.model_value(lit)]
        return res, hits[0], self.uf.decode_inputs()


class _InstrumentedSession:
    """Rebuilds the counter-instrumented design for every query."""

    def __init__(self, d, bound, public, solver_cmd, clause_budget):
        self.args = (d, bound, public, solver_cmd, clause_budget)

    def block(self, t):
        pass  # the blocked set is rebuilt into the design each round

    def query(self, blocked, timeout):
        d, bound, public, solver_cmd, clause_budget = self.args
        md = build_modified_duv(d, blocked, bound)
        hit = hit_port(md)
        solver = make_solver(solver_cmd)
        b = CnfBuilder(solver, clause_budget)
        uf = unroll_and_blast(md, bound, [hit], b, fixed=public)
        lits = {t: uf.lit(hit, t) for t in range(1, bound + 1)}
        b.clause([lit for lit in lits.values()] or [FALSE])
        res = solver.solve(time_budget=timeout)
        if res is not SAT:
            return res, None, None
        t = min(t for t, lit in lits.items() if lit != FALSE and solver.model_value(lit))
        return res, t, uf.decode_inputs()


def _session(mode, d, bound, public, solver_cmd, clause_budget):
    if mode == "property":
        return _PropertySession(d, bound, public, solver_cmd, clause_budget)
    if mode == "instrumented":
        return _InstrumentedSession(d, bound, public, solver_cmd, clause_budget)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _resolve_bound(d: ir.Design, bound: int | None) -> int:
    if bound is None:
        bound = d.annot.bound
    if bound is None:
        raise ValueError(f"{d.name}: no bound given and the design carries no @bound pragma")
    if bound < 1:
        raise ValueError("bound must be at least 1")
    return bound


def find_witness(d: ir.Design, blocked=(), bound: int | None = None, mode: str = "property",
                 public: Mapping[str, int] | None = None, solver_cmd: str | None = None,
                 timeout: float | None = None, clause_budget: int | None = None):
    """A replayed run whose latency is not blocked, or None when none exists."""
    bound = _resolve_bound(d, bound)
    blocked = BlockedSet(blocked, bound)
    s = _session(mode, d, bound, public, solver_cmd, clause_budget)
    for t in blocked:
        s.block(t)
    res, t, inputs = s.query(list(blocked), timeout)
    if res is UNSAT:
        return None
    if res is not SAT:
        raise SolverTimeout(f"{d.name}: solver gave up within the time budget")
    return replay(d, inputs, bound, expect=t, public=public)


def enumerate_classes(d: ir.Design, bound: int | None = None, mode: str = "property",
                      engine: str = "bmc", public: Mapping[str, int] | None = None,
                      solver_cmd: str | None = None, timeout: float | None = None,
                      clause_budget: int | None = None, precheck: bool = True,
                      force: bool = False) -> TimingClassReport:
    """Find every completion latency reachable within ``bound`` cycles.

    With ``precheck`` the taint pass runs first and a design without any
    secret-to-observable path gets an empty ``NO_PATH`` report.
    """
    bound = _resolve_bound(d, bound)
    rep = TimingClassReport(d.name, bound, engine, mode if engine == "bmc" else None)
    if precheck:
        pv = taint.has_security_path(d)
        rep.taint_verdict = pv.verdict
        if not pv.exists:
            rep.verdict = NO_PATH
            return rep
    if engine == "oracle":
        return _oracle_report(d, bound, public, rep, force)
    if engine != "bmc":
        raise ValueError(f"unknown engine {engine!r}")

    t0 = time.perf_counter()
    s = _session(mode, d, bound, public, solver_cmd, clause_budget)
    setup_ms = (time.perf_counter() - t0) * 1e3
    blocked = BlockedSet(bound=bound)
    for k in range(bound + 1):
        t0 = time.perf_counter()
        res, t, inputs = s.query(list(blocked), timeout)
        if res is SAT:
            w = replay(d, inputs, bound, expect=t, public=public)
        ms = (time.perf_counter() - t0) * 1e3 + (setup_ms if k == 0 else 0.0)
        if res is UNSAT:
            rep.iterations.append(Iteration(k, None, ms, "UNSAT"))
            rep.exhausted = True
            break
        if res is not SAT:
            rep.iterations.append(Iteration(k, None, ms, "UNKNOWN"))
            break
        rep.iterations.append(Iteration(k, t, ms, "SAT"))
        rep.classes.append((t, w))
        blocked.add(t)
        s.block(t)
    else:  # pragma: no cover - more classes than cycles is impossible
        raise AssertionError("blocking loop exceeded its iteration bound")
    rep.verdict = _verdict(rep.classes, rep.exhausted)
    return rep


def _oracle_report(d, bound, public, rep, force):
    t0 = time.perf_counter()
    examples: dict = {}
    classes = sim.exhaustive_classes(d, public, bound=bound, force=force,
                                     allow_incomplete=True, examples=examples)
    ms = (time.perf_counter() - t0) * 1e3
    for k, t in enumerate(sorted(classes)):
        w = replay(d, examples[t], bound, expect=t, public=public)
        rep.classes.append((t, w))
        rep.iterations.append(Iteration(k, t, ms / max(1, len(classes)), "SAT"))
    rep.exhausted = True
    rep.verdict = _verdict(rep.classes, True)
    return rep


@dataclass
class NoninterferenceResult:
    verdict: str
    bound: int
    pair: tuple | None = None  # two TraceWitness with equal public inputs
    wall_ms: float = 0.0


def check_noninterference(d: ir.Design, bound: int | None = None,
                          solver_cmd: str | None = None, timeout: float | None = None,
                          clause_budget: int | None = None) -> NoninterferenceResult:
    """Self-composition: can two runs agreeing on public inputs finish at different cycles?"""
    bound = _resolve_bound(d, bound)
    t0 = time.perf_counter()
    solver = make_solver(solver_cmd)
    b = CnfBuilder(solver, clause_budget)
    shared = {p.name: b.fresh_word(p.width) for p in d.public_ports}
    ua = unroll_and_blast(d, bound, [d.annot.done], b, inputs=shared)
    ub = unroll_and_blast(d, bound, [d.annot.done], b, inputs=shared)
    fa = first_done_literals(b, ua)
    fb = first_done_literals(b, ub)
    b.clause(list(fa.values()) or [FALSE])
    b.clause(list(fb.values()) or [FALSE])
    for t in range(1, bound + 1):
        b.clause([-fa[t], -fb[t]])
    res = solver.solve(time_budget=timeout)
    ms = (time.perf_counter() - t0) * 1e3
    if res is UNSAT:
        return NoninterferenceResult(SECURE, bound, None, ms)
    if res is not SAT:
        return NoninterferenceResult(INCONCLUSIVE, bound, None, ms)
    ta = next(t for t, lit in fa.items() if lit != FALSE and solver.model_value(lit))
    tb = next(t for t, lit in fb.items() if lit != FALSE and solver.model_value(lit))
    ia, ib = ua.decode_inputs(), ub.decode_inputs()
    for p in d.public_ports:  # inputs outside a copy's cone decode as 0; keep both equal
        v = ia.get(p.name, ib.get(p.name, 0))
        ia[p.name] = ib[p.name] = v
    wa = replay(d, ia, bound, expect=ta)
    wb = replay(d, ib, bound, expect=tb)
    return NoninterferenceResult(LEAKS, bound, (wa, wb), ms)
