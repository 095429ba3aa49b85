"""Structural secret-taint propagation over a design.

The lattice has two points.  A signal is tainted when any operand of its
defining (or next-state) expression is tainted; mux selects count as
operands, so control dependence is included.  The pass is a sound
over-approximation: it never misses a flow, but it may report flows that no
concrete execution exhibits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir

PATH_EXISTS = "PATH_EXISTS"
NO_PATH = "NO_PATH"


@dataclass
class TaintState:
    tainted: frozenset
    # frontier[k] lists the signals first tainted in round k (round 0: secrets)
    frontier: list = field(default_factory=list)
    iterations: int = 0
    # signals whose expression contains a mux steered by a tainted select
    control: frozenset = frozenset()

    def label(self, name: str) -> str:
        return "tainted" if name in self.tainted else "clean"

    def first_round(self, name: str) -> int | None:
        for k, names in enumerate(self.frontier):
            if name in names:
                return k
        return None


@dataclass
class PathVerdict:
    verdict: str
    tainted_observables: list
    cone: frozenset
    state: TaintState

    @property
    def exists(self) -> bool:
        return self.verdict == PATH_EXISTS


def _tainted_select(e: ir.Expr, tainted) -> bool:
    for node in e.walk():
        if node.op == "mux" and node.args[0].support() & tainted:
            return True
    return False


def propagate(d: ir.Design) -> TaintState:
    """Least fixpoint of forward taint from the secret inputs."""
    order = ir.comb_topo_order(d)
    supports = {n.name: n.expr.support() for n in d.nets}
    reg_supports = {r.name: d.next[r.name].support() for r in d.regs if r.name in d.next}
    tainted = set(d.annot.secret)
    frontier = [sorted(tainted)]
    rounds = 0
    limit = len(d.signal_names()) + 1
    while True:
        rounds += 1
        new = []
        # nets settle within one round thanks to the topological order
        for name in order:
            if name not in tainted and supports[name] & tainted:
                tainted.add(name)
                new.append(name)
        for name, sup in reg_supports.items():
            if name not in tainted and sup & tainted:
                new.append(name)
        tainted.update(new)
        if not new:
            break
        frontier.append(sorted(new))
        assert rounds <= limit, "taint propagation failed to converge"
    control = set()
    for name, e in d.expressions():
        if name in tainted and _tainted_select(e, tainted):
            control.add(name)
    return TaintState(frozenset(tainted), frontier, rounds, frozenset(control))


def has_security_path(d: ir.Design, state: TaintState | None = None) -> PathVerdict:
    """Whether any observable output (done included) carries secret taint."""
    st = state if state is not None else propagate(d)
    obs = [p.name for p in d.outputs if p.name in d.annot.observable]
    hit = [o for o in obs if o in st.tainted]
    if not hit:
        return PathVerdict(NO_PATH, [], frozenset(), st)
    cone = ir.cone_of_many(d, hit) & st.tainted
    return PathVerdict(PATH_EXISTS, hit, frozenset(cone), st)
