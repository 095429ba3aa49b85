"""Incremental CDCL satisfiability solver and DIMACS plumbing.

Literals use DIMACS conventions at the interface (``v`` / ``-v`` for
``v >= 1``).  Internally literal ``v`` is code ``2v`` and ``-v`` is ``2v+1``.

The solver keeps learnt clauses between calls, so callers may add clauses
and re-solve; ``solve`` also accepts assumption literals.
"""

from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import sys
import tempfile
import time
from typing import Iterable, Sequence

SAT, UNSAT, UNKNOWN = True, False, None


class SolverError(RuntimeError):
    pass


def _luby(i: int) -> int:
    """i-th element (0-based) of the Luby restart sequence."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i = i % size
    return 1 << seq


class Solver:
    """Conflict-driven clause learning with two watched literals.

    Decisions follow VSIDS with phase saving; restarts follow the Luby
    sequence; learnt clauses are pruned by literal block distance at
    restarts.
    """

    restart_unit = 100
    var_decay = 0.95

    def __init__(self):
        self.nvars = 0
        self.ok = True
        self.value = [0, 0]  # per literal code: 1 true, -1 false, 0 free
        self.level = [0]
        self.reason: list = [None]
        self.activity = [0.0]
        self.phase = [1]  # saved literal code bit: 1 -> negative
        self.seen = bytearray(1)
        self.watches: list[list] = [[], []]
        self.clauses: list[list[int]] = []
        self.learnts: list[list[int]] = []
        self.lbd: dict[int, int] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.heap: list = []
        self.var_inc = 1.0
        self.max_learnts = 4000.0
        self.model: list[int] | None = None
        self.stats = {"conflicts": 0, "decisions": 0, "propagations": 0, "restarts": 0, "solves": 0}

    # -- variables and clauses ---------------------------------------------
    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.value += (0, 0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(1)
        self.seen.append(0)
        self.watches += ([], [])
        heapq.heappush(self.heap, (0.0, v))
        return v

    def ensure_vars(self, n: int):
        while self.nvars < n:
            self.new_var()

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause of DIMACS literals; returns False once the formula is UNSAT."""
        if not self.ok:
            return False
        if self.trail_lim:
            self._cancel_until(0)
        value = self.value
        codes = []
        for lit in lits:
            v = abs(lit)
            if v == 0:
                raise SolverError("literal 0 inside a clause")
            if v > self.nvars:
                self.ensure_vars(v)
            c = 2 * v + (lit < 0)
            codes.append(c)
        out = []
        seen = set()
        for c in codes:
            if c ^ 1 in seen or value[c] == 1:
                return True  # tautology or satisfied at level 0
            if c in seen or value[c] == -1:
                continue
            seen.add(c)
            out.append(c)
        if not out:
            self.ok = False
            return False
        if len(out) == 1:
            self._assign(out[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.clauses.append(out)
        self.watches[out[0]].append(out)
        self.watches[out[1]].append(out)
        return True

    # -- core --------------------------------------------------------------
    def _assign(self, lit, reason):
        self.value[lit] = 1
        self.value[lit ^ 1] = -1
        v = lit >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        value = self.value
        watches = self.watches
        trail = self.trail
        level = self.level
        reason = self.reason
        dl = len(self.trail_lim)
        qhead = self.qhead
        props = 0
        while qhead < len(trail):
            false_lit = trail[qhead] ^ 1
            qhead += 1
            props += 1
            ws = watches[false_lit]
            n = len(ws)
            i = j = 0
            while i < n:
                c = ws[i]
                i += 1
                first = c[0]
                if first == false_lit:
                    first = c[1]
                    c[0] = first
                    c[1] = false_lit
                if value[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if value[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if value[first] == -1:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        self.qhead = len(trail)
                        self.stats["propagations"] += props
                        return c
                    value[first] = 1
                    value[first ^ 1] = -1
                    v = first >> 1
                    level[v] = dl
                    reason[v] = c
                    trail.append(first)
            del ws[j:]
        self.qhead = qhead
        self.stats["propagations"] += props
        return None

    def _bump(self, v):
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for i in range(1, self.nvars + 1):
                act[i] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-act[i], i) for i in range(1, self.nvars + 1) if self.value[2 * i] == 0]
            heapq.heapify(self.heap)
        elif self.value[2 * v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _analyze(self, confl):
        seen = self.seen
        level = self.level
        reason = self.reason
        trail = self.trail
        dl = len(self.trail_lim)
        learnt = [0]
        path = 0
        p = -1
        idx = len(trail) - 1
        c = confl
        while True:
            for k in range(0 if p < 0 else 1, len(c)):
                q = c[k]
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    self._bump(v)
                    if level[v] >= dl:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            v = p >> 1
            c = reason[v]
            seen[v] = 0
            path -= 1
            if path == 0:
                break
        learnt[0] = p ^ 1

        # drop literals implied by the rest of the clause (local minimization)
        kept = [learnt[0]]
        for q in learnt[1:]:
            r = reason[q >> 1]
            if r is None:
                kept.append(q)
                continue
            for x in r[1:]:
                vx = x >> 1
                if not seen[vx] and level[vx] > 0:
                    kept.append(q)
                    break
        for q in learnt[1:]:
            seen[q >> 1] = 0
        learnt = kept

        if len(learnt) == 1:
            return learnt, 0, 1
        best = 1
        for k in range(2, len(learnt)):
            if level[learnt[k] >> 1] > level[learnt[best] >> 1]:
                best = k
        learnt[1], learnt[best] = learnt[best], learnt[1]
        lbd = len({level[q >> 1] for q in learnt})
        return learnt, level[learnt[1] >> 1], lbd

    def _cancel_until(self, lvl):
        if len(self.trail_lim) <= lvl:
            return
        value = self.value
        phase = self.phase
        act = self.activity
        heap = self.heap
        stop = self.trail_lim[lvl]
        trail = self.trail
        for k in range(len(trail) - 1, stop - 1, -1):
            lit = trail[k]
            value[lit] = 0
            value[lit ^ 1] = 0
            v = lit >> 1
            self.reason[v] = None
            phase[v] = lit & 1
            heapq.heappush(heap, (-act[v], v))
        del trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(trail)

    def _pick(self):
        heap = self.heap
        value = self.value
        act = self.activity
        while heap:
            a, v = heapq.heappop(heap)
            if value[2 * v] == 0 and -a == act[v]:
                return v
        for v in range(1, self.nvars + 1):  # heap lost entries after a rescale
            if value[2 * v] == 0:
                return v
        return 0

    def _reduce(self):
        """Forget the weaker half of learnt clauses; call only at level 0."""
        self.learnts.sort(key=lambda c: (self.lbd.get(id(c), 99), len(c)))
        keep_n = len(self.learnts) // 2
        kept = [c for k, c in enumerate(self.learnts) if k < keep_n or self.lbd.get(id(c), 99) <= 2]
        self.lbd = {id(c): self.lbd[id(c)] for c in kept if id(c) in self.lbd}
        self.learnts = kept
        self._rebuild_watches()

    def _rebuild_watches(self):
        value = self.value
        for ws in self.watches:
            ws.clear()
        for group in (self.clauses, self.learnts):
            out = []
            for c in group:
                if any(value[x] == 1 for x in c):
                    continue
                if any(value[x] == -1 for x in c):
                    c[:] = [x for x in c if value[x] != -1]
                out.append(c)
                self.watches[c[0]].append(c)
                self.watches[c[1]].append(c)
            group[:] = out

    def solve(self, assumptions: Sequence[int] = (), conflict_budget: int | None = None,
              time_budget: float | None = None):
        """Return SAT (True), UNSAT (False) or UNKNOWN (None) when a budget runs out."""
        self.stats["solves"] += 1
        self.model = None
        if not self.ok:
            return UNSAT
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return UNSAT
        for a in assumptions:
            self.ensure_vars(abs(a))
        assume = [2 * abs(a) + (a < 0) for a in assumptions]
        deadline = None if time_budget is None else time.monotonic() + time_budget
        conflicts = 0
        restart_k = 0
        restart_at = _luby(restart_k) * self.restart_unit
        since_restart = 0
        value = self.value
        while True:
            confl = self._propagate()
            if confl is not None:
                conflicts += 1
                since_restart += 1
                self.stats["conflicts"] += 1
                if not self.trail_lim:
                    self.ok = False
                    return UNSAT
                learnt, bt, lbd = self._analyze(confl)
                self._cancel_until(bt)
                if len(learnt) == 1:
                    self._assign(learnt[0], None)
                else:
                    self.learnts.append(learnt)
                    self.lbd[id(learnt)] = lbd
                    self.watches[learnt[0]].append(learnt)
                    self.watches[learnt[1]].append(learnt)
                    self._assign(learnt[0], learnt)
                self.var_inc /= self.var_decay
                if conflict_budget is not None and conflicts >= conflict_budget:
                    self._cancel_until(0)
                    return UNKNOWN
                if deadline is not None and (conflicts & 15) == 0 and time.monotonic() > deadline:
                    self._cancel_until(0)
                    return UNKNOWN
                continue
            if since_restart >= restart_at:
                since_restart = 0
                restart_k += 1
                restart_at = _luby(restart_k) * self.restart_unit
                self.stats["restarts"] += 1
                self._cancel_until(0)
                if len(self.learnts) > self.max_learnts + len(self.trail):
                    self._reduce()
                    self.max_learnts *= 1.1
                continue
            dl = len(self.trail_lim)
            if dl < len(assume):
                a = assume[dl]
                if value[a] == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if value[a] == -1:
                    self._cancel_until(0)
                    return UNSAT
                self.trail_lim.append(len(self.trail))
                self._assign(a, None)
                continue
            v = self._pick()
            if v == 0:
                self.model = list(value)
                self._cancel_until(0)
                return SAT
            self.stats["decisions"] += 1
            if deadline is not None and (self.stats["decisions"] & 255) == 0 \
                    and time.monotonic() > deadline:
                self._cancel_until(0)
                return UNKNOWN
            self.trail_lim.append(len(self.trail))
            self._assign(2 * v + self.phase[v], None)

    def model_value(self, lit: int) -> bool:
        if self.model is None:
            raise SolverError("no model available")
        v = abs(lit)
        if v > self.nvars:
            return lit < 0  # unconstrained variable defaults to false
        val = self.model[2 * v] == 1
        return val if lit > 0 else not val


# ---------------------------------------------------------------------------
# DIMACS

def write_dimacs(nvars: int, clauses: Iterable[Sequence[int]], fh, comments=()) -> None:
    clauses = list(clauses)
    for c in comments:
        fh.write(f"c {c}\n")
    fh.write(f"p cnf {nvars} {len(clauses)}\n")
    for cl in clauses:
        fh.write(" ".join(map(str, cl)) + " 0\n")


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    nvars = 0
    clauses: list[list[int]] = []
    cur: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "c%":
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SolverError(f"bad DIMACS header {line!r}")
            nvars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                nvars = max(nvars, abs(lit))
                cur.append(lit)
    if cur:
        clauses.append(cur)
    return nvars, clauses


def parse_solver_output(text: str, returncode: int | None = None):
    """Read competition-style output: ``s SATISFIABLE`` plus ``v`` lines."""
    status = None
    model: dict[int, bool] = {}
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip().upper()
            if word == "SATISFIABLE":
                status = SAT
            elif word == "UNSATISFIABLE":
                status = UNSAT
            else:
                status = UNKNOWN
        elif line.startswith("v "):
            for tok in line[2:].split():
                lit = int(tok)
                if lit:
                    model[abs(lit)] = lit > 0
        elif line in ("SAT", "UNSAT"):  # minisat result-file style
            status = SAT if line == "SAT" else UNSAT
        elif status is SAT and line and line.lstrip("-").split()[0].isdigit():
            for tok in line.split():
                lit = int(tok)
                if lit:
                    model[abs(lit)] = lit > 0
    if status is None and returncode in (10, 20):
        status = SAT if returncode == 10 else UNSAT
    return status, model


class ExternalSolver:
    """Hands the formula to a command-line solver through a DIMACS file.

    ``command`` is split with :func:`shlex.split`; the CNF path is appended,
    or substituted for a ``{}`` placeholder.  Each ``solve`` call ships the
    full clause set with assumptions as unit clauses.
    """

    def __init__(self, command: str, timeout: float | None = None):
        self.command = command
        self.timeout = timeout
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.model: dict[int, bool] | None = None
        self.stats = {"solves": 0}

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def ensure_vars(self, n: int):
        self.nvars = max(self.nvars, n)

    def add_clause(self, lits: Iterable[int]) -> bool:
        cl = list(lits)
        for lit in cl:
            self.nvars = max(self.nvars, abs(lit))
        self.clauses.append(cl)
        return True

    def solve(self, assumptions: Sequence[int] = (), conflict_budget=None, time_budget=None):
        self.stats["solves"] += 1
        self.model = None
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as fh:
            write_dimacs(self.nvars, self.clauses + [[a] for a in assumptions], fh)
            path = fh.name
        try:
            args = shlex.split(self.command)
            if "{}" in args:
                args = [path if a == "{}" else a for a in args]
            else:
                args.append(path)
            timeout = time_budget if time_budget is not None else self.timeout
            try:
                proc = subprocess.run(args, capture_output=True, text=True, timeout=timeout)
            except subprocess.TimeoutExpired:
                return UNKNOWN
            except OSError as exc:
                raise SolverError(f"cannot run solver command {self.command!r}: {exc}") from exc
            status, model = parse_solver_output(proc.stdout, proc.returncode)
            if status is None:
                raise SolverError(f"solver produced no verdict (exit {proc.returncode}): "
                                  f"{proc.stderr.strip()[:200]}")
            if status is SAT:
                self.model = model
            return status
        finally:
            os.unlink(path)

    def model_value(self, lit: int) -> bool:
        if self.model is None:
            raise SolverError("no model available")
        val = self.model.get(abs(lit), False)
        return val if lit > 0 else not val


def make_solver(command: str | None = None, timeout: float | None = None):
    command = command or os.environ.get("PASCAL_SOLVER") or None
    return ExternalSolver(command, timeout) if command else Solver()


def main(argv=None) -> int:
    """Solve a DIMACS file with the built-in solver (competition output format)."""
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m pascal.sat FILE.cnf", file=sys.stderr)
        return 1
    with open(argv[0], encoding="utf-8") as fh:
        nvars, clauses = parse_dimacs(fh.read())
    s = Solver()
    s.ensure_vars(nvars)
    for cl in clauses:
        if not s.add_clause(cl):
            break
    res = s.solve()
    if res is SAT:
        print("s SATISFIABLE")
        lits = [v if s.model_value(v) else -v for v in range(1, nvars + 1)]
        for k in range(0, len(lits), 20):
            print("v " + " ".join(map(str, lits[k:k + 20])))
        print("v 0")
        return 10
    if res is UNSAT:
        print("s UNSATISFIABLE")
        return 20
    print("s UNKNOWN")
    return 0


if __name__ == "__main__":
    sys.exit(main())
