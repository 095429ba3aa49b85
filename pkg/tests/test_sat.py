import io
import itertools
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pascal import sat
from pascal.sat import ExternalSolver, Solver, parse_dimacs, parse_solver_output, write_dimacs

SOLVER_CMD = f"{sys.executable} -m pascal.sat"


def brute(nvars, clauses, assumptions=()):
    for bits in itertools.product([False, True], repeat=nvars):
        ok = all(any((l > 0) == bits[abs(l) - 1] for l in c) for c in clauses)
        if ok and all((a > 0) == bits[abs(a) - 1] for a in assumptions):
            return True
    return False


cnfs = st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v])),
                      min_size=1, max_size=4), min_size=0, max_size=36),
    st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v])), max_size=3)))


@settings(max_examples=400, deadline=None)
@given(cnfs)
def test_agrees_with_brute_force(case):
    n, clauses, assumptions = case
    s = Solver()
    s.ensure_vars(n)
    for c in clauses:
        s.add_clause(c)
    res = s.solve()
    assert res == brute(n, clauses)
    if res:
        assert all(any(s.model_value(l) for l in c) for c in clauses)
    res = s.solve(assumptions)
    assert res == brute(n, clauses, assumptions)
    if res:
        assert all(s.model_value(a) for a in assumptions)


def php(p, h):
    v = lambda i, j: i * h + j + 1  # noqa: E731
    cl = [[v(i, j) for j in range(h)] for i in range(p)]
    cl += [[-v(i, j), -v(k, j)] for j in range(h) for i in range(p) for k in range(i + 1, p)]
    return p * h, cl


def test_pigeonhole_unsat_and_budget():
    n, cl = php(6, 5)
    s = Solver()
    for c in cl:
        s.add_clause(c)
    assert s.solve(conflict_budget=5) is None
    assert s.solve() is False


def test_incremental_blocking_enumerates_all_models():
    s = Solver()
    s.ensure_vars(3)
    s.add_clause([1, 2, 3])
    models = set()
    while s.solve():
        m = tuple(s.model_value(v) for v in (1, 2, 3))
        models.add(m)
        s.add_clause([-v if val else v for v, val in zip((1, 2, 3), m)])
    assert len(models) == 7


def test_dimacs_round_trip():
    n, cl = php(3, 2)
    buf = io.StringIO()
    write_dimacs(n, cl, buf, comments=["pigeons"])
    n2, cl2 = parse_dimacs(buf.getvalue())
    assert (n2, cl2) == (n, cl)


def test_output_parsing():
    assert parse_solver_output("s SATISFIABLE\nv 1 -2\nv 3 0\n") == (True, {1: True, 2: False, 3: True})
    assert parse_solver_output("s UNSATISFIABLE\n")[0] is False
    assert parse_solver_output("", 20)[0] is False
    assert parse_solver_output("s UNKNOWN\n")[0] is None


def test_module_main_speaks_competition_format(tmp_path):
    path = tmp_path / "f.cnf"
    path.write_text("p cnf 2 2\n1 2 0\n-1 0\n")
    proc = subprocess.run([sys.executable, "-m", "pascal.sat", str(path)], capture_output=True, text=True)
    assert proc.returncode == 10
    status, model = parse_solver_output(proc.stdout)
    assert status is True and model == {1: False, 2: True}


def test_external_solver_handoff():
    s = ExternalSolver(SOLVER_CMD)
    a, b = s.new_var(), s.new_var()
    s.add_clause([a, b])
    s.add_clause([-a])
    assert s.solve() is True and s.model_value(b) and not s.model_value(a)
    assert s.solve([-b]) is False


def test_external_solver_timeout_is_unknown():
    s = ExternalSolver(f"{sys.executable} -c \"import time; time.sleep(5)\" {{}}")
    s.add_clause([1])
    assert s.solve(time_budget=0.2) is None


def test_external_solver_errors():
    with pytest.raises(sat.SolverError):
        ExternalSolver("/nonexistent/solver").solve()
    s = ExternalSolver(f"{sys.executable} -c pass {{}}")
    with pytest.raises(sat.SolverError):
        s.solve()


def test_make_solver_uses_environment(monkeypatch):
    monkeypatch.setenv("PASCAL_SOLVER", SOLVER_CMD)
    assert isinstance(sat.make_solver(), ExternalSolver)
    monkeypatch.delenv("PASCAL_SOLVER")
    assert isinstance(sat.make_solver(), Solver)
