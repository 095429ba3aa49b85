import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pascal import ir
from pascal.ir import (CombinationalLoop, Design, NetDef, Port, RegDef, SecurityAnnotations,
                       UnknownSignal, WidthError)

from conftest import rsa


def _annot(**kw):
    base = dict(secret=frozenset({"k"}), observable=frozenset({"done"}), start="start", done="done")
    base.update(kw)
    return SecurityAnnotations(**base)


def _ports(*extra):
    return (Port("clk", "input"), Port("rst", "input"), Port("start", "input"),
            Port("k", "input", 4), Port("done", "output")) + tuple(extra)


def counter_design(nets=None, annot=None, regs=None, nxt=None):
    a, b = ir.var("a", 4), ir.var("b", 4)
    regs = regs if regs is not None else (RegDef("a", 4, 0), RegDef("b", 4, 0))
    nxt = nxt if nxt is not None else {"a": ir.add(a, ir.const(1, 4)), "b": ir.add(b, a)}
    nets = nets if nets is not None else (NetDef("done", 1, ir.eq(a, ir.const(3, 4))),)
    return Design("cnt", _ports(), regs, nets, nxt, annot or _annot())


def codes(d):
    return [x.code for x in ir.validate_design(d)]


def test_well_formed_counter_has_no_diagnostics():
    assert ir.validate_design(counter_design()) == []


def test_comb_loop_reported_at_first_member():
    nets = (NetDef("done", 1, ir.const(0, 1)),
            NetDef("a_n", 1, ir.var("b_n", 1)), NetDef("b_n", 1, ir.var("a_n", 1)))
    diags = ir.validate_design(counter_design(nets=nets))
    assert [(x.code, x.name) for x in diags] == [("COMB_LOOP", "a_n")]


def test_secret_output_is_rejected():
    d = counter_design(annot=_annot(secret=frozenset({"done"})))
    assert "SECRET_NOT_INPUT" in codes(d)


@pytest.mark.parametrize("annot,code", [
    (dict(observable=frozenset({"k"})), "OBSERVABLE_NOT_OUTPUT"),
    (dict(start="nope"), "BAD_START"),
    (dict(done="k"), "BAD_DONE"),
    (dict(observable=frozenset()), "DONE_NOT_OBSERVABLE"),
])
def test_annotation_violations(annot, code):
    assert code in codes(counter_design(annot=_annot(**annot)))


def test_missing_next_and_unknown_signal():
    d = counter_design(nxt={"a": ir.var("zz", 4)})
    got = codes(d)
    assert "UNKNOWN_SIGNAL" in got and "MISSING_NEXT" in got


def test_width_rules_enforced_at_construction():
    with pytest.raises(WidthError):
        ir.add(ir.var("a", 4), ir.var("b", 3))
    with pytest.raises(WidthError):
        ir.mux(ir.var("c", 2), ir.var("a", 4), ir.var("b", 4))
    with pytest.raises(WidthError):
        ir.const(16, 4)
    assert ir.eq(ir.var("a", 4), ir.var("b", 4)).width == 1
    assert ir.lt(ir.var("a", 4), ir.var("b", 4)).width == 1


def test_topo_order_examples():
    x = ir.var("x", 4)
    d = counter_design(nets=(NetDef("done", 1, ir.const(0, 1)), NetDef("y", 4, ir.add(x, ir.const(1, 4)))))
    d = d.evolve(ports=d.ports + (Port("x", "input", 4),))
    assert ir.comb_topo_order(d) == ["done", "y"]
    d = counter_design(nets=(NetDef("done", 1, ir.const(0, 1)), NetDef("c", 1, ir.var("b_n", 1)),
                             NetDef("b_n", 1, ir.var("done", 1))))
    order = ir.comb_topo_order(d)
    assert order.index("b_n") < order.index("c")
    loop = counter_design(nets=(NetDef("done", 1, ir.const(0, 1)), NetDef("a_n", 1, ir.var("c_n", 1)),
                                NetDef("c_n", 1, ir.var("a_n", 1))))
    with pytest.raises(CombinationalLoop):
        ir.comb_topo_order(loop)


def test_cone_of_influence_examples():
    d = counter_design()
    assert "k" not in ir.cone_of_influence(d, "done")
    assert "key" in ir.cone_of_influence(rsa(8), "done")
    assert ir.cone_of_influence(d, "k") == {"k"}
    with pytest.raises(UnknownSignal):
        ir.cone_of_influence(d, "nothing")


def test_validate_is_idempotent():
    d = rsa(8)
    assert ir.validate_design(d) == ir.validate_design(d) == []


# -- random DAG designs ------------------------------------------------------

@st.composite
def dag_designs(draw):
    """Designs whose nets form a random DAG over inputs k, x and two registers."""
    n = draw(st.integers(1, 8))
    leaves = ["k", "x", "r0", "r1"]
    defs = []
    for i in range(n):
        pool = leaves + [f"n{j}" for j in range(i)]
        a = draw(st.sampled_from(pool))
        b = draw(st.sampled_from(pool))
        op = draw(st.sampled_from([ir.band, ir.bor, ir.bxor, ir.add, ir.sub, ir.mul]))
        defs.append((f"n{i}", op(ir.var(a, 4), ir.var(b, 4))))
    perm = draw(st.permutations(range(n)))
    nets = [NetDef(defs[i][0], 4, defs[i][1]) for i in perm]
    last = ir.var(f"n{n - 1}", 4)
    nets.append(NetDef("done", 1, ir.eq(last, ir.const(0, 4))))
    regs = (RegDef("r0", 4, 0), RegDef("r1", 4, 0))
    nxt = {"r0": last, "r1": ir.var(draw(st.sampled_from([d[0] for d in defs])), 4)}
    d = Design("dag", _ports(Port("x", "input", 4)), regs, tuple(nets), nxt, _annot())
    return d, draw(st.randoms(use_true_random=False))


@settings(max_examples=150, deadline=None)
@given(dag_designs(), st.dictionaries(st.sampled_from(["k", "x", "r0", "r1"]), st.integers(0, 15)))
def test_topological_orders_agree(dd, env):
    d, rnd = dd
    assert ir.validate_design(d) == []
    base = {name: env.get(name, 0) for name in ("k", "x", "r0", "r1", "clk", "rst", "start")}

    def evaluate(order):
        vals = dict(base)
        for name in order:
            vals[name] = ir.eval_expr(d.net(name).expr, vals)
        return vals

    ref = evaluate(ir.comb_topo_order(d))
    # a different valid order: repeatedly pick a random ready net
    deps = {n.name: n.expr.support() & {m.name for m in d.nets} for n in d.nets}
    order, done = [], set()
    while len(order) < len(deps):
        ready = sorted(n for n in deps if n not in done and deps[n] <= done)
        pick = rnd.choice(ready)
        order.append(pick)
        done.add(pick)
    assert evaluate(order) == ref


@settings(max_examples=150, deadline=None)
@given(dag_designs(), st.data())
def test_cone_grows_when_an_operand_is_added(dd, data):
    d, _ = dd
    nets = list(d.nets)
    i = data.draw(st.integers(0, len(nets) - 2))
    extra = data.draw(st.sampled_from(["k", "x", "r0", "r1"] + [n.name for n in nets[:0]]))
    nd = nets[i]
    nets[i] = NetDef(nd.name, nd.width, ir.bor(nd.expr, ir.var(extra, 4)))
    d2 = d.evolve(nets=tuple(nets))
    for target in ["done", "r0", "r1"] + [n.name for n in d.nets]:
        before = ir.cone_of_influence(d, target)
        after = ir.cone_of_influence(d2, target)
        assert target in before
        assert before <= after
