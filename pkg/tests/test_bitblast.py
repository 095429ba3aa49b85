import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pascal import ir, sim
from pascal.bitblast import CapacityExceeded, CnfBuilder, unroll_and_blast, word_value
from pascal.hdl import load_text
from pascal.sat import Solver

from conftest import TOGGLER, rsa


def test_toggler_unrolls():
    d = load_text(TOGGLER)
    s = Solver()
    b = CnfBuilder(s)
    uf = unroll_and_blast(d, 3, ["q"], b)
    assert s.solve([uf.lit("q", 1)]) is True
    assert [uf.decode("q", f) for f in (0, 1, 2)] == [0, 1, 0]
    # q is low two cycles after the reset frame, so that target is unreachable
    assert s.solve([uf.lit("q", 2)]) is False


def test_adder_models():
    s = Solver()
    b = CnfBuilder(s)
    a, c = b.fresh_word(2), b.fresh_word(2)
    y = b.expr(ir.add(ir.var("a", 2), ir.var("b", 2)), {"a": a, "b": c})
    for bit, lit in zip((1, 1), y):
        b.clause([lit if bit else -lit])
    models = set()
    while s.solve():
        m = (word_value(s, a), word_value(s, c))
        models.add(m)
        b.clause([-l if s.model_value(l) else l for l in a + c])
    assert models == {(x, (3 - x) % 4) for x in range(4)}


W = 5
_BIN = [ir.band, ir.bor, ir.bxor, ir.add, ir.sub, ir.mul, ir.shl, ir.shr]
_CMP = [ir.eq, ir.neq, ir.lt]


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        if draw(st.booleans()):
            return ir.var(draw(st.sampled_from("xyz")), W)
        return ir.const(draw(st.integers(0, (1 << W) - 1)), W)
    kind = draw(st.integers(0, 5))
    a = draw(exprs(depth=depth - 1))
    if kind == 0:
        return ir.bnot(a)
    if kind == 1:
        c = draw(st.sampled_from(_CMP))(a, draw(exprs(depth=depth - 1)))
        return ir.mux(c, draw(exprs(depth=depth - 1)), a)
    if kind == 2:
        hi = draw(st.integers(0, W - 1))
        lo = draw(st.integers(0, hi))
        part = ir.slice_bits(a, hi, lo)
        pad = W - part.width
        return part if pad == 0 else ir.concat(ir.const(0, pad), part) if draw(st.booleans()) \
            else ir.zext(part, W)
    return draw(st.sampled_from(_BIN))(a, draw(exprs(depth=depth - 1)))


@settings(max_examples=300, deadline=None)
@given(exprs(), st.integers(0, 31), st.integers(0, 31), st.integers(0, 31))
def test_encoding_matches_reference_interpreter(e, x, y, z):
    s = Solver()
    b = CnfBuilder(s)
    words = {n: b.fresh_word(W) for n in "xyz"}
    out = b.expr(e, words)
    env = {"x": x, "y": y, "z": z}
    assume = []
    for n, w in words.items():
        assume += [l if (env[n] >> i) & 1 else -l for i, l in enumerate(w)]
    assert s.solve(assume) is True
    assert word_value(s, out) == ir.eval_expr(e, env)


def test_unrolled_model_replays():
    d = rsa(8)
    s = Solver()
    b = CnfBuilder(s)
    uf = unroll_and_blast(d, 20, [d.annot.done], b)
    assert s.solve([uf.lit("done", 12)]) is True
    inputs = uf.decode_inputs()
    assert inputs["key"] != 0
    w = sim.run(d, sim.Stimulus({"ct": 0}, {"key": inputs["key"]}, 20), stop_at_done=False)
    for f in range(0, 21):
        assert w.values["done"][f] == uf.decode("done", f)


def test_cone_excludes_datapath():
    uf = unroll_and_blast(rsa(8), 4, ["done"], CnfBuilder(Solver()))
    assert "acc" not in uf.cone and "ct" not in uf.inputs


def test_clause_budget():
    with pytest.raises(CapacityExceeded):
        unroll_and_blast(rsa(16), 40, ["done"], CnfBuilder(Solver(), clause_budget=500))
