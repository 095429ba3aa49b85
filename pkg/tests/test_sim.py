import random

import numpy as np
import pytest

from pascal import bench, ir, sim
from pascal.hdl import load_text
from pascal.sim import DomainTooLarge, NonCompletion, SignatureMismatch, Stimulus, StimulusWidthMismatch

from conftest import corpus_design, rsa


def test_constant_latency_design():
    d = corpus_design("constmix")
    for key in (0, 1, 0x5A, 0xFF):
        w = sim.run(d, Stimulus({"data": 3}, {"key": key}, 20))
        assert w.completed and w.latency == 5


@pytest.mark.parametrize("key,lat", [(0x01, 9), (0xFF, 16), (0x80, 9), (0x0F, 12)])
def test_rsa8_latency(key, lat):
    assert sim.run(rsa(8), Stimulus({"ct": 7}, {"key": key}, 40)).latency == lat


def test_trace_witness_invariants():
    w = sim.run(rsa(8), Stimulus({"ct": 7}, {"key": 0x0F}, 40))
    done = w.values["done"]
    assert len(done) == w.latency + 1
    assert done[w.latency] == 1 and all(v == 0 for v in done[1:w.latency])
    assert w.values["start"][0] == 1


def test_incomplete_run():
    w = sim.run(corpus_design("neverdone"), Stimulus({}, {"key": 3}, 10))
    assert not w.completed and w.latency is None


def test_stimulus_checks():
    with pytest.raises(StimulusWidthMismatch):
        sim.run(rsa(8), Stimulus({"ct": 256}, {"key": 1}, 40))
    with pytest.raises(StimulusWidthMismatch):
        sim.run(rsa(8), Stimulus({"nope": 1}, {"key": 1}, 40))
    with pytest.raises(StimulusWidthMismatch):
        sim.run(rsa(8), Stimulus({}, {"key": 1}, 0))


def test_run_is_deterministic():
    s = Stimulus({"ct": 99}, {"key": 0xA5}, 40)
    a, b = sim.run(rsa(8), s), sim.run(rsa(8), s)
    assert a.values == b.values and a.latency == b.latency


def test_exhaustive_rsa8():
    got = sim.exhaustive_classes(rsa(8), {"ct": 3}, bound=40)
    assert sorted(got) == list(range(9, 17))
    # binomial counts: keys with popcount p
    from math import comb
    assert got == {8 + p: comb(8, p) for p in range(1, 9)}


def test_exhaustive_constant_and_never_done():
    assert list(sim.exhaustive_classes(corpus_design("constmix"), {"data": 1}, bound=12)) == [5]
    with pytest.raises(NonCompletion) as exc:
        sim.exhaustive_classes(corpus_design("neverdone"), None, bound=10)
    assert len(exc.value.stimuli) > 0


def test_domain_guard():
    with pytest.raises(DomainTooLarge):
        sim.exhaustive_classes(rsa(32), {"ct": 0}, bound=70)


def test_partitioned_domain_merges_to_whole():
    d = rsa(8)
    whole = sim.exhaustive_classes(d, {"ct": 5}, bound=40)
    merged = {}
    keys = list(range(1, 256))
    for part in (keys[:100], keys[100:101], keys[101:]):
        got = sim.exhaustive_classes(d, {"ct": 5}, secrets=[{"key": k} for k in part], bound=40)
        for t, c in got.items():
            merged[t] = merged.get(t, 0) + c
    assert merged == whole


@pytest.mark.parametrize("n", [8, 12])
def test_closed_form_latency_for_every_key(n):
    p = bench.RsaParams(n)
    keys = np.arange(1, 1 << n, dtype=np.uint64)
    lat, _ = sim.simulate_batch(rsa(n), {"key": keys, "ct": keys * 0 + 11}, p.default_bound)
    expect = np.array([bench.expected_latency(p, int(k)) for k in keys])
    assert np.array_equal(lat, expect)


def test_cosim_examples():
    d = rsa(8)
    assert sim.cosim_equiv(d, d, 1000).ok
    inverted = d.evolve(nets=tuple(
        ir.NetDef(n.name, n.width, ir.bnot(n.expr)) if n.name == "pt" else n for n in d.nets))
    res = sim.cosim_equiv(d, inverted, 1000)
    assert res.verdict == "FAIL"
    assert res.mismatch["data_a"]["pt"] == res.mismatch["data_b"]["pt"] ^ 0xFF
    with pytest.raises(SignatureMismatch):
        sim.cosim_equiv(d, rsa(12), 10)


def test_random_stimuli_respect_assumptions():
    d = rsa(4)
    rng = np.random.default_rng(1)
    ins = sim.random_inputs(d, 500, rng)
    assert (ins["key"] != 0).all()
    s = sim.random_stimulus(d, random.Random(2), 20)
    assert s.secret["key"] != 0


def test_trace_file(tmp_path):
    w = sim.run(rsa(8), Stimulus({"ct": 1}, {"key": 1}, 40))
    path = tmp_path / "t.trace"
    sim.write_trace(w, path)
    lines = path.read_text().splitlines()
    assert any(line.split() == [str(w.latency), "done", "1"] for line in lines)


def test_registers_without_reset_start_at_zero():
    src = """// @secret k
// @observable done
// @start start
// @done done
module m(input clk, input rst, input start, input k, output done);
  reg [1:0] c;
  assign done = c == 2'd2;
  always @(posedge clk) c <= c + 2'd1;
endmodule
"""
    d = load_text(src)
    assert d.reg("c").reset is None
    # c counts 0 (reset cycle), 1 (cycle 0), 2 (cycle 1)
    assert sim.run(d, Stimulus({}, {"k": 0}, 8)).latency == 1
