import json
import re

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pascal import bench, ir, sim
from pascal.hdl import ElabError, HdlError, HdlSyntaxError, LexError, PragmaSet, emit, load_text, parse
from pascal.hdl.parser import Always, Decl

from conftest import CORPUS, TOGGLER, corpus_design, corpus_text, rsa

HEADER = """// @secret k
// @observable q done
// @start start
// @done done
"""


def test_minimal_module():
    m = parse("module m(input clk, input rst); endmodule")
    assert [p.name for p in m.ports] == ["clk", "rst"]
    assert m.items == ()


def test_rsa_source_ports():
    m = parse(bench.generate(bench.RsaParams(8)))
    assert {p.name for p in m.ports} == {"clk", "rst", "start", "key", "ct", "pt", "done"}
    assert any(isinstance(i, Always) for i in m.items)


def test_if_without_parenthesis_is_a_syntax_error():
    src = TOGGLER.replace("if (rst) q <= 1'd0;", "if rst) q <= 1'd0;")
    with pytest.raises(HdlSyntaxError) as exc:
        parse(src)
    line = src.splitlines().index("    if rst) q <= 1'd0;") + 1
    assert exc.value.line == line


def test_illegal_character_is_a_lex_error():
    with pytest.raises(LexError):
        parse("module m(input clk, input rst); $ endmodule")
    with pytest.raises(LexError):
        parse("module m(input clk, input rst); /* block */ endmodule")


def test_toggler_lowering():
    d = load_text(TOGGLER)
    assert d.next["q"] == ir.bnot(ir.var("q", 1))
    assert d.reg("q").reset == 0


def test_if_else_becomes_mux():
    src = HEADER + """module m(input clk, input rst, input start, input k, input en,
            input [3:0] a, input [3:0] b, output reg [3:0] q, output done);
  assign done = start;
  always @(posedge clk) begin
    if (rst) q <= 4'd0;
    else if (en) q <= a; else q <= b;
  end
endmodule
"""
    d = load_text(src)
    en = ir.var("en", 1)
    assert d.next["q"] == ir.mux(ir.neq(en, ir.const(0, 1)), ir.var("a", 4), ir.var("b", 4)) \
        or d.next["q"] == ir.mux(en, ir.var("a", 4), ir.var("b", 4))


def test_missing_done_pragma():
    with pytest.raises(ElabError) as exc:
        load_text(TOGGLER.replace("// @done done\n", ""))
    assert exc.value.code == "MISSING_DONE"


@pytest.mark.parametrize("body,code", [
    ("assign done = zz;", "UNDECLARED"),
    ("assign done = q; assign done = q;", "MULTIPLE_DRIVERS"),
    ("wire [1:0] w; assign w = 3'd7; assign done = q;", "WIDTH_MISMATCH"),
])
def test_elaboration_errors(body, code):
    src = TOGGLER.replace("assign done = q;", body)
    with pytest.raises(ElabError) as exc:
        load_text(src)
    assert exc.value.code == code or code in {d.code for d in exc.value.diagnostics or ()}


def test_narrow_rhs_is_zero_extended():
    src = TOGGLER.replace("assign done = q;", "wire [3:0] w; assign w = q; assign done = w[0];")
    d = load_text(src)
    assert d.net("w").expr == ir.zext(ir.var("q", 1), 4)


def test_sidecar_overrides_source_pragmas(tmp_path):
    side = tmp_path / "p.json"
    side.write_text(json.dumps({"observable": ["done"], "bound": 9}))
    d = load_text(TOGGLER, PragmaSet.load(side))
    assert d.annot.observable == frozenset({"done"})
    assert d.annot.bound == 9
    yml = tmp_path / "p.yaml"
    yml.write_text("secret: [k]\nbound: 4\n")
    assert load_text(TOGGLER, PragmaSet.load(yml)).annot.bound == 4


def test_emit_toggler():
    text = emit(load_text(TOGGLER))
    assert re.search(r"q\s*<=\s*~q\s*;", text)


@pytest.mark.parametrize("name", CORPUS)
def test_emit_reparses(name):
    d = corpus_design(name)
    again = load_text(emit(d))
    assert ir.validate_design(again) == []
    assert emit(again) == emit(d)


def test_deterministic():
    src = corpus_text("earlyexit")
    assert parse(src) == parse(src)
    assert emit(load_text(src)) == emit(load_text(src))


def _trace_equal(a, b, samples, cycles, seed=0):
    rng = np.random.default_rng(seed)
    inputs = sim.random_inputs(a, samples, rng)
    sigs = [p.name for p in a.outputs]
    ta = sim.trace_batch(a, inputs, cycles, sigs)
    tb = sim.trace_batch(b, inputs, cycles, sigs)
    return all(np.array_equal(ta[s], tb[s]) for s in sigs)


@pytest.mark.parametrize("name", CORPUS + ["rsa8", "rsa12_s2m1u3"])
def test_round_trip_is_cycle_identical(name):
    if name == "rsa8":
        d = rsa(8)
    elif name.startswith("rsa12"):
        d = rsa(12, 2, 1, 3)
    else:
        d = corpus_design(name)
    assert _trace_equal(d, load_text(emit(d)), 1000, 200)


# -- fuzzing: the frontend either succeeds or raises its own diagnostics ----

_SEEDS = [corpus_text(n) for n in CORPUS] + [TOGGLER, bench.generate(bench.RsaParams(4, 2, 2, 2))]
_ALPHABET = "abkqrst01 \n\t;:,()[]{}<=>!~&|^+-*?@'/dhx" + "\x00é$"


@st.composite
def mutated_sources(draw):
    text = draw(st.sampled_from(_SEEDS))
    for _ in range(draw(st.integers(1, 6))):
        if not text:
            break
        i = draw(st.integers(0, len(text) - 1))
        kind = draw(st.integers(0, 3))
        if kind == 0:
            text = text[:i] + text[i + draw(st.integers(1, 12)):]
        elif kind == 1:
            text = text[:i] + draw(st.text(_ALPHABET, min_size=1, max_size=6)) + text[i:]
        elif kind == 2:
            j = draw(st.integers(0, len(text) - 1))
            text = text[:i] + text[j:j + 20] + text[i:]
        else:
            text = text[:i] + draw(st.sampled_from(["(", ")", "begin", "end", "if", "else", "[", "]",
                                                    "64'd1", "8'hZZ", "~", "{", "}", "<=", "assign"])) + text[i:]
    return text


def _total(text):
    try:
        d = load_text(text)
    except HdlError:
        return
    assert ir.validate_design(d) == []


@settings(max_examples=10_000, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.one_of(mutated_sources(), st.text(max_size=80)))
def test_frontend_is_total(text):
    _total(text)


def test_deep_nesting_reports_instead_of_crashing():
    expr = "(" * 5000 + "q" + ")" * 5000
    with pytest.raises(HdlError):
        load_text(TOGGLER.replace("assign done = q;", f"assign done = {expr};"))
