import functools
from importlib import resources

import pytest

from pascal import bench
from pascal.hdl import load_text

CORPUS = sorted(p.name[:-5] for p in (resources.files("pascal") / "corpus").iterdir()
                if p.name.endswith(".mhdl"))


def corpus_text(name: str) -> str:
    return (resources.files("pascal") / "corpus" / f"{name}.mhdl").read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def corpus_design(name: str):
    return load_text(corpus_text(name))


@functools.lru_cache(maxsize=None)
def rsa(n: int, cs: int = 1, cm: int = 1, su: int = 1):
    return bench.design(bench.RsaParams(n, cs, cm, su))


@pytest.fixture(params=CORPUS)
def corpus_name(request):
    return request.param


@pytest.fixture
def rsa8():
    return rsa(8)


TOGGLER = """
// @secret k
// @observable q done
// @start start
// @done done
module toggler(input clk, input rst, input start, input k, output reg q, output done);
  assign done = q;
  always @(posedge clk) begin
    if (rst) q <= 1'd0;
    else q <= ~q;
  end
endmodule
"""


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
