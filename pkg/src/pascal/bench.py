"""Parameterized square-and-multiply exponentiation benchmark.

The generated design reproduces the *schedule* of a left-to-right binary
modular exponentiation loop: one squaring step per exponent bit and one
extra multiply step for every bit that is set.  The datapath only mixes the
ciphertext and key reversibly; it is not a Montgomery multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class ParamOutOfRange(ValueError):
    pass


class ZeroKey(ValueError):
    pass


@dataclass(frozen=True)
class RsaParams:
    n: int
    cycles_square: int = 1
    cycles_multiply: int = 1
    setup_cycles: int = 1

    def check(self):
        if not 4 <= self.n <= 32:
            raise ParamOutOfRange(f"key width {self.n} outside 4..32")
        for name in ("cycles_square", "cycles_multiply", "setup_cycles"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ParamOutOfRange(f"{name} must be a positive integer, got {v!r}")
        if max(self.cycles_square, self.cycles_multiply, self.setup_cycles) > 255:
            raise ParamOutOfRange("per-step cycle counts are limited to 255")

    @property
    def max_latency(self) -> int:
        return self.setup_cycles - 1 + self.n * (self.cycles_square + self.cycles_multiply)

    @property
    def default_bound(self) -> int:
        return self.max_latency + 6

    @property
    def name(self) -> str:
        extra = ""
        if (self.cycles_square, self.cycles_multiply, self.setup_cycles) != (1, 1, 1):
            extra = f"_s{self.cycles_square}m{self.cycles_multiply}u{self.setup_cycles}"
        return f"rsa{self.n}{extra}"


def expected_latency(p: RsaParams, key: int) -> int:
    """Cycles from the start pulse to done for ``key``.

    The start cycle doubles as the first setup cycle, so only the remaining
    ``setup_cycles - 1`` are added to the per-bit cost.
    """
    p.check()
    if not 0 <= key < (1 << p.n):
        raise ParamOutOfRange(f"key {key:#x} does not fit in {p.n} bits")
    if key == 0:
        raise ZeroKey("the all-zero key is outside the benchmark's key space")
    return (p.setup_cycles - 1) + p.n * p.cycles_square + bin(key).count("1") * p.cycles_multiply


def generate(p: RsaParams) -> str:
    """Mini-HDL source of the exponentiation schedule for ``p``."""
    p.check()
    n, cs, cm, su = p.n, p.cycles_square, p.cycles_multiply, p.setup_cycles
    jw = n.bit_length()
    sw = 3 if su > 1 else 2
    sub_max = max(cs, cm, su - 1)
    cw = max(1, (sub_max - 1).bit_length()) if sub_max > 1 else 0
    first = 4 if su > 1 else 1

    def st(v):
        return f"{sw}'d{v}"

    def sub_is(v):
        return f"(sub == {cw}'d{v})"

    sq_end = f"(state == {st(1)})" + (f" & {sub_is(cs - 1)}" if cs > 1 else "")
    mul_end = f"(state == {st(2)})" + (f" & {sub_is(cm - 1)}" if cm > 1 else "")

    L = []
    L.append(f"// Square-and-multiply exponentiation schedule, {n}-bit exponent.")
    L.append(f"// Squaring: {cs} cycle(s) per bit; multiply: {cm} cycle(s) per set bit;"
             f" setup: {su} cycle(s) starting with the start cycle.")
    L.append("// @secret key")
    L.append("// @observable pt done")
    L.append("// @start start")
    L.append("// @done done")
    L.append(f"// @assume key != {n}'d0")
    L.append(f"// @bound {p.default_bound}")
    L.append(f"module {p.name}(input clk, input rst, input start, input [{n - 1}:0] key,"
             f" input [{n - 1}:0] ct, output [{n - 1}:0] pt, output done);")
    L.append(f"  reg [{sw - 1}:0] state;  // 0 idle, 1 square, 2 multiply, 3 finished"
             + (", 4 setup" if su > 1 else ""))
    L.append(f"  reg [{jw - 1}:0] j;")
    L.append(f"  reg [{n - 1}:0] kbits;")
    L.append(f"  reg [{n - 1}:0] acc;")
    L.append(f"  reg [{n - 1}:0] base;")
    if cw:
        L.append(f"  reg [{cw - 1}:0] sub;" if cw > 1 else "  reg sub;")
    L.append("  wire sq_end, mul_end, last_bit, finishing;")
    L.append(f"  wire [{n - 1}:0] acc_sq, acc_mul;")
    L.append(f"  assign acc_sq = {{acc[{n - 2}:0], acc[{n - 1}]}} ^ base;")
    L.append("  assign acc_mul = acc + base;")
    L.append(f"  assign last_bit = j == {jw}'d{n - 1};")
    L.append(f"  assign sq_end = {sq_end};")
    L.append(f"  assign mul_end = {mul_end};")
    L.append("  assign finishing = last_bit & ((sq_end & ~kbits[0]) | mul_end);")
    L.append(f"  assign done = finishing | (state == {st(3)});")
    L.append("  assign pt = finishing ? (mul_end ? acc_mul : acc_sq) : acc;")
    L.append("  always @(posedge clk) begin")
    L.append("    if (rst) begin")
    L.append(f"      state <= {st(0)};")
    L.append(f"      j <= {jw}'d0;")
    L.append(f"      kbits <= {n}'d0;")
    L.append(f"      acc <= {n}'d0;")
    L.append(f"      base <= {n}'d0;")
    if cw:
        L.append(f"      sub <= {cw}'d0;")
    L.append("    end else if (start) begin")
    L.append(f"      state <= {st(first)};")
    L.append(f"      j <= {jw}'d0;")
    L.append("      kbits <= key;")
    L.append(f"      acc <= {n}'d1;")
    L.append("      base <= ct;")
    if cw:
        L.append(f"      sub <= {cw}'d0;")
    L.append("    end else begin")
    if su > 1:
        L.append(f"      if (state == {st(4)}) begin")
        L.append(f"        if {sub_is(su - 2)} begin")
        L.append(f"          sub <= {cw}'d0;")
        L.append(f"          state <= {st(1)};")
        L.append("        end else begin")
        L.append(f"          sub <= sub + {cw}'d1;")
        L.append("        end")
        L.append("      end")

    def step(state_val, end_sig, body):
        L.append(f"      if (state == {st(state_val)}) begin")
        if cw:
            L.append(f"        if ({end_sig}) begin")
            L.append(f"          sub <= {cw}'d0;")
            L.extend("  " + line for line in body)
            L.append("        end else begin")
            L.append(f"          sub <= sub + {cw}'d1;")
            L.append("        end")
        else:
            L.extend(body)
        L.append("      end")

    step(1, "sq_end", [
        "        acc <= acc_sq;",
        "        if (kbits[0]) begin",
        f"          state <= {st(2)};",
        "        end else begin",
        "          kbits <= kbits >> 1;",
        f"          j <= j + {jw}'d1;",
        f"          if (last_bit) state <= {st(3)};",
        "        end",
    ])
    step(2, "mul_end", [
        "        acc <= acc_mul;",
        "        kbits <= kbits >> 1;",
        f"        j <= j + {jw}'d1;",
        f"        if (last_bit) state <= {st(3)}; else state <= {st(1)};",
    ])
    L.append("    end")
    L.append("  end")
    L.append("endmodule")
    return "\n".join(L) + "\n"


def write(p: RsaParams, directory) -> Path:
    path = Path(directory) / f"{p.name}.mhdl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(generate(p), encoding="utf-8")
    return path


def design(p: RsaParams):
    from .hdl import load_text
    return load_text(generate(p))
