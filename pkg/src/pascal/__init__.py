"""Timing-channel detection and latency compensation for small RTL designs.

Pipeline: parse a mini-HDL module, check for structural secret flow, enumerate
every completion latency with bounded model checking, then pad the design to
its worst-case latency and prove the result has a single timing class.
"""

from .compensator import CompensatorSpec, OverheadReport, harden, overhead, synthesize_spec
from .enumeration import (
    BlockedSet,
    TimingClassReport,
    build_modified_duv,
    check_noninterference,
    enumerate_classes,
    find_witness,
)
from .hdl import emit, load, load_text
from .ir import Design, validate_design
from .sim import Stimulus, TraceWitness, cosim_equiv, exhaustive_classes, run
from .taint import has_security_path, propagate

__version__ = "0.1.0"

__all__ = [
    "BlockedSet", "CompensatorSpec", "Design", "OverheadReport", "Stimulus", "TimingClassReport",
    "TraceWitness", "build_modified_duv", "check_noninterference", "cosim_equiv", "emit",
    "enumerate_classes", "exhaustive_classes", "find_witness", "harden", "has_security_path",
    "load", "load_text", "overhead", "propagate", "run", "synthesize_spec", "validate_design",
]
