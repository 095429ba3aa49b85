"""Command-line entry point.

Exit codes: 0 secure or success, 1 error, 2 timing channel (or taint path)
found, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from . import bench, compensator, enumeration, ir, report, sim, taint
from .hdl import ElabError, HdlError, PragmaSet, emit, load

EXIT_OK, EXIT_ERROR, EXIT_CHANNEL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
SOLVER_ENV = "PASCAL_SOLVER"


def _err(msg: str):
    print(f"pascal: {msg}", file=sys.stderr)


def _load(args) -> ir.Design:
    pragmas = PragmaSet.load(args.pragmas) if args.pragmas else None
    return load(args.design, pragmas)


def _bound(args, d: ir.Design) -> int:
    bound = args.bound if args.bound is not None else d.annot.bound
    if bound is None:
        raise ValueError(f"{args.design}: pass --bound (the design has no @bound pragma)")
    return bound


def _doc(args, d, bound=None) -> report.ReportDocument:
    return report.ReportDocument(d.name, str(args.design), report.sha256_of(args.design), bound)


def _print_classes(r: enumeration.TimingClassReport):
    if r.verdict == enumeration.NO_PATH:
        print("no secret reaches an observable; enumeration skipped")
        print(f"verdict: {r.verdict}")
        return
    state = "exhausted" if r.exhausted else "partial"
    print(f"timing classes ({r.engine}, bound {r.bound}, {state}): "
          f"{sorted(r.latencies) if r.classes else 'none'}")
    print(f"verdict: {r.verdict}")


def _write_traces(r, out_dir: Path):
    for t, w in r.classes:
        sim.write_trace(w, out_dir / f"{r.design}.class{t}.trace")


def _enumerate(args, d, bound):
    solver_cmd = args.solver_cmd or os.environ.get(SOLVER_ENV)
    return enumeration.enumerate_classes(
        d, bound, mode=args.mode, engine=args.engine, solver_cmd=solver_cmd,
        timeout=args.timeout, precheck=not args.no_precheck, force=args.force)


def _noninterference(args, d, bound):
    solver_cmd = args.solver_cmd or os.environ.get(SOLVER_ENV)
    return enumeration.check_noninterference(d, bound, solver_cmd=solver_cmd, timeout=args.timeout)


def cmd_check(args) -> int:
    d = _load(args)
    pv = taint.has_security_path(d)
    print(f"{d.name}: {pv.verdict}")
    if pv.exists:
        print(f"tainted observables: {' '.join(pv.tainted_observables)}")
        print(f"cone: {' '.join(sorted(pv.cone))}")
    if args.out:
        doc = _doc(args, d)
        doc.taint = pv
        report.emit_report(doc, args.out)
    return EXIT_CHANNEL if pv.exists else EXIT_OK


def cmd_enumerate(args) -> int:
    d = _load(args)
    bound = _bound(args, d)
    r = _enumerate(args, d, bound)
    doc = _doc(args, d, bound)
    doc.timing = r
    doc.taint = taint.has_security_path(d)
    _print_classes(r)
    code = EXIT_OK
    if r.verdict == enumeration.INCONCLUSIVE:
        code = EXIT_INCONCLUSIVE
    elif r.verdict == enumeration.DISPARATE:
        code = EXIT_CHANNEL
        if not args.no_noninterference:
            ni = _noninterference(args, d, bound)
            doc.noninterference = ni
            print(f"noninterference: {ni.verdict}")
            if ni.verdict == enumeration.SECURE:
                print("latency varies with public inputs only")
                code = EXIT_OK
            elif ni.verdict == enumeration.INCONCLUSIVE:
                code = EXIT_INCONCLUSIVE
            else:
                a, b = ni.pair
                print(f"witness pair: {a.stimulus.secret} -> {a.latency}, "
                      f"{b.stimulus.secret} -> {b.latency}")
    if r.exhausted and r.classes:
        doc.compensator = compensator.synthesize_spec(r)
        doc.overhead = compensator.overhead(r, d)
    if args.out:
        out = Path(args.out)
        paths = report.emit_report(doc, out)
        if args.trace:
            _write_traces(r, out)
        print(f"wrote {paths[0]} and {paths[1]}")
    return code


def cmd_harden(args) -> int:
    d = _load(args)
    bound = _bound(args, d)
    doc = _doc(args, d, bound)
    if args.report:
        spec = report.spec_from_json(report.load_json(args.report))
    else:
        args.no_precheck = True  # a harden request wants the classes regardless
        r = _enumerate(args, d, bound)
        _print_classes(r)
        if not r.exhausted:
            _err("enumeration did not finish; refusing to harden from a partial report")
            return EXIT_INCONCLUSIVE
        spec = compensator.synthesize_spec(r)
        doc.timing = r
        doc.overhead = compensator.overhead(r, d)
    doc.compensator = spec
    sd = compensator.harden(d, spec)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{sd.name}.mhdl"
    path.write_text(emit(sd), encoding="utf-8")
    print(f"t_max {spec.t_max}, counter width {spec.width}")
    if doc.overhead is not None:
        o = doc.overhead
        print(f"added flops: counter {o.counter_flops}, total {o.total_added_flops}; "
              f"path-balanced estimate {o.path_balanced_unit} (unit), "
              f"{o.path_balanced_datapath} (datapath)")
    diff = compensator.structural_diff(d, sd)
    if diff:
        _err("hardening altered original logic: " + "; ".join(diff))
        return EXIT_ERROR
    paths = report.emit_report(doc, out)
    print(f"wrote {path}, {paths[0]} and {paths[1]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    d = _load(args)
    bound = _bound(args, d)
    expect = None
    if args.report:
        expect = report.spec_from_json(report.load_json(args.report)).t_max
    elif args.t_max is not None:
        expect = args.t_max
    args.no_precheck = True
    r = _enumerate(args, d, bound)
    _print_classes(r)
    doc = _doc(args, d, bound)
    doc.timing = r
    if r.verdict == enumeration.INCONCLUSIVE:
        code = EXIT_INCONCLUSIVE
    elif len(r.classes) != 1 or (expect is not None and r.latencies != [expect]):
        if expect is not None:
            print(f"expected a single class at {expect}")
        code = EXIT_CHANNEL
    else:
        ni = _noninterference(args, d, bound)
        doc.noninterference = ni
        print(f"noninterference: {ni.verdict}")
        code = {enumeration.SECURE: EXIT_OK, enumeration.LEAKS: EXIT_CHANNEL}.get(
            ni.verdict, EXIT_INCONCLUSIVE)
    if args.out:
        report.emit_report(doc, args.out)
    return code


def cmd_bench(args) -> int:
    out = Path(args.out)
    if args.family == "rsa":
        p = bench.RsaParams(args.bits, args.cs, args.cm, args.setup)
        path = bench.write(p, out)
        print(f"wrote {path} (latencies {p.setup_cycles - 1 + p.n * p.cycles_square + p.cycles_multiply}"
              f"..{p.max_latency}, bound {p.default_bound})")
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted((resources.files("pascal") / "corpus").iterdir(), key=lambda x: x.name):
        if item.name.endswith(".mhdl"):
            (out / item.name).write_text(item.read_text(encoding="utf-8"), encoding="utf-8")
            print(f"wrote {out / item.name}")
    return EXIT_OK


def _analysis_flags(p: argparse.ArgumentParser):
    p.add_argument("design", help="mini-HDL source file")
    p.add_argument("--pragmas", help="JSON or YAML sidecar overriding in-source pragmas")
    p.add_argument("--bound", type=int, help="cycles to explore after start (default: @bound)")
    p.add_argument("--mode", choices=enumeration.MODES, default="property")
    p.add_argument("--engine", choices=("bmc", "oracle"), default="bmc")
    p.add_argument("--solver-cmd", help=f"external DIMACS solver command (default: ${SOLVER_ENV})")
    p.add_argument("--timeout", type=float, help="per-query solver time budget in seconds")
    p.add_argument("--force", action="store_true", help="let the oracle exceed its domain guard")
    p.add_argument("--no-precheck", action="store_true", help="skip the taint pre-check")
    p.add_argument("--out", help="directory for reports and generated designs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pascal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("check", help="structural secret-to-observable path check")
    p.add_argument("design")
    p.add_argument("--pragmas")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("enumerate", help="enumerate completion-latency classes")
    _analysis_flags(p)
    p.add_argument("--trace", action="store_true", help="write one trace file per class")
    p.add_argument("--no-noninterference", action="store_true",
                   help="report any latency disparity as a channel")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("harden", help="enumerate, then wrap the design with a compensator")
    _analysis_flags(p)
    p.add_argument("--report", help="take t_max from an existing report instead of enumerating")
    p.set_defaults(func=cmd_harden)

    p = sub.add_parser("verify", help="confirm a hardened design has a single latency class")
    _analysis_flags(p)
    p.add_argument("--t-max", type=int, help="the latency the single class must have")
    p.add_argument("--report", help="report whose compensator t_max is expected")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="generate benchmark designs")
    p.add_argument("family", choices=("rsa", "corpus"))
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--cs", type=int, default=1, help="cycles per squaring step")
    p.add_argument("--cm", type=int, default=1, help="cycles per multiply step")
    p.add_argument("--setup", type=int, default=1, help="setup cycles, start cycle included")
    p.add_argument("--out", default="corpus")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HdlError, ElabError) as exc:
        _err(f"{getattr(args, 'design', '')}: {exc}")
        for diag in getattr(exc, "diagnostics", None) or ():
            _err(f"  {diag}")
    except (OSError, ValueError, RuntimeError, report.ReportError, ir.UnknownSignal) as exc:
        _err(str(exc))
    except RecursionError:
        _err("input nests too deeply")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
