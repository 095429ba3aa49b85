"""Machine-readable run reports: versioned JSON plus a per-class timing CSV.

JSON layout (``"schema": 1``)::

    {
      "schema": 1,
      "design": {"name": str, "path": str|null, "sha256": str|null},
      "bound": int|null,
      "taint": {"verdict", "tainted_observables", "cone"} | null,
      "timing": {"engine", "mode", "exhausted", "verdict", "t_max",
                 "classes": [{"latency", "witness"}],
                 "iterations": [{"index", "latency", "wall_ms", "result"}]} | null,
      "noninterference": {"verdict", "bound", "wall_ms", "pair"} | null,
      "compensator": {"t_max", "counter_width", "latencies"} | null,
      "overhead": {...OverheadReport fields...} | null
    }

``wall_ms`` fields are the only ones allowed to differ between identical runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .compensator import CompensatorSpec, OverheadReport
from .enumeration import NoninterferenceResult, TimingClassReport
from .taint import PathVerdict

SCHEMA_VERSION = 1
CSV_COLUMNS = ("class_index", "latency_cycles", "discovery_wall_ms", "discovery_normalized")

_INT_OR_NULL = {"type": ["integer", "null"]}
_WITNESS = {
    "type": "object",
    "required": ["public", "secret", "bound", "latency", "completed"],
    "properties": {
        "public": {"type": "object", "additionalProperties": {"type": "integer"}},
        "secret": {"type": "object", "additionalProperties": {"type": "integer"}},
        "bound": {"type": "integer"},
        "latency": _INT_OR_NULL,
        "completed": {"type": "boolean"},
    },
}

JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "design", "bound", "taint", "timing", "noninterference",
                 "compensator", "overhead"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "design": {
            "type": "object",
            "required": ["name", "path", "sha256"],
            "properties": {
                "name": {"type": "string"},
                "path": {"type": ["string", "null"]},
                "sha256": {"type": ["string", "null"], "pattern": "^[0-9a-f]{64}$"},
            },
        },
        "bound": _INT_OR_NULL,
        "taint": {
            "type": ["object", "null"],
            "required": ["verdict", "tainted_observables", "cone"],
            "properties": {
                "verdict": {"enum": ["PATH_EXISTS", "NO_PATH"]},
                "tainted_observables": {"type": "array", "items": {"type": "string"}},
                "cone": {"type": "array", "items": {"type": "string"}},
            },
        },
        "timing": {
            "type": ["object", "null"],
            "required": ["engine", "mode", "exhausted", "verdict", "t_max", "classes", "iterations"],
            "properties": {
                "engine": {"enum": ["bmc", "oracle"]},
                "mode": {"type": ["string", "null"]},
                "exhausted": {"type": "boolean"},
                "verdict": {"enum": ["NO_PATH", "NEVER_COMPLETES", "CONSTANT", "DISPARATE",
                                     "INCONCLUSIVE"]},
                "t_max": _INT_OR_NULL,
                "classes": {
                    "type": "array",
                    "items": {"type": "object", "required": ["latency", "witness"],
                              "properties": {"latency": {"type": "integer", "minimum": 1},
                                             "witness": _WITNESS}},
                },
                "iterations": {
                    "type": "array",
                    "items": {"type": "object",
                              "required": ["index", "latency", "wall_ms", "result"],
                              "properties": {"index": {"type": "integer"},
                                             "latency": _INT_OR_NULL,
                                             "wall_ms": {"type": "number", "minimum": 0},
                                             "result": {"enum": ["SAT", "UNSAT", "UNKNOWN"]}}},
                },
            },
        },
        "noninterference": {
            "type": ["object", "null"],
            "required": ["verdict", "bound", "pair"],
            "properties": {
                "verdict": {"enum": ["SECURE", "LEAKS", "INCONCLUSIVE"]},
                "bound": {"type": "integer"},
                "wall_ms": {"type": "number"},
                "pair": {"oneOf": [{"type": "null"},
                                   {"type": "array", "items": _WITNESS,
                                    "minItems": 2, "maxItems": 2}]},
            },
        },
        "compensator": {
            "type": ["object", "null"],
            "required": ["t_max", "counter_width", "latencies"],
            "properties": {"t_max": {"type": "integer", "minimum": 1},
                           "counter_width": {"type": "integer", "minimum": 1},
                           "latencies": {"type": "array", "items": {"type": "integer"}}},
        },
        "overhead": {
            "type": ["object", "null"],
            "required": ["counter_flops", "hold_flops", "total_added_flops",
                         "path_balanced_unit", "path_balanced_datapath", "savings_ratio", "note"],
        },
    },
}


class ReportError(ValueError):
    pass


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ReportDocument:
    name: str
    path: str | None = None
    sha256: str | None = None
    bound: int | None = None
    taint: PathVerdict | None = None
    timing: TimingClassReport | None = None
    noninterference: NoninterferenceResult | None = None
    compensator: CompensatorSpec | None = None
    overhead: OverheadReport | None = None

    def check(self):
        """Raise ReportError when sections disagree with each other."""
        if self.timing is not None and self.compensator is not None:
            if self.timing.exhausted and self.timing.t_max != self.compensator.t_max:
                raise ReportError("compensator t_max does not match the class report")
        if self.timing is not None and self.bound is not None and self.timing.bound != self.bound:
            raise ReportError("timing bound differs from the report bound")
        if self.path is not None and self.sha256 is not None and Path(self.path).exists():
            if sha256_of(self.path) != self.sha256:
                raise ReportError(f"{self.path} changed since the report was made")

    def to_json(self) -> dict:
        doc = {
            "schema": SCHEMA_VERSION,
            "design": {"name": self.name, "path": self.path, "sha256": self.sha256},
            "bound": self.bound,
            "taint": None,
            "timing": None,
            "noninterference": None,
            "compensator": self.compensator.to_json() if self.compensator else None,
            "overhead": self.overhead.to_json() if self.overhead else None,
        }
        if self.taint is not None:
            doc["taint"] = {"verdict": self.taint.verdict,
                            "tainted_observables": list(self.taint.tainted_observables),
                            "cone": sorted(self.taint.cone)}
        r = self.timing
        if r is not None:
            doc["timing"] = {
                "engine": r.engine, "mode": r.mode, "exhausted": r.exhausted,
                "verdict": r.verdict, "t_max": r.t_max,
                "classes": [{"latency": t, "witness": w.to_json()} for t, w in r.classes],
                "iterations": [{"index": it.index, "latency": it.latency,
                                "wall_ms": round(it.wall_ms, 3), "result": it.result}
                               for it in r.iterations],
            }
        ni = self.noninterference
        if ni is not None:
            doc["noninterference"] = {
                "verdict": ni.verdict, "bound": ni.bound, "wall_ms": round(ni.wall_ms, 3),
                "pair": [w.to_json() for w in ni.pair] if ni.pair else None,
            }
        return doc


def validate(doc: dict) -> None:
    jsonschema.validate(doc, JSON_SCHEMA)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    try:
        validate(doc)
    except jsonschema.ValidationError as exc:
        raise ReportError(f"{path} does not follow report schema {SCHEMA_VERSION}: "
                          f"{exc.message}") from exc
    return doc


def spec_from_json(doc: dict) -> CompensatorSpec:
    """Compensator parameters recorded in a report, or derived from its classes."""
    if doc.get("compensator"):
        return CompensatorSpec.from_json(doc["compensator"])
    timing = doc.get("timing")
    if not timing or not timing["exhausted"] or not timing["classes"]:
        raise ReportError("report holds no complete class list to derive t_max from")
    lats = [c["latency"] for c in timing["classes"]]
    return CompensatorSpec.for_t_max(max(lats), lats)


def timing_rows(r: TimingClassReport | None) -> list[tuple]:
    """One row per class in discovery order; times normalized by their sum."""
    if r is None:
        return []
    found = [it for it in r.iterations if it.latency is not None]
    total = sum(it.wall_ms for it in found)
    rows = []
    for k, it in enumerate(found):
        norm = it.wall_ms / total if total > 0 else 1.0 / len(found)
        rows.append((k, it.latency, round(it.wall_ms, 3), norm))
    return rows


def csv_text(r: TimingClassReport | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for k, t, ms, norm in timing_rows(r):
        w.writerow([k, t, f"{ms:.3f}", repr(norm)])
    return buf.getvalue()


def emit_report(doc: ReportDocument, out_dir, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.report.json`` and ``<stem>.timing.csv`` into ``out_dir``."""
    doc.check()
    data = doc.to_json()
    validate(data)
    out = Path(out_dir)
    stem = stem or doc.name
    jpath, cpath = out / f"{stem}.report.json", out / f"{stem}.timing.csv"
    try:
        out.mkdir(parents=True, exist_ok=True)
        jpath.write_text(dumps(data), encoding="utf-8")
        cpath.write_text(csv_text(doc.timing), encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report into {out}: {exc}") from exc
    return jpath, cpath
