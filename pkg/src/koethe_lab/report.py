"""Verification reports: the json/text/csv renderings and their schema."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .seqcore import SignedLogValue
from .verdicts import BoundPair, DivergenceTrace, Violation, witness_from_dict

REPORT_SCHEMA_ID = "koethe-lab/report/v1"
CSV_HEADER = ("task", "k", "status", "m", "C_log", "verified_up_to")

_slv = {
    "type": "object",
    "required": ["sign", "log", "dec"],
    "properties": {
        "sign": {"enum": [-1, 0, 1]},
        "log": {"type": ["number", "string"]},
        "lo": {"type": "number"},
        "dec": {"type": "string"},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "tool_version", "instance_hash", "tasks"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "tool_version": {"type": "string"},
        "instance_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "budget": {"type": "object"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "op", "status", "witnesses", "budget_used", "rows"],
                "properties": {
                    "id": {"type": "string"},
                    "op": {"type": "string"},
                    "status": {"enum": ["Holds", "Fails", "Inconclusive", "Computed", "Error"]},
                    "agreement": {"enum": ["Consistent", "Contradiction", "Undetermined"]},
                    "witnesses": {"type": "array", "items": {"type": "object", "required": ["kind"]}},
                    "budget_used": {"type": "object"},
                    "notes": {"type": "array", "items": {"type": "string"}},
                    "details": {"type": "object"},
                    "values": {"type": "array", "items": _slv},
                    "error": {"type": "string"},
                    "wall_time": {"type": "number", "minimum": 0},
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["k", "status"],
                            "properties": {
                                "k": {"type": ["integer", "null"]},
                                "status": {"type": "string"},
                                "m": {"type": ["integer", "null"]},
                                "C_log": {"type": ["number", "string", "null"]},
                                "verified_up_to": {"type": ["integer", "null"]},
                            },
                        },
                    },
                },
            },
        },
    },
}


@dataclass
class Row:
    """One (task, k) line of the csv rendering."""

    k: Optional[int]
    status: str
    m: Optional[int] = None
    C_log: Optional[float] = None
    verified_up_to: Optional[int] = None

    def to_dict(self):
        return {"k": self.k, "status": self.status, "m": self.m, "C_log": self.C_log,
                "verified_up_to": self.verified_up_to}

    @classmethod
    def from_dict(cls, d):
        c = d.get("C_log")
        return cls(d["k"], d["status"], d.get("m"), None if c is None else float(c), d.get("verified_up_to"))


@dataclass
class TaskResult:
    id: str
    op: str
    status: str
    witnesses: list = field(default_factory=list)
    budget_used: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    agreement: Optional[str] = None
    details: Optional[dict] = None
    values: Optional[list] = None
    error: Optional[str] = None
    wall_time: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "op": self.op,
            "status": self.status,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "budget_used": dict(self.budget_used),
            "notes": list(self.notes),
            "rows": [r.to_dict() for r in self.rows],
        }
        for name in ("agreement", "details", "error", "wall_time"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        if self.values is not None:
            d["values"] = [v.to_dict() for v in self.values]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskResult":
        return cls(
            d["id"], d["op"], d["status"],
            [witness_from_dict(w) for w in d.get("witnesses", [])],
            dict(d.get("budget_used", {})),
            list(d.get("notes", [])),
            [Row.from_dict(r) for r in d.get("rows", [])],
            d.get("agreement"),
            d.get("details"),
            [SignedLogValue.from_dict(v) for v in d["values"]] if "values" in d else None,
            d.get("error"),
            d.get("wall_time"),
        )


@dataclass
class Report:
    tool_version: str
    instance_hash: str
    tasks: list = field(default_factory=list)
    budget: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA_ID,
            "tool_version": self.tool_version,
            "instance_hash": self.instance_hash,
            "budget": dict(self.budget),
            "tasks": [t.to_dict() for t in self.tasks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("schema") != REPORT_SCHEMA_ID:
            raise ValueError(f"not a {REPORT_SCHEMA_ID} document")
        return cls(d["tool_version"], d["instance_hash"],
                   [TaskResult.from_dict(t) for t in d["tasks"]], dict(d.get("budget", {})))

    def exit_code(self) -> int:
        """0 all Holds/Consistent, 3 any Contradiction, 2 anything else open or failed."""
        if any(t.agreement == "Contradiction" for t in self.tasks):
            return 3
        for t in self.tasks:
            if t.agreement is not None:
                if t.agreement != "Consistent":
                    return 2
            elif t.status not in ("Holds", "Computed"):
                return 2
        return 0


# ---------------------------------------------------------------------------
# rendering


def _finite(obj):
    """JSON has no infinities; spell them as strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def to_json(report: Report) -> str:
    return json.dumps(_finite(report.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"


def from_json(text: str) -> Report:
    return Report.from_dict(json.loads(text))


def render_witness(w) -> str:
    if isinstance(w, BoundPair):
        m = "" if w.m is None else f"m={w.m}, "
        return f"k={w.k} → ({m}C={w.C.decimal()})"
    if isinstance(w, DivergenceTrace):
        m = "" if w.m is None else f", m={w.m}"
        n0, n1 = (w.indices[0], w.indices[-1]) if w.indices else (None, None)
        return f"k={w.k}{m}: diverges over n={n0}..{n1}"
    if isinstance(w, Violation):
        return f"violated at n={w.n}, k={w.k}: {w.condition}"
    return str(w)


def to_text(report: Report) -> str:
    out = [f"koethe-lab {report.tool_version}  instance {report.instance_hash[:16]}"]
    for t in report.tasks:
        out.append(f"[{t.id}] {t.op}: {t.status}")
        if t.agreement is not None:
            out.append(f"  agreement: {t.agreement}")
        if t.error:
            out.append(f"  error: {t.error}")
        for w in t.witnesses:
            out.append("  " + render_witness(w))
        if t.values is not None:
            out.append("  values: " + ", ".join(v.decimal() for v in t.values))
        if t.details:
            for key in sorted(t.details):
                val = t.details[key]
                if isinstance(val, dict) and "status" in val:
                    val = val["status"] + (f" ({val['rule']})" if val.get("rule") else "")
                elif isinstance(val, dict):
                    val = ", ".join(f"{k}: {v}" for k, v in val.items())
                out.append(f"  {key}: {val}")
        for note in t.notes:
            out.append(f"  note: {note}")
        if t.wall_time is not None:
            out.append(f"  time: {t.wall_time:.3f}s")
    return "\n".join(out) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for t in report.tasks:
        for r in t.rows:
            w.writerow([
                t.id,
                "" if r.k is None else r.k,
                r.status,
                "" if r.m is None else r.m,
                "" if r.C_log is None else repr(r.C_log),
                "" if r.verified_up_to is None else r.verified_up_to,
            ])
    return buf.getvalue()


def emit_report(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return to_json(report).encode()
    if fmt == "text":
        return to_text(report).encode()
    if fmt == "csv":
        return to_csv(report).encode()
    raise ValueError(f"unknown report format {fmt!r}")
