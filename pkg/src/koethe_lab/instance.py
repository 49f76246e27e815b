"""Declarative instance files: named spaces, named sequences and a task list."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .exprs import ExpressionError
from .koethe import KoetheMatrix, matrix_from_dict
from .seqcore import ScalarSequence, sequence_from_dict
from .verdicts import Budget

SCHEMA_ID = "koethe-lab/instance/v1"

OPS = (
    "axioms", "nuclear", "g1", "ginf", "inclusion", "membership", "dual",
    "certify", "theorem1", "theorem2", "normality", "convolve",
)

# which task fields name a space and which name a sequence
SPACE_REFS = ("space", "source", "target")
SEQUENCE_REFS = ("sequence", "dominant", "x")

REQUIRED = {
    "axioms": ("space",),
    "nuclear": ("space",),
    "g1": ("space",),
    "ginf": ("space",),
    "inclusion": ("source", "target"),
    "membership": ("sequence", "space"),
    "dual": ("sequence", "space"),
    "certify": ("source", "target", "sequence"),
    "theorem1": ("source", "target", "sequence"),
    "theorem2": ("source", "target", "sequence"),
    "normality": ("source", "target", "sequence", "dominant"),
    "convolve": ("sequence", "x", "N"),
}

_positive = {"type": "integer", "minimum": 1}

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "description": {"type": "string"},
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": _positive, "kmax": _positive, "mmax": _positive, "jmax": _positive,
                "window": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "probes": {"type": "integer", "minimum": 0},
            },
        },
        "spaces": {
            "type": "object",
            "additionalProperties": {"type": "object", "required": ["class"]},
        },
        "sequences": {
            "type": "object",
            "additionalProperties": {"type": ["object", "array"]},
        },
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["op"],
                "additionalProperties": False,
                "properties": {
                    "op": {"enum": list(OPS)},
                    "id": {"type": "string"},
                    "space": {"type": "string"},
                    "source": {"type": "string"},
                    "target": {"type": "string"},
                    "sequence": {"type": "string"},
                    "dominant": {"type": "string"},
                    "x": {"type": "string"},
                    "N": _positive,
                    "direction": {"enum": ["forward", "transpose"]},
                    "normalize": {"type": "boolean"},
                    "extra": {"enum": ["g1", "ginf"]},
                },
            },
        },
    },
}


class InstanceError(ValueError):
    """Anything wrong with an instance file; the message says where."""


@dataclass
class Task:
    op: str
    id: str
    params: dict


@dataclass
class InstanceFile:
    budget: Budget
    spaces: dict
    sequences: dict
    tasks: list
    source: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return instance_hash(self.source)


def instance_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _load_json(text: str, origin: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_document(doc: dict, origin: str = "<instance>") -> InstanceFile:
    validator = jsonschema.Draft202012Validator(INSTANCE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise InstanceError(f"{origin}: {_where(e)}: {e.message}")

    budget = Budget(**doc.get("budget", {}))
    spaces: dict[str, KoetheMatrix] = {}
    for name, entry in doc.get("spaces", {}).items():
        try:
            spaces[name] = matrix_from_dict(entry)
        except (ValueError, KeyError, TypeError, ExpressionError) as exc:
            raise InstanceError(f"{origin}: space {name!r}: {exc}") from None
    sequences: dict[str, ScalarSequence] = {}
    for name, entry in doc.get("sequences", {}).items():
        try:
            sequences[name] = sequence_from_dict(entry)
        except (ValueError, KeyError, TypeError, ExpressionError) as exc:
            raise InstanceError(f"{origin}: sequence {name!r}: {exc}") from None

    tasks = []
    for i, t in enumerate(doc.get("tasks", [])):
        op = t["op"]
        tid = t.get("id", f"{i + 1}:{op}")
        for key in REQUIRED[op]:
            if key not in t:
                raise InstanceError(f"{origin}: tasks/{i}: {op} needs {key!r}")
        for key in SPACE_REFS:
            if key in t and t[key] not in spaces:
                raise InstanceError(f"{origin}: tasks/{i}: undefined space {t[key]!r}")
        for key in SEQUENCE_REFS:
            if key in t and t[key] not in sequences:
                raise InstanceError(f"{origin}: tasks/{i}: undefined sequence {t[key]!r}")
        tasks.append(Task(op, tid, {k: v for k, v in t.items() if k not in ("op", "id")}))
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise InstanceError(f"{origin}: task ids must be unique")
    return InstanceFile(budget, spaces, sequences, tasks, doc)


def parse_instance(path: Union[str, Path], text: Optional[str] = None) -> InstanceFile:
    path = Path(path)
    if text is None:
        try:
            text = path.read_text()
        except OSError as exc:
            raise InstanceError(f"{path}: {exc.strerror}") from None
    return parse_document(_load_json(text, str(path)), str(path))
