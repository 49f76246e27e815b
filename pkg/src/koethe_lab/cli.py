"""koethe-lab command line: run instance files, convolve prefixes, run the curated suite."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__
from .instance import InstanceError, parse_document, parse_instance
from .report import Report, emit_report
from .runner import run_tasks, with_overrides
from .seqcore import sequence_from_dict
from .operators import apply_T

SUITE_FILES = ("forward_suite.json", "transpose_suite.json")


def suite_document() -> dict:
    """The shipped curated instances merged into one instance document."""
    merged = {"schema": "koethe-lab/instance/v1", "description": "curated suite",
              "spaces": {}, "sequences": {}, "tasks": []}
    for name in SUITE_FILES:
        doc = json.loads(resources.files("koethe_lab").joinpath("data", name).read_text())
        prefix = name.split("_")[0]
        ren_sp = {k: f"{prefix}.{k}" for k in doc["spaces"]}
        ren_sq = {k: f"{prefix}.{k}" for k in doc["sequences"]}
        merged["budget"] = doc.get("budget", {})
        merged["spaces"].update({ren_sp[k]: v for k, v in doc["spaces"].items()})
        merged["sequences"].update({ren_sq[k]: v for k, v in doc["sequences"].items()})
        for t in doc["tasks"]:
            t = dict(t)
            for key in ("space", "source", "target"):
                if key in t:
                    t[key] = ren_sp[t[key]]
            for key in ("sequence", "dominant", "x"):
                if key in t:
                    t[key] = ren_sq[t[key]]
            merged["tasks"].append(t)
    return merged


def _write(data: bytes, out: Optional[str]):
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _budget_args(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("json", "text", "csv"), default="json")
    p.add_argument("--budget-N", dest="N", type=int, help="prefix length scanned per check")
    p.add_argument("--kmax", type=int, help="largest seminorm index k checked")
    p.add_argument("--mmax", type=int, help="largest index m searched for witnesses")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--timings", action="store_true", help="record per-task wall time")


def _report(inst, args) -> Report:
    budget = with_overrides(inst.budget, N=args.N, kmax=args.kmax, mmax=args.mmax)
    return run_tasks(inst, budget, timings=args.timings)


def _sequence_arg(raw: str):
    """A sequence given inline as JSON or as a path to a JSON file."""
    path = Path(raw)
    text = path.read_text() if path.is_file() else raw
    try:
        return sequence_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{raw}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InstanceError(f"{raw}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="koethe-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"koethe-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the tasks of an instance file")
    run.add_argument("file")
    _budget_args(run)

    conv = sub.add_parser("convolve", help="first N entries of the Cauchy product theta * x")
    conv.add_argument("--theta", required=True, help="JSON sequence, inline or a file path")
    conv.add_argument("--x", required=True, help="JSON sequence, inline or a file path")
    conv.add_argument("-N", type=int, required=True)
    conv.add_argument("--format", choices=("json", "text"), default="text")

    suite = sub.add_parser("suite", help="run the shipped curated instances")
    _budget_args(suite)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    try:
        if args.command == "convolve":
            if args.N < 1:
                raise InstanceError("-N must be >= 1")
            values = apply_T(_sequence_arg(args.theta), _sequence_arg(args.x), args.N).values
            if args.format == "json":
                data = json.dumps([v.to_dict() for v in values], indent=2) + "\n"
            else:
                data = "\n".join(f"{n} {v.decimal()}" for n, v in enumerate(values, 1)) + "\n"
            _write(data.encode(), None)
            return 0
        if args.command == "run":
            inst = parse_instance(args.file)
        else:
            inst = parse_document(suite_document(), "<suite>")
        report = _report(inst, args)
    except (InstanceError, ValueError) as exc:
        print(f"koethe-lab: error: {exc}", file=sys.stderr)
        return 1
    _write(emit_report(report, args.format), args.out)
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
