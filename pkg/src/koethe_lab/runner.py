"""Executing the tasks of an instance file."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional

from . import __version__
from .instance import InstanceFile, Task
from .koethe import (
    check_dual_membership,
    check_G1,
    check_Ginf,
    check_inclusion,
    check_koethe_axioms,
    check_membership,
    check_nuclear,
)
from .operators import (
    ContinuityReport,
    Direction,
    DominationError,
    SpaceInstance,
    apply_T,
    continuity_certificate,
    normality_transfer,
    verify_theorem1,
    verify_theorem2,
)
from .report import Report, Row, TaskResult
from .verdicts import BoundPair, Budget, DivergenceTrace, Status, Verdict, Violation

# tasks whose verdict is a conjunction over k = 1..kmax
PER_K = {"nuclear", "g1", "ginf", "inclusion", "membership", "certify", "theorem1", "theorem2", "normality"}


def thread_count() -> int:
    raw = os.environ.get("KOETHE_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _rows(op: str, v: Verdict, kmax: Optional[int]) -> list[Row]:
    if op not in PER_K or not kmax:
        w = next((w for w in v.witnesses if isinstance(w, BoundPair)), None)
        if w is not None and op in ("dual",):
            return [Row(w.k, v.status.value, None, w.C.log, w.verified_up_to)]
        return [Row(None, v.status.value)]
    by_k: dict[int, Row] = {}
    for w in v.witnesses:
        if isinstance(w, BoundPair):
            by_k.setdefault(w.k, Row(w.k, "Holds", w.m, w.C.log, w.verified_up_to))
        elif isinstance(w, DivergenceTrace) and v.status is Status.FAILS:
            by_k.setdefault(w.k, Row(w.k, "Fails", w.m))
        elif isinstance(w, Violation) and w.k >= 1 and v.status is Status.FAILS:
            by_k.setdefault(w.k, Row(w.k, "Fails"))
    if v.status is Status.FAILS and not by_k:
        return [Row(None, "Fails")]
    return [by_k.get(k, Row(k, "Inconclusive")) for k in range(1, kmax + 1)]


def _from_verdict(task: Task, v: Verdict, **extra) -> TaskResult:
    kmax = v.budget_used.get("kmax")
    return TaskResult(
        task.id, task.op, v.status.value, list(v.witnesses), dict(v.budget_used),
        list(v.notes), _rows(task.op, v, kmax), **extra,
    )


def _instance(inst: InstanceFile, p: dict, direction: Direction, theta_key="sequence") -> SpaceInstance:
    return SpaceInstance(
        inst.spaces[p["source"]], inst.spaces[p["target"]], inst.sequences[p[theta_key]],
        direction, p.get("normalize"), name=p[theta_key],
    )


def _direction(p: dict) -> Direction:
    return Direction.TRANSPOSE if p.get("direction") == "transpose" else Direction.FORWARD


def _theorem(si: SpaceInstance, budget: Budget) -> ContinuityReport:
    fn = verify_theorem1 if si.direction is Direction.FORWARD else verify_theorem2
    return fn(si, budget)


def _theorem_result(task: Task, r: ContinuityReport) -> TaskResult:
    details = {
        "condition_i": r.condition_i.status.value,
        "condition_ii": r.condition_ii.status.value,
        "preconditions": {k: v.status.value for k, v in r.preconditions.items()},
    }
    if r.oracle is not None:
        details["oracle"] = dict(r.oracle)
    res = _from_verdict(task, r.certificate, agreement=r.agreement.value, details=details)
    res.notes.extend(r.flags)
    return res


def run_task(task: Task, inst: InstanceFile, budget: Budget) -> TaskResult:
    p = task.params
    op = task.op
    if op == "axioms":
        v = check_koethe_axioms(inst.spaces[p["space"]], N=budget.N, K=budget.kmax, extra=p.get("extra"))
        return _from_verdict(task, v)
    if op == "nuclear":
        return _from_verdict(task, check_nuclear(inst.spaces[p["space"]], budget))
    if op == "g1":
        return _from_verdict(task, check_G1(inst.spaces[p["space"]], budget))
    if op == "ginf":
        return _from_verdict(task, check_Ginf(inst.spaces[p["space"]], budget, bool(p.get("normalize", False))))
    if op == "inclusion":
        return _from_verdict(task, check_inclusion(inst.spaces[p["source"]], inst.spaces[p["target"]], budget))
    if op == "membership":
        return _from_verdict(task, check_membership(inst.sequences[p["sequence"]], inst.spaces[p["space"]], budget))
    if op == "dual":
        return _from_verdict(task, check_dual_membership(inst.sequences[p["sequence"]], inst.spaces[p["space"]], budget))
    if op == "certify":
        return _from_verdict(task, continuity_certificate(_instance(inst, p, _direction(p)), budget))
    if op == "theorem1":
        return _theorem_result(task, verify_theorem1(_instance(inst, p, Direction.FORWARD), budget))
    if op == "theorem2":
        return _theorem_result(task, verify_theorem2(_instance(inst, p, Direction.TRANSPOSE), budget))
    if op == "normality":
        report = _theorem(_instance(inst, p, _direction(p), theta_key="dominant"), budget)
        if report.status is not Status.HOLDS:
            v = Verdict(Status.INCONCLUSIVE, [], budget.to_dict(),
                        [f"dominant sequence certificate is {report.status.value}"])
            return _from_verdict(task, v)
        try:
            v = normality_transfer(inst.sequences[p["sequence"]], inst.sequences[p["dominant"]], report, budget)
        except DominationError as exc:
            v = Verdict(Status.FAILS, [Violation(exc.index, 0, "|theta_n| <= |eta_n|")], budget.to_dict())
        v.budget_used.setdefault("kmax", budget.kmax)
        return _from_verdict(task, v)
    if op == "convolve":
        N = int(p["N"])
        values = list(apply_T(inst.sequences[p["sequence"]], inst.sequences[p["x"]], N).values)
        return TaskResult(task.id, op, "Computed", [], {"N": N}, [], [Row(None, "Computed")], values=values)
    raise ValueError(f"unknown op {op!r}")


def _guarded(task: Task, inst: InstanceFile, budget: Budget, timings: bool) -> TaskResult:
    t0 = time.perf_counter()
    try:
        res = run_task(task, inst, budget)
    except Exception as exc:  # captured per task, never fatal to the run
        res = TaskResult(task.id, task.op, "Error", [], budget.to_dict(), [], [Row(None, "Error")],
                         error=f"{type(exc).__name__}: {exc}")
    if timings:
        res.wall_time = round(time.perf_counter() - t0, 6)
    return res


def run_tasks(inst: InstanceFile, budget: Optional[Budget] = None, threads: Optional[int] = None,
              timings: bool = False) -> Report:
    """Run every task; results keep declaration order whatever the scheduling."""
    budget = budget or inst.budget
    threads = threads or thread_count()
    if threads <= 1 or len(inst.tasks) <= 1:
        results = [_guarded(t, inst, budget, timings) for t in inst.tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _guarded(t, inst, budget, timings), inst.tasks))
    return Report(__version__, inst.hash, results, budget.to_dict())


def with_overrides(budget: Budget, **kw) -> Budget:
    return replace(budget, **{k: v for k, v in kw.items() if v is not None})
