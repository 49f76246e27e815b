"""Three-valued verdicts, witnesses and the finite-budget scans behind them.

Asymptotic statements ("sup_n r_n < inf", "sum_n t_n < inf") are judged from
the first ``N`` terms plus a handful of far-out probe points ``N * 2**p``.
A scan only answers Holds or Fails when the trailing window and the probes
agree; everything else is Inconclusive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .seqcore import ZERO, SignedLogValue, log_sum_array

#: a scan step counts as growth when consecutive terms rise by this factor
STEP_GROWTH = math.log1p(1e-6)
#: slack for "no increase" comparisons in the log domain
LOG_TOL = 1e-12
#: power-law tails need an exponent at least this far above 1
POWER_MARGIN = 1e-3
#: ratio domination needs consecutive ratios at most 1 - 1e-3
RATIO_MAX = math.log1p(-1e-3)


class Status(str, enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


def combine_all(statuses) -> Status:
    """Conjunction of three-valued statuses."""
    statuses = list(statuses)
    if any(s is Status.FAILS for s in statuses):
        return Status.FAILS
    if all(s is Status.HOLDS for s in statuses):
        return Status.HOLDS
    return Status.INCONCLUSIVE


@dataclass(frozen=True)
class Budget:
    N: int = 2000
    kmax: int = 8
    mmax: int = 32
    jmax: int = 32
    window: float = 0.25
    probes: int = 20

    def __post_init__(self):
        for name in ("N", "kmax", "mmax", "jmax"):
            if getattr(self, name) < 1:
                raise ValueError(f"budget {name} must be positive")
        if not 0 < self.window < 1:
            raise ValueError("budget window must lie in (0, 1)")
        if self.probes < 0:
            raise ValueError("budget probes must be >= 0")

    def window_start(self, N: Optional[int] = None) -> int:
        """First (1-based) index of the trailing window for a scan of length N."""
        N = self.N if N is None else N
        return max(2, N - int(self.window * N)) if N >= 2 else 1

    def probe_points(self, N: Optional[int] = None, count: Optional[int] = None) -> np.ndarray:
        N = self.N if N is None else N
        count = self.probes if count is None else count
        return np.array([float(N) * 2.0**p for p in range(1, count + 1)])

    def to_dict(self):
        return asdict(self)


DEFAULT_BUDGET = Budget()


@dataclass(frozen=True)
class TailArgument:
    """Why a finite scan speaks for the infinite sum or sup.

    kind is one of ``ratio`` (consecutive ratios <= r from N0 on),
    ``power`` (terms decay at least like n**-r from N0 on), ``dominated``
    (trailing terms and probes never exceed the attained maximum),
    ``dyadic`` (rises between points N * 2**p shrink geometrically),
    ``symbolic`` (a closed-form rule, e.g. finite support) or ``none``.
    """

    kind: str = "none"
    N0: Optional[int] = None
    r: Optional[float] = None
    rule: Optional[str] = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


NO_TAIL = TailArgument()


@dataclass(frozen=True)
class BoundPair:
    """Witness that lhs_k(n) <= C * rhs_m(n) for every n <= verified_up_to."""

    k: int
    m: Optional[int]
    C: SignedLogValue
    verified_up_to: int
    tail: TailArgument = NO_TAIL
    relation: str = ""

    kind = "bound"

    def to_dict(self):
        return {
            "kind": "bound",
            "relation": self.relation,
            "k": self.k,
            "m": self.m,
            "C": self.C.to_dict(),
            "verified_up_to": self.verified_up_to,
            "tail": self.tail.to_dict(),
        }


@dataclass(frozen=True)
class DivergenceTrace:
    """Indices and log-values of a quantity that kept growing over the window."""

    k: int
    indices: tuple
    values: tuple
    m: Optional[int] = None
    relation: str = ""

    kind = "divergence"

    def to_dict(self):
        return {
            "kind": "divergence",
            "relation": self.relation,
            "k": self.k,
            "m": self.m,
            "indices": list(self.indices),
            "values": list(self.values),
        }


@dataclass(frozen=True)
class Violation:
    """A finite axiom failing at a concrete (n, k)."""

    n: int
    k: int
    condition: str

    kind = "violation"

    def to_dict(self):
        return {"kind": "violation", "n": self.n, "k": self.k, "condition": self.condition}


Witness = Union[BoundPair, DivergenceTrace, Violation]


def witness_from_dict(d: dict) -> Witness:
    kind = d["kind"]
    if kind == "bound":
        return BoundPair(
            d["k"], d.get("m"), SignedLogValue.from_dict(d["C"]), d["verified_up_to"],
            TailArgument.from_dict(d.get("tail", {})), d.get("relation", ""),
        )
    if kind == "divergence":
        return DivergenceTrace(
            d["k"], tuple(d["indices"]), tuple(float(v) for v in d["values"]), d.get("m"), d.get("relation", "")
        )
    if kind == "violation":
        return Violation(d["n"], d["k"], d["condition"])
    raise ValueError(f"unknown witness kind {kind!r}")


@dataclass
class Verdict:
    status: Status
    witnesses: list = field(default_factory=list)
    budget_used: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def bound_pairs(self) -> list[BoundPair]:
        return [w for w in self.witnesses if isinstance(w, BoundPair)]

    def to_dict(self):
        return {
            "status": self.status.value,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "budget_used": dict(self.budget_used),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            Status(d["status"]),
            [witness_from_dict(w) for w in d.get("witnesses", [])],
            dict(d.get("budget_used", {})),
            list(d.get("notes", [])),
        )


@dataclass(frozen=True)
class CertifiedValue:
    """A sum or sup whose true value lies in [value, value + tail_bound].

    When ``tail.kind == "none"`` the value is only a lower bound; ``divergent``
    marks a scan that saw the quantity grow without bound.
    """

    value: SignedLogValue
    tail_bound: SignedLogValue = ZERO
    tail: TailArgument = NO_TAIL
    divergent: bool = False
    trace: Optional[tuple] = None

    @property
    def certified(self) -> bool:
        return self.tail.kind != "none" and not self.divergent

    @property
    def upper(self) -> SignedLogValue:
        return self.value + self.tail_bound


# ---------------------------------------------------------------------------
# scans

ProbeFn = Optional[Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Scan:
    status: Status
    sup_log: float
    argmax: int
    trace: Optional[tuple] = None  # (indices, log values)
    kind: str = "dominated"


#: dyadic increments must shrink at least by this factor to extrapolate
DYADIC_RATIO = 0.75


def _dyadic_bound(logs: np.ndarray, probes: Optional[np.ndarray]) -> Optional[float]:
    """Upper bound for a slowly rising sequence from its values at N/4, N/2, N, 2N, ...

    When the rises between consecutive dyadic points shrink geometrically
    with ratio <= DYADIC_RATIO, the remaining rise is at most
    last_rise * rho / (1 - rho).
    """
    N = logs.size
    if probes is None or probes.size < 2 or N < 8:
        return None
    pts = np.concatenate(([logs[N // 4 - 1], logs[N // 2 - 1], logs[N - 1]], probes))
    if not np.all(np.isfinite(pts)):
        return None
    rises = np.maximum(np.diff(pts), 0.0)
    floor = LOG_TOL * max(1.0, float(np.abs(pts).max()))
    rises = np.where(rises <= floor, 0.0, rises)
    for a, b in zip(rises[:-1], rises[1:]):
        if b > DYADIC_RATIO * a and b > 0:
            return None
    last = rises[-1]
    return float(max(logs.max(), pts.max())) + last * DYADIC_RATIO / (1 - DYADIC_RATIO) + floor


def _strictly_growing(tail: np.ndarray, probes: Optional[np.ndarray]) -> bool:
    if tail.size < 2 or not np.all(np.isfinite(tail)):
        return False
    if np.diff(tail).min() < STEP_GROWTH:
        return False
    if probes is not None and probes.size:
        if not np.all(np.isfinite(probes)):
            return bool(np.all(probes == np.inf))
        seq = np.concatenate(([tail[-1]], probes))
        if np.diff(seq).min() <= 0:
            return False
    return True


def bounded_scan(logs: np.ndarray, probes: Optional[np.ndarray], budget: Budget) -> Scan:
    """Decide ``sup_n exp(logs[n]) < inf`` from a prefix and probe values.

    Holds when neither the trailing window nor any probe exceeds the maximum
    already attained before the window, or when the rises between dyadic
    points shrink geometrically; Fails when every step of the window grows by
    a factor >= 1 + 1e-6 and the probes keep growing.
    """
    logs = np.asarray(logs, dtype=float)
    N = logs.size
    if N == 0:
        return Scan(Status.HOLDS, -math.inf, 0)
    n0 = budget.window_start(N)
    head, tail = logs[: n0 - 1], logs[n0 - 1 :]
    argmax = int(np.argmax(logs))
    top = float(logs[argmax])
    if top == math.inf:
        return Scan(Status.FAILS, top, argmax + 1, (tuple(range(n0, N + 1)), tuple(tail.tolist())))
    hmax = float(head.max()) if head.size else -math.inf
    tol = LOG_TOL * max(1.0, abs(hmax)) if math.isfinite(hmax) else 0.0
    ok_tail = tail.max() <= hmax + tol or (not head.size)
    ok_probes = probes is None or probes.size == 0 or float(np.max(probes)) <= max(hmax, top) + tol
    if ok_tail and ok_probes:
        return Scan(Status.HOLDS, top, argmax + 1)
    # a rise that levels off geometrically is bounded, however steady it looks
    bound = _dyadic_bound(logs, probes)
    if bound is not None:
        return Scan(Status.HOLDS, bound, argmax + 1, kind="dyadic")
    if _strictly_growing(tail, probes):
        return Scan(Status.FAILS, top, argmax + 1, (tuple(range(n0, N + 1)), tuple(tail.tolist())))
    return Scan(Status.INCONCLUSIVE, top, argmax + 1)


def certify_sup(
    logs: np.ndarray,
    probe_fn: ProbeFn,
    budget: Budget,
    support: Optional[int] = None,
) -> CertifiedValue:
    """Certified ``sup_n exp(logs[n-1])`` over all n >= 1."""
    logs = np.asarray(logs, dtype=float)
    N = logs.size
    top = float(logs.max()) if N else -math.inf
    value = SignedLogValue.from_log(top)
    if support is not None and support <= N:
        return CertifiedValue(value, ZERO, TailArgument("symbolic", rule="finite-support"))
    probes = probe_fn(budget.probe_points(N)) if probe_fn is not None else None
    scan = bounded_scan(logs, probes, budget)
    n0 = budget.window_start(N)
    if scan.status is Status.HOLDS:
        tail = logs[n0 - 1 :]
        d = np.diff(tail) if tail.size > 1 and np.all(np.isfinite(tail)) else np.array([])
        if scan.kind == "dyadic":
            extra = SignedLogValue.from_log(scan.sup_log) - value
            return CertifiedValue(value, extra, TailArgument("dyadic", N0=n0))
        if d.size and d.max() <= 0:
            arg = TailArgument("ratio", N0=n0, r=math.exp(float(d.max())))
        else:
            arg = TailArgument("dominated", N0=n0)
        return CertifiedValue(value, ZERO, arg)
    if scan.status is Status.FAILS:
        return CertifiedValue(value, ZERO, NO_TAIL, divergent=True, trace=scan.trace)
    return CertifiedValue(value)


def certify_series(
    logs: np.ndarray,
    probe_fn: ProbeFn,
    budget: Budget,
    support: Optional[int] = None,
) -> CertifiedValue:
    """Certified ``sum_n exp(logs[n-1])`` of non-negative terms over all n >= 1."""
    logs = np.asarray(logs, dtype=float)
    N = logs.size
    value = log_sum_array(logs)
    if support is not None and support <= N:
        return CertifiedValue(value, ZERO, TailArgument("symbolic", rule="finite-support"))
    n0 = budget.window_start(N)
    tail = logs[n0 - 1 :]
    if tail.size < 2 or not np.all(np.isfinite(tail)):
        return CertifiedValue(value)
    d = np.diff(tail)
    pts = budget.probe_points(N) if probe_fn is not None else np.array([])
    pvals = probe_fn(pts) if pts.size else np.array([])
    last = float(logs[-1])

    rlog = float(d.max())
    if pts.size:
        rlog = max(rlog, float(np.max(probe_fn(pts + 1.0) - pvals)))
    if rlog <= RATIO_MAX:
        r = math.exp(rlog)
        bound = SignedLogValue.from_log(last + rlog - math.log1p(-r))
        return CertifiedValue(value, bound, TailArgument("ratio", N0=n0, r=r))

    if d.max() <= 0:
        ns = np.arange(n0 + 1, N + 1, dtype=float)
        slopes = -(tail[1:] - tail[0]) / (np.log(ns) - math.log(n0))
        p = float(slopes.min())
        if pts.size:
            p = min(p, float(np.min(-(probe_fn(2.0 * pts) - pvals) / math.log(2.0))))
            if float(np.max(pvals)) > last:
                p = -math.inf
        if p > 1 + POWER_MARGIN:
            # t_n <= t_N (N/n)^p for n > N  =>  tail <= t_N * N / (p - 1)
            bound = SignedLogValue.from_log(last + math.log(N) - math.log(p - 1))
            return CertifiedValue(value, bound, TailArgument("power", N0=n0, r=p))

    if d.min() >= 0 and (not pts.size or float(np.min(pvals)) >= last):
        # terms do not tend to zero: partial sums grow by at least t_{N0} per step
        partial = np.logaddexp.accumulate(logs)[n0 - 1 :]
        return CertifiedValue(
            value, ZERO, NO_TAIL, divergent=True,
            trace=(tuple(range(n0, N + 1)), tuple(partial.tolist())),
        )
    return CertifiedValue(value)
