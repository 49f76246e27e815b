"""Koethe matrices, certified seminorms and the structural predicates.

A Koethe matrix is stored through its logarithm: ``log_col(k, ns)`` returns
``log a_n^k`` for an array of row indices.  Entries are strictly positive
(zero weights are not supported).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exponents import ExponentSequence, exponent_from_dict
from .exprs import compile_expression
from .seqcore import ScalarSequence, SignedLogValue
from .verdicts import (
    DEFAULT_BUDGET,
    BoundPair,
    Budget,
    CertifiedValue,
    DivergenceTrace,
    Scan,
    Status,
    TailArgument,
    Verdict,
    Violation,
    bounded_scan,
    certify_series,
    certify_sup,
    combine_all,
)


class GridRangeError(IndexError):
    """Access outside the grid of a tabulated Koethe matrix."""


class KoetheMatrix:
    #: number of rows / columns available, ``None`` for unbounded
    n_max: Optional[int] = None
    k_max: Optional[int] = None

    def log_col(self, k: int, ns) -> np.ndarray:
        raise NotImplementedError

    @property
    def probeable(self) -> bool:
        return self.n_max is None

    def entry(self, n: int, k: int) -> SignedLogValue:
        return entry(self, n, k)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class InfiniteType(KoetheMatrix):
    """a_n^k = exp(k * alpha_n); normalised: exp((k - 1) * alpha_n)."""

    alpha: ExponentSequence
    normalized: bool = False

    def log_col(self, k, ns):
        return (k - (1 if self.normalized else 0)) * self.alpha.values(ns)

    @property
    def probeable(self):
        return self.alpha.unbounded_domain

    def to_dict(self):
        return {"class": "infinite", "alpha": self.alpha.to_dict(), "normalized": self.normalized}


@dataclass(frozen=True)
class FiniteType(KoetheMatrix):
    """a_n^k = exp(-alpha_n / k)"""

    alpha: ExponentSequence

    def log_col(self, k, ns):
        return -self.alpha.values(ns) / k

    @property
    def probeable(self):
        return self.alpha.unbounded_domain

    def to_dict(self):
        return {"class": "finite", "alpha": self.alpha.to_dict()}


@dataclass(frozen=True)
class ExpressionMatrix(KoetheMatrix):
    """a_n^k from an expression in ``n`` and ``k`` (``log=True``: the log of it)."""

    expr: str
    log: bool = False
    _fn: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", compile_expression(self.expr, ("n", "k")))

    def log_col(self, k, ns):
        ns = np.asarray(ns, dtype=float)
        v = np.broadcast_to(self._fn(n=ns, k=float(k)), ns.shape).astype(float)
        if self.log:
            return v
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), np.nan)

    def to_dict(self):
        return {"class": "expression", "expr": self.expr, "log": self.log}


@dataclass(frozen=True)
class Tabulated(KoetheMatrix):
    """Finite grid of entries; ``grid[n-1][k-1] = a_n^k``."""

    grid: tuple

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.grid)
        if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("tabulated grid must be a non-empty rectangle")
        object.__setattr__(self, "grid", rows)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_logs", np.log(np.array(rows)))

    @property
    def n_max(self):
        return len(self.grid)

    @property
    def k_max(self):
        return len(self.grid[0])

    def log_col(self, k, ns):
        idx = np.asarray(ns, dtype=np.int64)
        if not 1 <= k <= self.k_max or (idx.size and (idx.min() < 1 or idx.max() > self.n_max)):
            raise GridRangeError(
                f"tabulated matrix is {self.n_max}x{self.k_max}; asked for k={k}, "
                f"n up to {int(idx.max()) if idx.size else 0}"
            )
        return self._logs[idx - 1, k - 1]

    def to_dict(self):
        return {"class": "tabulated", "grid": [list(r) for r in self.grid]}


@dataclass(frozen=True)
class Normalized(KoetheMatrix):
    """Row-wise division by the first row: a_n^k / a_n^1."""

    base: KoetheMatrix

    @property
    def n_max(self):
        return self.base.n_max

    @property
    def k_max(self):
        return self.base.k_max

    @property
    def probeable(self):
        return self.base.probeable

    def log_col(self, k, ns):
        return self.base.log_col(k, ns) - self.base.log_col(1, ns)

    def to_dict(self):
        return {"class": "normalized", "base": self.base.to_dict()}


def normalize(A: KoetheMatrix) -> KoetheMatrix:
    """First-row normalisation used to read infinite type matrices as G-infinity sets."""
    if isinstance(A, InfiniteType):
        return InfiniteType(A.alpha, normalized=True)
    if isinstance(A, Normalized):
        return A
    return Normalized(A)


def matrix_from_dict(d: dict) -> KoetheMatrix:
    cls = d.get("class")
    if cls == "infinite":
        return InfiniteType(exponent_from_dict(d["alpha"]), bool(d.get("normalized", False)))
    if cls == "finite":
        return FiniteType(exponent_from_dict(d["alpha"]))
    if cls == "expression":
        return ExpressionMatrix(d["expr"], bool(d.get("log", False)))
    if cls == "tabulated":
        return Tabulated(tuple(tuple(r) for r in d["grid"]))
    if cls == "normalized":
        return normalize(matrix_from_dict(d["base"]))
    raise ValueError(f"unknown space class {cls!r}")


def entry(A: KoetheMatrix, n: int, k: int) -> SignedLogValue:
    if n < 1 or k < 1:
        raise ValueError("Koethe matrix indices start at 1")
    return SignedLogValue.from_log(float(A.log_col(k, np.array([n], dtype=float))[0]))


def _rows(N: int) -> np.ndarray:
    return np.arange(1, N + 1, dtype=float)


def _extent(A: KoetheMatrix, budget: Budget) -> tuple[int, int]:
    N = budget.N if A.n_max is None else min(budget.N, A.n_max)
    K = budget.kmax if A.k_max is None else min(budget.kmax, A.k_max)
    return N, K


def _cols(A: KoetheMatrix, limit: int) -> int:
    return limit if A.k_max is None else min(limit, A.k_max)


def _used(budget: Budget, **extra) -> dict:
    d = budget.to_dict()
    d.update(extra)
    return d


# ---------------------------------------------------------------------------
# axioms


def check_koethe_axioms(A: KoetheMatrix, N: int = 100, K: int = 10, extra: Optional[str] = None) -> Verdict:
    """Positivity and k-monotonicity on the n <= N, k <= K corner.

    ``extra`` may be ``"g1"`` or ``"ginf"`` to also test condition (1) of the
    corresponding smooth sequence space definition.
    """
    if N < 1 or K < 1:
        raise ValueError("N and K must be positive")
    if A.n_max is not None:
        N = min(N, A.n_max)
    if A.k_max is not None:
        K = min(K, A.k_max)
    ns = _rows(N)
    top = K + 1 if A.k_max is None else min(K + 1, A.k_max)
    cols = [A.log_col(k, ns) for k in range(1, top + 1)]
    for k, col in enumerate(cols, 1):
        bad = np.nonzero(~(col > -np.inf))[0]
        if bad.size:
            return Verdict(Status.FAILS, [Violation(int(bad[0]) + 1, k, "a_n^k > 0")], {"N": N, "K": K})
    for k in range(1, len(cols)):
        bad = np.nonzero(cols[k - 1] > cols[k])[0]
        if bad.size:
            return Verdict(
                Status.FAILS, [Violation(int(bad[0]) + 1, k, "a_n^k <= a_n^(k+1)")], {"N": N, "K": K}
            )
    if extra == "g1":
        v = _g1_condition_one(A, N, K)
        if v is not None:
            return Verdict(Status.FAILS, [v], {"N": N, "K": K})
    elif extra == "ginf":
        v = _ginf_condition_one(A, N, K)
        if v is not None:
            return Verdict(Status.FAILS, [v], {"N": N, "K": K})
    return Verdict(Status.HOLDS, [], {"N": N, "K": K})


def _g1_condition_one(B, N, K) -> Optional[Violation]:
    ns = _rows(N)
    for k in range(1, K + 1):
        col = B.log_col(k, ns)
        bad = np.nonzero(col >= 0)[0]
        if bad.size:
            return Violation(int(bad[0]) + 1, k, "b_n^k < 1")
        bad = np.nonzero(np.diff(col) > 0)[0]
        if bad.size:
            return Violation(int(bad[0]) + 1, k, "b_(n+1)^k <= b_n^k")
    return None


def _ginf_condition_one(A, N, K) -> Optional[Violation]:
    ns = _rows(N)
    first = A.log_col(1, ns)
    bad = np.nonzero(first != 0)[0]
    if bad.size:
        return Violation(int(bad[0]) + 1, 1, "a_n^1 = 1")
    for k in range(1, K + 1):
        bad = np.nonzero(np.diff(A.log_col(k, ns)) < 0)[0]
        if bad.size:
            return Violation(int(bad[0]) + 1, k, "a_n^k <= a_(n+1)^k")
    return None


# ---------------------------------------------------------------------------
# seminorms


def _terms(A: KoetheMatrix, k: int, x: ScalarSequence, N: int):
    ns = _rows(N)
    lx = x.log_abs(ns)
    la = A.log_col(k, ns)
    with np.errstate(invalid="ignore"):
        t = np.where(lx == -np.inf, -np.inf, lx + la)

    def probe(pts):
        with np.errstate(invalid="ignore"):
            px = x.log_abs(pts)
            return np.where(px == -np.inf, -np.inf, px + A.log_col(k, pts))

    usable = A.probeable and x.probeable
    return t, (probe if usable else None)


def seminorm_l1(A: KoetheMatrix, k: int, x: ScalarSequence, budget: Budget = DEFAULT_BUDGET) -> CertifiedValue:
    """||x||_k = sum_n |x_n| a_n^k with a certified tail."""
    N, _ = _extent(A, budget)
    t, probe = _terms(A, k, x, N)
    return certify_series(t, probe, budget, x.support())


def seminorm_sup(A: KoetheMatrix, k: int, x: ScalarSequence, budget: Budget = DEFAULT_BUDGET) -> CertifiedValue:
    """sup_n |x_n| a_n^k, certified when the terms are eventually dominated."""
    N, _ = _extent(A, budget)
    t, probe = _terms(A, k, x, N)
    return certify_sup(t, probe, budget, x.support())


# ---------------------------------------------------------------------------
# existential searches


def _search(k, candidates, ratio_fn, probe_fn, budget, relation, N) -> tuple[Status, object]:
    """Smallest candidate index whose ratio sequence is bounded.

    Returns (status, witness): Holds with a BoundPair, Fails when every
    candidate diverges (trace of the last one), Inconclusive otherwise.
    """
    last_trace = None
    all_fail = True
    for m in candidates:
        logs = ratio_fn(m)
        probes = probe_fn(m) if probe_fn is not None else None
        scan: Scan = bounded_scan(logs, probes, budget)
        if scan.status is Status.HOLDS:
            C = SignedLogValue.from_log(scan.sup_log)
            return Status.HOLDS, BoundPair(
                k, m, C, N, TailArgument(scan.kind, N0=budget.window_start(N)), relation
            )
        if scan.status is Status.FAILS:
            last_trace = DivergenceTrace(k, scan.trace[0], scan.trace[1], m, relation)
        else:
            all_fail = False
    if all_fail and last_trace is not None:
        return Status.FAILS, last_trace
    return Status.INCONCLUSIVE, None


def _aggregate(per_k: list[tuple[Status, object]], used: dict, notes=None) -> Verdict:
    status = combine_all(s for s, _ in per_k)
    witnesses = [w for _, w in per_k if w is not None]
    if status is Status.FAILS:
        # lead with the failing traces
        witnesses = [w for w in witnesses if not isinstance(w, BoundPair)] + [
            w for w in witnesses if isinstance(w, BoundPair)
        ]
    return Verdict(status, witnesses, used, list(notes or []))


def check_inclusion(A: KoetheMatrix, B: KoetheMatrix, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """lambda(A) in lambda(B): for each k some m, C with b_n^k <= C a_n^m."""
    NA, _ = _extent(A, budget)
    NB, K = _extent(B, budget)
    N = min(NA, NB)
    ns = _rows(N)
    pts = budget.probe_points(N)
    probeable = A.probeable and B.probeable
    M = _cols(A, budget.mmax)
    per_k = []
    for k in range(1, K + 1):
        lb = B.log_col(k, ns)
        pb = B.log_col(k, pts) if probeable else None
        per_k.append(
            _search(
                k, range(1, M + 1),
                lambda m: lb - A.log_col(m, ns),
                (lambda m: pb - A.log_col(m, pts)) if probeable else None,
                budget, "inclusion", N,
            )
        )
    return _aggregate(per_k, _used(budget, N=N, kmax=K, mmax=M))


def check_dual_membership(theta: ScalarSequence, A: KoetheMatrix, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """theta in lambda(A)': some k, C with |theta_n| <= C a_n^k."""
    N, K = _extent(A, budget)
    ns = _rows(N)
    lt = theta.log_abs(ns)
    probeable = A.probeable and theta.probeable
    pts = budget.probe_points(N)
    pt = theta.log_abs(pts) if probeable else None

    def ratio(k):
        with np.errstate(invalid="ignore"):
            return np.where(lt == -np.inf, -np.inf, lt - A.log_col(k, ns))

    def pratio(k):
        with np.errstate(invalid="ignore"):
            return np.where(pt == -np.inf, -np.inf, pt - A.log_col(k, pts))

    if theta.support() is not None and theta.support() <= N:
        pratio_fn = None
    else:
        pratio_fn = pratio if probeable else None
    status, w = _search(0, range(1, K + 1), ratio, pratio_fn, budget, "dual", N)
    if isinstance(w, BoundPair):
        w = BoundPair(w.m, None, w.C, w.verified_up_to, w.tail, "dual")
    elif isinstance(w, DivergenceTrace):
        w = DivergenceTrace(w.m, w.indices, w.values, None, "dual")
    return Verdict(status, [w] if w is not None else [], _used(budget, N=N, kmax=K))


def check_membership(theta: ScalarSequence, B: KoetheMatrix, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """theta in lambda(B): every seminorm sum_n |theta_n| b_n^k certifies finite."""
    N, K = _extent(B, budget)
    per_k = []
    for k in range(1, K + 1):
        cv = seminorm_l1(B, k, theta, budget)
        if cv.certified:
            per_k.append((Status.HOLDS, BoundPair(k, None, cv.upper, N, cv.tail, "membership")))
        elif cv.divergent:
            idx, vals = cv.trace
            per_k.append((Status.FAILS, DivergenceTrace(k, idx, vals, None, "membership")))
        else:
            per_k.append((Status.INCONCLUSIVE, None))
    return _aggregate(per_k, _used(budget, N=N, kmax=K))


def check_nuclear(A: KoetheMatrix, budget: Budget = DEFAULT_BUDGET, use_symbolic: bool = True) -> Verdict:
    """Grothendieck-Pietsch: for each k some m with sum_n a_n^k / a_n^m < inf.

    Numeric scans certify convergence; a numeric Fails needs the ratio terms
    to stop decaying for every m tried.  When the matrix is in the symbolic
    grammar its exact verdict settles what the scan leaves open.
    """
    N, K = _extent(A, budget)
    ns = _rows(N)
    M = _cols(A, budget.mmax)
    per_k = []
    partial = []
    for k in range(1, K + 1):
        la = A.log_col(k, ns)
        found = None
        traces = []
        for m in range(k, M + 1):
            t = la - A.log_col(m, ns)
            probe = (lambda pts, m=m: A.log_col(k, pts) - A.log_col(m, pts)) if A.probeable else None
            cv = certify_series(t, probe, budget)
            if cv.certified:
                found = BoundPair(k, m, cv.upper, N, cv.tail, "nuclear")
                break
            if cv.divergent:
                traces.append(DivergenceTrace(k, cv.trace[0], cv.trace[1], m, "nuclear"))
        if found is not None:
            per_k.append((Status.HOLDS, found))
        elif traces and len(traces) == M - k + 1:
            per_k.append((Status.FAILS, traces[-1]))
        else:
            per_k.append((Status.INCONCLUSIVE, None))
            if traces:
                partial.append(traces[0])
    verdict = _aggregate(per_k, _used(budget, N=N, kmax=K, mmax=M))
    if use_symbolic and verdict.status is not Status.HOLDS:
        from . import symbolic

        try:
            exact = symbolic.sym_nuclear(A)
        except symbolic.UnsupportedForm:
            return verdict
        if exact.status is Status.FAILS:
            verdict.status = Status.FAILS
            verdict.notes.append(f"symbolic rule {exact.rule}")
            verdict.witnesses = partial + verdict.witnesses
    return verdict


def check_G1(B: KoetheMatrix, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """G_1-set: 0 < b_(n+1)^k <= b_n^k < 1 and b_n^k = O((b_n^j)^2) for some j."""
    N, K = _extent(B, budget)
    v = _g1_condition_one(B, N, K)
    if v is not None:
        return Verdict(Status.FAILS, [v], _used(budget, N=N, kmax=K))
    ns = _rows(N)
    pts = budget.probe_points(N)
    J = _cols(B, budget.jmax)
    per_k = []
    for k in range(1, K + 1):
        lb = B.log_col(k, ns)
        pb = B.log_col(k, pts) if B.probeable else None
        per_k.append(
            _search(
                k, range(k, J + 1),
                lambda j: lb - 2 * B.log_col(j, ns),
                (lambda j: pb - 2 * B.log_col(j, pts)) if B.probeable else None,
                budget, "g1", N,
            )
        )
    return _aggregate(per_k, _used(budget, N=N, kmax=K, jmax=J))


def check_Ginf(A: KoetheMatrix, budget: Budget = DEFAULT_BUDGET, normalize_first: bool = False) -> Verdict:
    """G_infinity-set: a_n^1 = 1, a_n^k <= a_(n+1)^k and (a_n^k)^2 = O(a_n^j) for some j."""
    if normalize_first:
        A = normalize(A)
    N, K = _extent(A, budget)
    v = _ginf_condition_one(A, N, K)
    if v is not None:
        return Verdict(Status.FAILS, [v], _used(budget, N=N, kmax=K))
    ns = _rows(N)
    pts = budget.probe_points(N)
    J = _cols(A, budget.jmax)
    per_k = []
    for k in range(1, K + 1):
        la = A.log_col(k, ns)
        pa = A.log_col(k, pts) if A.probeable else None
        per_k.append(
            _search(
                k, range(k, J + 1),
                lambda j: 2 * la - A.log_col(j, ns),
                (lambda j: 2 * pa - A.log_col(j, pts)) if A.probeable else None,
                budget, "ginf", N,
            )
        )
    return _aggregate(per_k, _used(budget, N=N, kmax=K, jmax=J))


# ---------------------------------------------------------------------------
# re-validation


def revalidate(w: BoundPair, lhs_logs: np.ndarray, rhs_logs: np.ndarray) -> bool:
    """Check lhs_n <= C * rhs_n for n = 1..len(lhs_logs) in the log domain (1e-12 slack)."""
    if w.C.sign == 0:
        return bool(np.all(lhs_logs == -np.inf))
    with np.errstate(invalid="ignore"):
        gap = lhs_logs - (w.C.logmag + rhs_logs)
    gap = np.where(lhs_logs == -np.inf, -np.inf, gap)
    return bool(np.all(gap <= 1e-12 * np.maximum(1.0, np.abs(lhs_logs))))


def revalidate_relation(w: BoundPair, A: KoetheMatrix, B: Optional[KoetheMatrix] = None, theta=None) -> bool:
    """Re-check a BoundPair produced by one of the checks in this module."""
    ns = _rows(w.verified_up_to)
    if w.relation == "inclusion":
        return revalidate(w, B.log_col(w.k, ns), A.log_col(w.m, ns))
    if w.relation == "g1":
        return revalidate(w, A.log_col(w.k, ns), 2 * A.log_col(w.m, ns))
    if w.relation == "ginf":
        return revalidate(w, 2 * A.log_col(w.k, ns), A.log_col(w.m, ns))
    if w.relation == "dual":
        return revalidate(w, theta.log_abs(ns), A.log_col(w.k, ns))
    if w.relation == "nuclear":
        partial = np.logaddexp.accumulate(A.log_col(w.k, ns) - A.log_col(w.m, ns))
        return revalidate(w, partial, np.zeros_like(partial))
    if w.relation == "membership":
        t, _ = _terms(A, w.k, theta, w.verified_up_to)
        partial = np.logaddexp.accumulate(t)
        return revalidate(w, partial, np.zeros_like(partial))
    raise ValueError(f"cannot re-validate relation {w.relation!r} here")
