"""Cauchy product operators T_theta, their transposes and continuity certificates.

Norms of basis images are taken in the sup seminorm:

    ||T e_n||_k  = sup_{j >= n} |theta_{j-n+1}| b_j^k
    ||T' e_n||_k = max_{1 <= i <= n} |theta_{n+1-i}| b_i^k

A certificate for one k is an index m and a constant C with
||T e_n||_k <= C a_n^m on every scanned n.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .koethe import (
    KoetheMatrix,
    check_dual_membership,
    check_G1,
    check_Ginf,
    check_inclusion,
    check_membership,
    check_nuclear,
    normalize,
)
from .seqcore import (
    Added,
    Prefix,
    Scaled,
    ScalarSequence,
    SignedLogValue,
    ZERO,
    cauchy_product_prefix,
    log_sum,
)
from .verdicts import (
    DEFAULT_BUDGET,
    LOG_TOL,
    STEP_GROWTH,
    BoundPair,
    Budget,
    CertifiedValue,
    DivergenceTrace,
    Status,
    TailArgument,
    Verdict,
    Violation,
    bounded_scan,
    certify_series,
    combine_all,
)

#: transpose probes need full rows, so they stop at N * 2**6
TRANSPOSE_PROBES = 6


class Direction(str, enum.Enum):
    FORWARD = "forward"
    TRANSPOSE = "transpose"


class Agreement(str, enum.Enum):
    CONSISTENT = "Consistent"
    CONTRADICTION = "Contradiction"
    UNDETERMINED = "Undetermined"


class DivergenceError(ArithmeticError):
    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"entry {index} is a divergent series")
        self.index = index


class DominationError(ValueError):
    def __init__(self, index: int):
        super().__init__(f"|theta_i| <= |eta_i| fails first at index {index}")
        self.index = index


@dataclass(frozen=True)
class SpaceInstance:
    A: KoetheMatrix
    B: KoetheMatrix
    theta: ScalarSequence
    direction: Direction = Direction.FORWARD
    normalize_A: Optional[bool] = None
    name: str = ""

    @property
    def source(self) -> KoetheMatrix:
        """The domain matrix actually used; normalised by default for transposes."""
        flag = self.normalize_A
        if flag is None:
            flag = self.direction is Direction.TRANSPOSE
        return normalize(self.A) if flag else self.A

    def with_theta(self, theta: ScalarSequence) -> "SpaceInstance":
        return SpaceInstance(self.A, self.B, theta, self.direction, self.normalize_A, self.name)


# ---------------------------------------------------------------------------
# applying the operators


def apply_T(theta: ScalarSequence, x: ScalarSequence, N: int) -> Prefix:
    """First N entries of T_theta x = theta * x."""
    return cauchy_product_prefix(theta, x, N)


def apply_T_transpose(theta: ScalarSequence, x: ScalarSequence, N: int, budget: Budget = DEFAULT_BUDGET) -> Prefix:
    """First N entries of T'_theta x: entry i is sum_{j >= i} theta_{j+1-i} x_j.

    Exact for finitely supported x; otherwise each entry must certify as an
    absolutely convergent series or :class:`DivergenceError` is raised.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    s = x.support()
    if s is not None:
        xs = [x.eval(j) for j in range(1, s + 1)]
        out = []
        for i in range(1, N + 1):
            terms = [theta.eval(j + 1 - i) * xs[j - 1] for j in range(i, s + 1) if xs[j - 1].sign]
            out.append(log_sum(terms))
        return Prefix(tuple(out))

    W = budget.N
    out = []
    for i in range(1, N + 1):
        js = np.arange(i, i + W, dtype=float)
        st, lt = theta.signed_logs(js + 1 - i)
        sx, lx = x.signed_logs(js)
        with np.errstate(invalid="ignore"):
            logs = np.where((st == 0) | (sx == 0), -np.inf, lt + lx)

        def probe(pts, i=i):
            with np.errstate(invalid="ignore"):
                return theta.log_abs(pts) + x.log_abs(pts + i - 1)

        usable = theta.probeable and x.probeable
        cv = certify_series(logs, probe if usable else None, budget)
        if not cv.certified:
            raise DivergenceError(i, f"entry {i} of T' x does not certify as a convergent series")
        signs = (st * sx).astype(float)
        top = float(np.max(logs))
        if top == -np.inf:
            out.append(ZERO)
            continue
        total = math.fsum((signs * np.exp(logs - top)).tolist())
        out.append(SignedLogValue(1, top) * SignedLogValue.from_float(total) if total else ZERO)
    return Prefix(tuple(out))


# ---------------------------------------------------------------------------
# basis image norms


def _row_sups(L: np.ndarray, P: Optional[np.ndarray], budget: Budget, W: int):
    """Row-wise certified sup of exp(L); P holds far-out probe terms per row."""
    n0 = budget.window_start(W)
    head = L[:, : n0 - 1].max(axis=1)
    tail = L[:, n0 - 1 :]
    nu = np.maximum(head, tail.max(axis=1))
    tol = LOG_TOL * np.maximum(1.0, np.abs(np.where(np.isfinite(head), head, 0.0)))
    ok = tail.max(axis=1) <= head + tol
    if P is not None:
        ok &= P.max(axis=1) <= np.maximum(head, nu) + tol
    with np.errstate(invalid="ignore"):
        d = np.diff(tail, axis=1)
        growing = np.all(np.isfinite(tail), axis=1) & (d.min(axis=1) >= STEP_GROWTH)
        if P is not None:
            seq = np.concatenate([tail[:, -1:], P], axis=1)
            growing &= np.all(np.diff(seq, axis=1) > 0, axis=1) | np.all(P == np.inf, axis=1)
    return nu, ok, growing & ~ok


@dataclass
class NormTable:
    """Basis image norms log ||T e_n||_k on n = 1..N plus probe rows."""

    k: int
    nu: np.ndarray
    certified: np.ndarray
    divergent: np.ndarray
    probe_ns: np.ndarray
    probe_nu: Optional[np.ndarray]
    probe_certified: bool = True
    traces: dict = field(default_factory=dict)

    @property
    def all_certified(self) -> bool:
        return bool(self.certified.all()) and self.probe_certified


def _forward_block(theta, B, k, rows: np.ndarray, W: int, budget: Budget, exact: bool):
    i = np.arange(1, W + 1, dtype=float)
    lt = theta.log_abs(i)
    J = rows[:, None] + i[None, :] - 1.0
    if B.n_max is not None:
        valid = J <= B.n_max
        lb = np.full(J.shape, -np.inf)
        lb[valid] = B.log_col(k, J[valid])
    else:
        lb = B.log_col(k, J.ravel()).reshape(J.shape)
    with np.errstate(invalid="ignore"):
        L = np.where(lt[None, :] == -np.inf, -np.inf, lt[None, :] + lb)
    if exact:
        nu = L.max(axis=1)
        return L, nu, np.ones(len(rows), bool), np.zeros(len(rows), bool)
    P = None
    if theta.probeable and B.probeable and budget.probes:
        iq = budget.probe_points(W)
        ltq = theta.log_abs(iq)
        lbq = B.log_col(k, (rows[:, None] + iq[None, :] - 1.0).ravel()).reshape(len(rows), iq.size)
        with np.errstate(invalid="ignore"):
            P = np.where(ltq[None, :] == -np.inf, -np.inf, ltq[None, :] + lbq)
    nu, ok, div = _row_sups(L, P, budget, W)
    if B.n_max is not None:
        ok[:] = False
    return L, nu, ok, div


def _transpose_row(theta, B, k, n: int) -> float:
    i = np.arange(1, n + 1, dtype=float)
    lt = theta.log_abs(n + 1 - i)
    lb = B.log_col(k, i)
    with np.errstate(invalid="ignore"):
        return float(np.max(np.where(lt == -np.inf, -np.inf, lt + lb)))


def forward_norms(theta: ScalarSequence, B: KoetheMatrix, k: int, budget: Budget = DEFAULT_BUDGET) -> NormTable:
    N = budget.N if B.n_max is None else min(budget.N, B.n_max)
    W = budget.N
    s = theta.support()
    exact = s is not None and s <= W
    rows = np.arange(1, N + 1, dtype=float)
    L, nu, ok, div = _forward_block(theta, B, k, rows, W, budget, exact)
    traces = {}
    n0 = budget.window_start(W)
    for r in np.nonzero(div)[0][:1]:
        traces[int(r) + 1] = (tuple(range(n0, W + 1)), tuple(L[r, n0 - 1 :].tolist()))
    pns = budget.probe_points(N) if (B.probeable and budget.probes) else np.array([])
    pnu, pok = None, True
    if pns.size:
        _, pnu, pc, pd = _forward_block(theta, B, k, pns, W, budget, exact)
        pok = bool(pc.all())
        pnu = np.where(pd, np.inf, pnu)
    return NormTable(k, nu, ok, div, pns, pnu, pok, traces)


def transpose_norms(theta: ScalarSequence, B: KoetheMatrix, k: int, budget: Budget = DEFAULT_BUDGET) -> NormTable:
    N = budget.N if B.n_max is None else min(budget.N, B.n_max)
    i = np.arange(1, N + 1, dtype=float)
    lt = theta.log_abs(i)
    lb = B.log_col(k, i)
    idx = i[:, None] - i[None, :]  # theta index minus one, valid where >= 0
    gathered = lt[np.clip(idx, 0, N - 1).astype(np.int64)]
    with np.errstate(invalid="ignore"):
        L = np.where((idx >= 0) & (gathered > -np.inf), gathered + lb[None, :], -np.inf)
    nu = L.max(axis=1)
    pns = np.array([])
    pnu = None
    if B.probeable and theta.probeable and budget.probes:
        pns = budget.probe_points(N, min(budget.probes, TRANSPOSE_PROBES))
        pnu = np.array([_transpose_row(theta, B, k, int(n)) for n in pns])
    ok = np.ones(N, bool)
    return NormTable(k, nu, ok, np.zeros(N, bool), pns, pnu, True)


def basis_image_norm(theta: ScalarSequence, B: KoetheMatrix, k: int, n: int, budget: Budget = DEFAULT_BUDGET) -> CertifiedValue:
    """||T_theta e_n||_k = sup_{j >= n} |theta_{j-n+1}| b_j^k, scanned over a window of budget.N terms."""
    W = budget.N
    s = theta.support()
    exact = s is not None and s <= W
    L, nu, ok, div = _forward_block(theta, B, k, np.array([float(n)]), W, budget, exact)
    value = SignedLogValue.from_log(float(nu[0]))
    if exact:
        return CertifiedValue(value, ZERO, TailArgument("symbolic", rule="finite-support"))
    n0 = budget.window_start(W)
    if ok[0]:
        d = np.diff(L[0, n0 - 1 :])
        if d.size and np.all(np.isfinite(d)) and d.max() <= 0:
            return CertifiedValue(value, ZERO, TailArgument("ratio", N0=n0, r=math.exp(float(d.max()))))
        return CertifiedValue(value, ZERO, TailArgument("dominated", N0=n0))
    if div[0]:
        trace = (tuple(range(n0, W + 1)), tuple(L[0, n0 - 1 :].tolist()))
        return CertifiedValue(value, ZERO, divergent=True, trace=trace)
    return CertifiedValue(value)


def basis_image_norm_transpose(theta: ScalarSequence, B: KoetheMatrix, k: int, n: int) -> SignedLogValue:
    """||T'_theta e_n||_k = max_{1 <= i <= n} |theta_{n+1-i}| b_i^k (a finite max)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return SignedLogValue.from_log(_transpose_row(theta, B, k, n))


def norm_table(instance: SpaceInstance, k: int, budget: Budget) -> NormTable:
    if instance.direction is Direction.FORWARD:
        return forward_norms(instance.theta, instance.B, k, budget)
    return transpose_norms(instance.theta, instance.B, k, budget)


# ---------------------------------------------------------------------------
# certificates


def _relation(instance) -> str:
    return "continuity" if instance.direction is Direction.FORWARD else "continuity-transpose"


def _certify_k(instance: SpaceInstance, k: int, budget: Budget):
    A = instance.source
    tab = norm_table(instance, k, budget)
    relation = _relation(instance)
    N = tab.nu.size
    if tab.divergent.any():
        n = int(np.nonzero(tab.divergent)[0][0]) + 1
        idx, vals = tab.traces.get(n, ((), ()))
        return Status.FAILS, DivergenceTrace(k, idx, vals, None, relation + f":row{n}")
    if tab.probe_nu is not None and np.isinf(tab.probe_nu).any():
        return Status.FAILS, DivergenceTrace(k, tuple(tab.probe_ns.tolist()), tuple(tab.probe_nu.tolist()), None, relation)
    ns = np.arange(1, N + 1, dtype=float)
    M = budget.mmax if A.k_max is None else min(budget.mmax, A.k_max)
    if A.n_max is not None and A.n_max < N:
        return Status.INCONCLUSIVE, None
    probes_ok = A.probeable and tab.probe_nu is not None and tab.probe_nu.size > 0
    all_fail, trace = True, None
    for m in range(1, M + 1):
        with np.errstate(invalid="ignore"):
            rho = np.where(tab.nu == -np.inf, -np.inf, tab.nu - A.log_col(m, ns))
            prho = None
            if probes_ok:
                prho = np.where(tab.probe_nu == -np.inf, -np.inf, tab.probe_nu - A.log_col(m, tab.probe_ns))
        scan = bounded_scan(rho, prho, budget)
        if scan.status is Status.HOLDS:
            if not tab.all_certified:
                return Status.INCONCLUSIVE, None
            C = SignedLogValue.from_log(scan.sup_log)
            return Status.HOLDS, BoundPair(k, m, C, N, TailArgument(scan.kind, N0=budget.window_start(N)), relation)
        if scan.status is Status.FAILS:
            trace = DivergenceTrace(k, scan.trace[0], scan.trace[1], m, relation)
        else:
            all_fail = False
    if all_fail and trace is not None:
        return Status.FAILS, trace
    return Status.INCONCLUSIVE, None


def continuity_certificate(instance: SpaceInstance, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Per-k search for (m, C) with ||T e_n||_k <= C a_n^m (sup over the scanned n)."""
    K = budget.kmax if instance.B.k_max is None else min(budget.kmax, instance.B.k_max)
    per_k = [_certify_k(instance, k, budget) for k in range(1, K + 1)]
    status = combine_all(s for s, _ in per_k)
    witnesses = [w for _, w in per_k if w is not None]
    notes = [f"k={k}: budget exhausted" for k, (s, _) in enumerate(per_k, 1) if s is Status.INCONCLUSIVE]
    used = budget.to_dict()
    used["kmax"] = K
    return Verdict(status, witnesses, used, notes)


def revalidate_certificate(instance: SpaceInstance, w: BoundPair, budget: Budget = DEFAULT_BUDGET) -> bool:
    """Re-check ||T e_n||_k <= C a_n^m for n <= w.verified_up_to."""
    b = Budget(**{**budget.to_dict(), "N": max(budget.N, w.verified_up_to)})
    tab = norm_table(instance, w.k, b)
    nu = tab.nu[: w.verified_up_to]
    ns = np.arange(1, nu.size + 1, dtype=float)
    la = instance.source.log_col(w.m, ns)
    if w.C.sign == 0:
        return bool(np.all(nu == -np.inf))
    gap = np.where(nu == -np.inf, -np.inf, nu - la - w.C.logmag)
    return bool(np.all(gap <= 1e-12 * np.maximum(1.0, np.abs(nu))))


# ---------------------------------------------------------------------------
# theorem cross-checks


@dataclass
class ContinuityReport:
    instance: SpaceInstance
    certificate: Verdict
    condition_i: Verdict
    condition_ii: Verdict
    agreement: Agreement
    preconditions: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    oracle: Optional[dict] = None

    @property
    def status(self) -> Status:
        return self.certificate.status

    @property
    def rhs(self) -> Status:
        return combine_all([self.condition_i.status, self.condition_ii.status])


def _agreement(lhs: Status, rhs: Status) -> Agreement:
    if Status.INCONCLUSIVE in (lhs, rhs):
        return Agreement.UNDETERMINED
    return Agreement.CONSISTENT if lhs is rhs else Agreement.CONTRADICTION


def _oracle(instance) -> Optional[dict]:
    from . import symbolic

    try:
        ev = symbolic.sym_theorem(instance)
    except symbolic.UnsupportedForm as exc:
        return {"status": "Unsupported", "rule": str(exc)}
    return {"status": ev.status.value, "rule": ev.rule}


def _verify(instance, budget, pre: dict, cond_i: Verdict) -> ContinuityReport:
    cond_ii = check_inclusion(instance.source, instance.B, budget)
    lhs = continuity_certificate(instance, budget)
    flags = []
    failed = [name for name, v in pre.items() if v.status is not Status.HOLDS]
    if failed:
        flags.append("precondition-failed: " + ", ".join(failed))
        agreement = Agreement.UNDETERMINED
    else:
        agreement = _agreement(lhs.status, combine_all([cond_i.status, cond_ii.status]))
    for name, v in (("certificate", lhs), ("condition_i", cond_i), ("condition_ii", cond_ii)):
        if v.status is Status.INCONCLUSIVE:
            flags.append(f"inconclusive: {name}")
    return ContinuityReport(instance, lhs, cond_i, cond_ii, agreement, pre, flags, _oracle(instance))


def verify_theorem1(instance: SpaceInstance, budget: Budget = DEFAULT_BUDGET) -> ContinuityReport:
    """T_theta continuous  <=>  theta in lambda(B) and lambda(A) in lambda(B)."""
    if instance.direction is not Direction.FORWARD:
        raise ValueError("verify_theorem1 needs a forward instance")
    pre = {
        "B is G1": check_G1(instance.B, budget),
        "B nuclear": check_nuclear(instance.B, budget),
        "A nuclear": check_nuclear(instance.source, budget),
    }
    return _verify(instance, budget, pre, check_membership(instance.theta, instance.B, budget))


def verify_theorem2(instance: SpaceInstance, budget: Budget = DEFAULT_BUDGET) -> ContinuityReport:
    """T'_theta continuous  <=>  theta in lambda(A)' and lambda(A) in lambda(B)."""
    if instance.direction is not Direction.TRANSPOSE:
        raise ValueError("verify_theorem2 needs a transpose instance")
    A = instance.source
    pre = {
        "A is Ginf": check_Ginf(A, budget),
        "A nuclear": check_nuclear(A, budget),
        "B nuclear": check_nuclear(instance.B, budget),
    }
    report = _verify(instance, budget, pre, check_dual_membership(instance.theta, A, budget))
    if instance.theta.eval(1).sign == 0:
        report.flags.append("theta_1 = 0: the i=n step of the necessity argument does not apply")
    return report


# ---------------------------------------------------------------------------
# the sequence space of admissible theta


def normality_transfer(theta: ScalarSequence, eta: ScalarSequence, report: ContinuityReport, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Reuse every (k, m, C) certificate of eta for a dominated theta.

    Raises :class:`DominationError` unless |theta_i| <= |eta_i| for all i <= budget.N.
    """
    if report.status is not Status.HOLDS:
        raise ValueError("normality transfer needs a report whose certificate Holds")
    idx = np.arange(1, budget.N + 1, dtype=float)
    bad = np.nonzero(theta.log_abs(idx) > eta.log_abs(idx))[0]
    if bad.size:
        raise DominationError(int(bad[0]) + 1)
    inst = report.instance.with_theta(theta)
    witnesses, failures = [], []
    for w in report.certificate.bound_pairs():
        if revalidate_certificate(inst, w, budget):
            witnesses.append(w)
        else:
            failures.append(Violation(w.verified_up_to, w.k, f"||T e_n||_{w.k} <= C a_n^{w.m}"))
    status = Status.HOLDS if not failures else Status.FAILS
    return Verdict(status, failures + witnesses, budget.to_dict())


def _close(a: Prefix, b: Prefix, scale: list[float], rtol: float) -> Optional[int]:
    for n, (x, y, s) in enumerate(zip(a.values, b.values, scale), 1):
        if abs(x.to_float() - y.to_float()) > rtol * s:
            return n
    return None


def linearity_check(theta: ScalarSequence, eta: ScalarSequence, lam: float, x: ScalarSequence, N: int, rtol: float = 1e-12) -> Verdict:
    """T_(theta+eta) = T_theta + T_eta and T_(lam theta) = lam T_theta on the first N entries."""
    if N < 1:
        raise ValueError("N must be >= 1")
    t_theta = apply_T(theta, x, N)
    t_eta = apply_T(eta, x, N)
    # entrywise scale: the same convolution with absolute values
    abs_x = [abs(v) for v in x.prefix(N).values]
    abs_t = [abs(v) for v in theta.prefix(N).values]
    abs_e = [abs(v) for v in eta.prefix(N).values]
    scale = []
    for n in range(N):
        s = log_sum([abs_t[n - j] * abs_x[j] for j in range(n + 1)] + [abs_e[n - j] * abs_x[j] for j in range(n + 1)])
        scale.append(max(s.to_float(), 1e-300))
    failures = []
    bad = _close(apply_T(Added(theta, eta), x, N), t_theta + t_eta, scale, rtol)
    if bad is not None:
        failures.append(Violation(bad, 0, "T(theta+eta) x = T theta x + T eta x"))
    lam_scale = [abs(lam) * s + 1e-300 for s in scale]
    bad = _close(apply_T(Scaled(lam, theta), x, N), t_theta.scale(lam), lam_scale, rtol)
    if bad is not None:
        failures.append(Violation(bad, 0, "T(lam theta) x = lam T theta x"))
    return Verdict(Status.FAILS if failures else Status.HOLDS, failures, {"N": N})
