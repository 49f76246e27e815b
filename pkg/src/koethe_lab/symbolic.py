"""Exact verdicts for power series spaces over the exponent grammar.

Every quantity the checks compare is ``exp(L(n))`` where ``L`` is a finite
combination of monomials ``n**p * log(n)**q * loglog(n)**r``.  Boundedness
and summability of ``exp(L)`` are read off the leading monomial:

* bounded  <=> the leading non-constant coefficient is negative (or absent);
* summable <=> comparison with a geometric / stretched exponential term when
  the leading monomial outgrows ``log n``; the p-series test when it is
  ``log n`` itself; Bertrand's series / the integral test on ``u = log n``
  when the log coefficient is exactly -1.

Quantifiers over the row indices ("for every k there is m") are handled by
treating k and m as infinitely large with m >> k: a coefficient becomes a
vector over the scales (M, K, 1, 1/K, 1/M) compared lexicographically.  All
predicates involved are monotone in k and m, so the limit decides the
quantified statement.  Shifting n by one (log n vs log(n+1)) changes none of
these verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .exponents import ExponentSequence, Linear, Log, PowerLog
from .koethe import FiniteType, InfiniteType, KoetheMatrix
from .seqcore import (
    ExpOfExponent,
    FiniteTable,
    Geometric,
    PowerLaw,
    Scaled,
    ScalarSequence,
)
from .verdicts import Status

# coefficient scales, most significant first
SCALES = ("M", "K", "1", "1/K", "1/M")
LOG_KEY = (Fraction(0), Fraction(1), Fraction(0))
LOGLOG_KEY = (Fraction(0), Fraction(0), Fraction(1))


class UnsupportedForm(ValueError):
    """The object is outside the grammar; callers fall back to numeric scans."""


@dataclass(frozen=True)
class Coef:
    parts: tuple = (Fraction(0),) * 5

    @classmethod
    def of(cls, **kw) -> "Coef":
        names = {"M": 0, "K": 1, "one": 2, "invK": 3, "invM": 4}
        parts = [Fraction(0)] * 5
        for name, v in kw.items():
            parts[names[name]] = Fraction(v)
        return cls(tuple(parts))

    @classmethod
    def const(cls, v) -> "Coef":
        return cls.of(one=v)

    def __add__(self, other):
        if not isinstance(other, Coef):
            other = Coef.const(other)
        return Coef(tuple(a + b for a, b in zip(self.parts, other.parts)))

    def scale(self, f) -> "Coef":
        f = Fraction(f)
        return Coef(tuple(a * f for a in self.parts))

    def sign(self) -> int:
        for a in self.parts:
            if a:
                return 1 if a > 0 else -1
        return 0

    def is_zero(self) -> bool:
        return self.sign() == 0


Poly = dict  # monomial key (p, q, r) -> Coef; constants are dropped


def _add(poly: Poly, key, c: Coef):
    poly[key] = poly.get(key, Coef()) + c


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def exponent_poly(alpha: ExponentSequence) -> dict:
    """alpha as {key: Fraction}."""
    if isinstance(alpha, Linear):
        return {(Fraction(1), Fraction(0), Fraction(0)): _frac(alpha.c)}
    if isinstance(alpha, Log):
        return {LOG_KEY: _frac(alpha.c)}
    if isinstance(alpha, PowerLog):
        return {(_frac(alpha.p), _frac(alpha.q), Fraction(0)): _frac(alpha.c)}
    raise UnsupportedForm(f"exponent {alpha!r} is not in the grammar")


FINITE = "finite-support"


def sequence_poly(theta: ScalarSequence) -> Union[Poly, str]:
    """log|theta_n| as a Poly, or FINITE for finitely supported sequences."""
    if isinstance(theta, FiniteTable):
        return FINITE
    if isinstance(theta, Scaled):
        return FINITE if theta.factor == 0 else sequence_poly(theta.base)
    if isinstance(theta, Geometric):
        if theta.r == 0:
            return FINITE
        # log|r| is irrational in general; ties with it are not meaningful
        lr = Fraction(math.log(abs(theta.r))) if abs(theta.r) != 1 else Fraction(0)
        return {(Fraction(1), Fraction(0), Fraction(0)): Coef.const(lr)}
    if isinstance(theta, PowerLaw):
        if theta.c == 0:
            return FINITE
        poly = {}
        if theta.p:
            _add(poly, LOG_KEY, Coef.const(_frac(theta.p)))
        if theta.q:
            _add(poly, LOGLOG_KEY, Coef.const(_frac(theta.q)))
        return poly
    if isinstance(theta, ExpOfExponent):
        return {k: Coef.const(v * _frac(theta.s)) for k, v in exponent_poly(theta.alpha).items()}
    raise UnsupportedForm(f"sequence {type(theta).__name__} is not in the grammar")


def matrix_poly(A: KoetheMatrix, row: Union[int, str]) -> Poly:
    """log a_n^row as a Poly; ``row`` is a concrete index or the scale "K" / "M"."""
    if isinstance(A, InfiniteType):
        off = 1 if A.normalized else 0
        out = {}
        for key, c in exponent_poly(A.alpha).items():
            if isinstance(row, str):
                out[key] = Coef.of(**{row: c, "one": -off * c})
            else:
                out[key] = Coef.const((row - off) * c)
        return out
    if isinstance(A, FiniteType):
        out = {}
        for key, c in exponent_poly(A.alpha).items():
            if isinstance(row, str):
                out[key] = Coef.of(**{"inv" + row: -c})
            else:
                out[key] = Coef.const(-c / Fraction(row))
        return out
    raise UnsupportedForm(f"matrix {type(A).__name__} is not in the grammar")


def combine(*terms) -> Poly:
    """Linear combination of polys: combine((1, P), (-2, Q), ...)."""
    out: Poly = {}
    for factor, poly in terms:
        for key, c in poly.items():
            _add(out, key, c.scale(factor))
    return {k: c for k, c in out.items() if not c.is_zero()}


def _leading(poly: Poly):
    keys = sorted((k for k, c in poly.items() if not c.is_zero()), reverse=True)
    return keys


@dataclass(frozen=True)
class ExactVerdict:
    status: Status
    rule: str
    witness: Optional[str] = None


def decide_bounded(poly: Poly) -> ExactVerdict:
    keys = _leading(poly)
    if not keys:
        return ExactVerdict(Status.HOLDS, "constant")
    s = poly[keys[0]].sign()
    return ExactVerdict(Status.HOLDS if s < 0 else Status.FAILS, "leading-decay" if s < 0 else "leading-growth")


def decide_summable(poly: Poly) -> ExactVerdict:
    keys = _leading(poly)
    if not keys:
        return ExactVerdict(Status.FAILS, "constant-terms")
    top = keys[0]
    c = poly[top]
    if top > LOG_KEY:
        # outgrows any power of n: geometric / stretched exponential comparison
        if c.sign() < 0:
            return ExactVerdict(Status.HOLDS, "geometric-comparison")
        return ExactVerdict(Status.FAILS, "terms-unbounded")
    if top == LOG_KEY:
        # terms ~ n**c * (lower factors): p-series
        shifted = (c + 1).sign()
        if shifted < 0:
            return ExactVerdict(Status.HOLDS, "p-series")
        if shifted > 0:
            return ExactVerdict(Status.FAILS, "p-series")
        rest = [k for k in keys[1:]]
        if not rest:
            return ExactVerdict(Status.FAILS, "harmonic")
        nxt = rest[0]
        d = poly[nxt]
        if nxt == LOGLOG_KEY:
            # Bertrand: sum 1/(n log(n)**b) converges iff b > 1
            return ExactVerdict(Status.HOLDS if (d + 1).sign() < 0 else Status.FAILS, "bertrand")
        # 1/n * exp(d log(n)**q), 0 < q < 1: integral test in u = log n
        return ExactVerdict(Status.HOLDS if d.sign() < 0 else Status.FAILS, "log-integral")
    # slower than any power: exp(c log(n)**q) with q < 1, or log(n)**b
    return ExactVerdict(Status.FAILS, "subpower-terms")


@dataclass(frozen=True)
class SeriesForm:
    """t_n = exp(-s * alpha_n) * (n + 1)**d"""

    s: float
    d: float
    alpha: ExponentSequence

    def poly(self) -> Poly:
        out = {k: Coef.const(-_frac(self.s) * v) for k, v in exponent_poly(self.alpha).items()} if self.s else {}
        if self.d:
            _add(out, LOG_KEY, Coef.const(_frac(self.d)))
        return {k: c for k, c in out.items() if not c.is_zero()}


def decide_series(f: SeriesForm) -> ExactVerdict:
    """Does sum_n exp(-s alpha_n) (n+1)**d converge?"""
    if f.s < 0:
        raise UnsupportedForm("series form needs s >= 0")
    return decide_summable(f.poly())


# ---------------------------------------------------------------------------
# the structural predicates


def _kind(A: KoetheMatrix) -> str:
    if isinstance(A, InfiniteType):
        return "infinite-normalized" if A.normalized else "infinite"
    if isinstance(A, FiniteType):
        return "finite"
    raise UnsupportedForm(f"matrix {type(A).__name__} is not in the grammar")


def _log_scale(alpha) -> Optional[Fraction]:
    """Coefficient c when alpha is exactly c * log(n+1), else None."""
    poly = exponent_poly(alpha)
    if list(poly) == [LOG_KEY]:
        return poly[LOG_KEY]
    return None


def nuclear_witness(A: KoetheMatrix, k: int) -> int:
    """The m chosen by :func:`sym_nuclear`'s selector for a concrete k."""
    kind = _kind(A)
    if kind == "finite":
        return 2 * k
    c = _log_scale(A.alpha)
    if c is not None:
        return k + math.floor(1 / c) + 1
    return k + 1


def sym_nuclear(A: KoetheMatrix) -> ExactVerdict:
    """For every k some m with sum_n a_n^k / a_n^m < inf."""
    kind = _kind(A)
    v = decide_summable(combine((1, matrix_poly(A, "K")), (-1, matrix_poly(A, "M"))))
    if v.status is Status.FAILS:
        return v
    if kind == "finite":
        return ExactVerdict(Status.HOLDS, v.rule, "m = 2k")
    c = _log_scale(A.alpha)
    if c is not None:
        return ExactVerdict(Status.HOLDS, v.rule, f"m = k+{math.floor(1 / c) + 1}")
    return ExactVerdict(Status.HOLDS, v.rule, "m = k+1")


def sym_g1(B: KoetheMatrix) -> ExactVerdict:
    kind = _kind(B)
    if kind != "finite":
        return ExactVerdict(Status.FAILS, "b_n^k < 1 violated")
    # exp(-alpha/k) = exp(-alpha/(2k))**2 exactly
    return ExactVerdict(Status.HOLDS, "square-identity", "j = 2k")


def sym_ginf(A: KoetheMatrix) -> ExactVerdict:
    kind = _kind(A)
    if kind != "infinite-normalized":
        return ExactVerdict(Status.FAILS, "a_n^1 = 1 violated")
    # exp((k-1) alpha)**2 = exp((2k-2) alpha) = a_n^(2k-1)
    return ExactVerdict(Status.HOLDS, "exponent-doubling", "j = 2k-1")


def inclusion_ratio(A: KoetheMatrix, B: KoetheMatrix, k, m) -> Poly:
    """log(b_n^k / a_n^m)."""
    return combine((1, matrix_poly(B, k)), (-1, matrix_poly(A, m)))


def inclusion_witness(A: KoetheMatrix, B: KoetheMatrix, k: int, cap: int = 10_000) -> Optional[int]:
    """Smallest m with b_n^k = O(a_n^m), searching m <= cap."""
    for m in range(1, cap + 1):
        if decide_bounded(inclusion_ratio(A, B, k, m)).status is Status.HOLDS:
            return m
    return None


def sym_inclusion(A: KoetheMatrix, B: KoetheMatrix) -> ExactVerdict:
    """lambda(A) in lambda(B): for every k some m with b_n^k = O(a_n^m)."""
    _kind(A), _kind(B)
    v = decide_bounded(inclusion_ratio(A, B, "K", "M"))
    if v.status is Status.FAILS:
        return ExactVerdict(Status.FAILS, "inclusion-ratio-unbounded")
    ms = [inclusion_witness(A, B, k) for k in range(1, 9)]
    if len(set(ms)) == 1:
        wit = f"m = {ms[0]}"
    elif all(m is not None for m in ms) and len({m - k for k, m in enumerate(ms, 1)}) == 1:
        wit = f"m = k{ms[0] - 1:+d}" if ms[0] != 1 else "m = k"
    else:
        wit = "m(k) = " + ",".join(str(m) for m in ms)
    return ExactVerdict(Status.HOLDS, "inclusion-ratio-bounded", wit)


def sym_membership(theta: ScalarSequence, B: KoetheMatrix) -> ExactVerdict:
    """theta in lambda(B): sum_n |theta_n| b_n^k < inf for every k."""
    _kind(B)
    tp = sequence_poly(theta)
    if tp == FINITE:
        return ExactVerdict(Status.HOLDS, "finite-support")
    v = decide_summable(combine((1, tp), (1, matrix_poly(B, "K"))))
    return ExactVerdict(v.status, "membership:" + v.rule)


def sym_dual(theta: ScalarSequence, A: KoetheMatrix) -> ExactVerdict:
    """theta in lambda(A)': |theta_n| = O(a_n^k) for some k."""
    _kind(A)
    tp = sequence_poly(theta)
    if tp == FINITE:
        return ExactVerdict(Status.HOLDS, "finite-support")
    v = decide_bounded(combine((1, tp), (-1, matrix_poly(A, "K"))))
    if v.status is Status.FAILS:
        return ExactVerdict(Status.FAILS, "dual:" + v.rule)
    for k in range(1, 10_001):
        if decide_bounded(combine((1, tp), (-1, matrix_poly(A, k)))).status is Status.HOLDS:
            return ExactVerdict(Status.HOLDS, "dual:" + v.rule, f"k = {k}")
    return ExactVerdict(Status.HOLDS, "dual:" + v.rule)


def sym_theorem(instance) -> ExactVerdict:
    """Exact continuity verdict: the conjunction of conditions (i) and (ii)."""
    from .operators import Direction

    A = instance.source
    inc = sym_inclusion(A, instance.B)
    if instance.direction is Direction.FORWARD:
        cond = sym_membership(instance.theta, instance.B)
    else:
        cond = sym_dual(instance.theta, A)
    if inc.status is Status.FAILS:
        return ExactVerdict(Status.FAILS, f"(ii) {inc.rule}")
    if cond.status is Status.FAILS:
        return ExactVerdict(Status.FAILS, f"(i) {cond.rule}")
    return ExactVerdict(Status.HOLDS, f"(i) {cond.rule}; (ii) {inc.rule}")


def in_grammar(instance) -> bool:
    try:
        sym_theorem(instance)
    except UnsupportedForm:
        return False
    return True
