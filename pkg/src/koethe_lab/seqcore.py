"""Log-domain scalar arithmetic, scalar sequences and the Cauchy product.

Magnitudes are kept as natural logarithms so that weights such as
``exp(k * n)`` never overflow.  A :class:`SignedLogValue` stores the log as a
double-double pair ``(logmag, lo)``; the low word carries the rounding error
of ``logmag`` which keeps round trips through the log domain accurate to a
few ulps even for values near ``1e300``.

All indices are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exponents import ExponentSequence, exponent_from_dict
from .exprs import compile_expression

_LN10 = math.log(10.0)


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@dataclass(frozen=True)
class SignedLogValue:
    """A real number ``sign * exp(logmag + lo)``; ``sign == 0`` is exact zero."""

    sign: int
    logmag: float = -math.inf
    lo: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 or self.logmag == -math.inf:
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "logmag", -math.inf)
            object.__setattr__(self, "lo", 0.0)
        elif math.isnan(self.logmag):
            raise ValueError("logmag is NaN")
        elif not math.isfinite(self.logmag) or not self.lo:
            object.__setattr__(self, "lo", 0.0)
        else:
            hi, lo = _two_sum(self.logmag, self.lo)
            object.__setattr__(self, "logmag", hi)
            object.__setattr__(self, "lo", lo)

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return ZERO
        if math.isnan(x):
            raise ValueError("cannot encode NaN")
        sign = 1 if x > 0 else -1
        a = abs(x)
        if math.isinf(a):
            return cls(sign, math.inf)
        hi = math.log(a)
        e = math.exp(hi)
        lo = math.log1p((a - e) / e) if 0 < e < math.inf else 0.0
        return cls(sign, hi, lo)

    @classmethod
    def from_log(cls, logmag: float, sign: int = 1) -> "SignedLogValue":
        return cls(sign if logmag != -math.inf else 0, logmag)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.logmag > 709.8:
            return self.sign * math.inf
        e = math.exp(self.logmag)
        return self.sign * (e + e * math.expm1(self.lo))

    @property
    def log(self) -> float:
        """log|x| as a plain float (``-inf`` for zero)."""
        return self.logmag

    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self):
        return SignedLogValue(-self.sign, self.logmag, self.lo)

    def __abs__(self):
        return SignedLogValue(abs(self.sign), self.logmag, self.lo)

    def __mul__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return ZERO
        s, e = _two_sum(self.logmag, other.logmag)
        # (l1 + l2) grouped so that the product is bitwise commutative
        return SignedLogValue(self.sign * other.sign, s, e + (self.lo + other.lo))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        return self * SignedLogValue(other.sign, -other.logmag, -other.lo)

    def __add__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(float(other))
        return log_sum([self, other])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def _key(self):
        if self.sign == 0:
            return (0, 0.0, 0.0)
        if self.sign > 0:
            return (1, self.logmag, self.lo)
        return (-1, -self.logmag, -self.lo)

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __gt__(self, other):
        return self._key() > other._key()

    def __ge__(self, other):
        return self._key() >= other._key()

    def decimal(self, digits: int = 6) -> str:
        """Render as ``[-]d.ddddde<exp>`` with ``digits`` significant digits."""
        if self.sign == 0:
            return "0"
        if math.isinf(self.logmag):
            return "-inf" if self.sign < 0 else "inf"
        l10 = (self.logmag + self.lo) / _LN10
        e10 = math.floor(l10)
        mant = 10 ** (l10 - e10)
        text = f"{mant:.{digits - 1}f}"
        if text.startswith("10"):
            e10 += 1
            text = f"{mant / 10:.{digits - 1}f}"
        return f"{'-' if self.sign < 0 else ''}{text}e{e10}"

    def to_dict(self) -> dict:
        d = {"sign": self.sign, "log": self.logmag if self.sign else 0.0}
        if self.lo:
            d["lo"] = self.lo
        d["dec"] = self.decimal()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SignedLogValue":
        if d["sign"] == 0:
            return ZERO
        return cls(int(d["sign"]), float(d["log"]), float(d.get("lo", 0.0)))

    def __repr__(self):
        return f"SLV({self.decimal()})"


ZERO = SignedLogValue(0)
ONE = SignedLogValue(1, 0.0)


def log_sum(values: Sequence[SignedLogValue]) -> SignedLogValue:
    """Sum of log-domain values with mixed signs.

    Every term is rescaled by the largest magnitude and the rescaled floats
    are added with :func:`math.fsum` (exactly rounded, so independent of the
    order of the summands).
    """
    terms = [v for v in values if v.sign != 0]
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    top = max(terms, key=lambda v: (v.logmag, v.lo))
    if top.logmag == math.inf:
        signs = {v.sign for v in terms if v.logmag == math.inf}
        if len(signs) > 1:
            raise ValueError("inf - inf in log_sum")
        return SignedLogValue(signs.pop(), math.inf)
    s = math.fsum(
        v.sign * math.exp((v.logmag - top.logmag) + (v.lo - top.lo)) for v in terms
    )
    if s == 0.0:
        return ZERO
    return SignedLogValue(1, top.logmag, top.lo) * SignedLogValue.from_float(s)


def log_sum_array(logs: np.ndarray) -> SignedLogValue:
    """Sum of the positive numbers ``exp(logs)``; ``-inf`` entries are zeros."""
    logs = np.asarray(logs, dtype=float)
    if logs.size == 0:
        return ZERO
    top = float(np.max(logs))
    if top == -math.inf:
        return ZERO
    if top == math.inf:
        return SignedLogValue(1, math.inf)
    s = math.fsum(np.exp(logs - top).tolist())
    return SignedLogValue(1, top) * SignedLogValue.from_float(s)


# ---------------------------------------------------------------------------
# sequences


class ScalarSequence:
    """A scalar sequence theta_1, theta_2, ... evaluable at any index."""

    def eval(self, n: int) -> SignedLogValue:
        raise NotImplementedError

    def signed_logs(self, ns) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``(sign, log|value|)`` arrays for the indices ``ns``."""
        vals = [self.eval(int(n)) for n in np.asarray(ns).ravel()]
        return (
            np.array([v.sign for v in vals], dtype=np.int8),
            np.array([v.logmag for v in vals], dtype=float),
        )

    def log_abs(self, ns) -> np.ndarray:
        return self.signed_logs(ns)[1]

    def support(self) -> Optional[int]:
        """Largest index that can be non-zero, or ``None`` if unbounded."""
        return None

    @property
    def probeable(self) -> bool:
        """Whether evaluation far beyond the scanned prefix is meaningful."""
        return True

    def prefix(self, N: int) -> "Prefix":
        return Prefix(tuple(self.eval(n) for n in range(1, N + 1)))

    def to_dict(self) -> dict:
        raise NotImplementedError


def _float_or_log(value_fn, log_fn, sign: int) -> SignedLogValue:
    # use the direct float when it is comfortably representable, so that
    # small closed forms such as 0.5**3 come out exact
    try:
        v = value_fn()
    except (OverflowError, ZeroDivisionError):
        v = None
    if v is not None and math.isfinite(v) and 1e-290 < abs(v) < 1e290:
        return SignedLogValue.from_float(v)
    lg = log_fn()
    return SignedLogValue(sign, lg) if sign else ZERO


@dataclass(frozen=True)
class FiniteTable(ScalarSequence):
    """theta_n = values[n-1] for n <= len(values), exactly zero afterwards."""

    values: tuple

    def __post_init__(self):
        vals = tuple(
            v if isinstance(v, SignedLogValue) else SignedLogValue.from_float(float(v))
            for v in self.values
        )
        object.__setattr__(self, "values", vals)

    def eval(self, n):
        if n < 1:
            raise IndexError("sequence index starts at 1")
        return self.values[n - 1] if n <= len(self.values) else ZERO

    def signed_logs(self, ns):
        idx = np.asarray(ns, dtype=np.int64)
        L = len(self.values)
        signs = np.array([v.sign for v in self.values] + [0], dtype=np.int8)
        logs = np.array([v.logmag for v in self.values] + [-math.inf], dtype=float)
        pos = np.where((idx >= 1) & (idx <= L), idx - 1, L)
        return signs[pos], logs[pos]

    def support(self):
        nz = [i for i, v in enumerate(self.values, 1) if v.sign != 0]
        return nz[-1] if nz else 0

    def to_dict(self):
        return {"form": "table", "values": [v.to_float() for v in self.values]}


@dataclass(frozen=True)
class Expression(ScalarSequence):
    """theta_n given by an arithmetic expression in ``n``.

    With ``log=True`` the expression is ``log|theta_n|`` (theta positive).
    """

    expr: str
    log: bool = False
    _fn: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", compile_expression(self.expr, ("n",)))

    def signed_logs(self, ns):
        ns = np.asarray(ns, dtype=float)
        v = np.broadcast_to(self._fn(n=ns), ns.shape).astype(float)
        if self.log:
            return np.where(v == -np.inf, 0, 1).astype(np.int8), v
        with np.errstate(divide="ignore"):
            return np.sign(v).astype(np.int8), np.log(np.abs(v))

    def eval(self, n):
        if n < 1:
            raise IndexError("sequence index starts at 1")
        s, lg = self.signed_logs(np.array([n]))
        if self.log or not math.isfinite(lg[0]):
            return SignedLogValue(int(s[0]), float(lg[0]))
        return SignedLogValue.from_float(float(self._fn(n=np.array(float(n)))))

    def to_dict(self):
        return {"form": "expression", "expr": self.expr, "log": self.log}


@dataclass(frozen=True)
class Geometric(ScalarSequence):
    """theta_n = r**n"""

    r: float

    def eval(self, n):
        if n < 1:
            raise IndexError("sequence index starts at 1")
        if self.r == 0:
            return ZERO
        sign = 1 if (self.r > 0 or n % 2 == 0) else -1
        return _float_or_log(lambda: self.r**n, lambda: n * math.log(abs(self.r)), sign)

    def signed_logs(self, ns):
        ns = np.asarray(ns, dtype=float)
        if self.r == 0:
            return np.zeros(ns.shape, np.int8), np.full(ns.shape, -np.inf)
        signs = np.ones(ns.shape, np.int8)
        if self.r < 0:
            signs = np.where(ns % 2 == 0, 1, -1).astype(np.int8)
        return signs, ns * math.log(abs(self.r))

    def support(self):
        return 0 if self.r == 0 else None

    def to_dict(self):
        return {"form": "geometric", "r": self.r}


@dataclass(frozen=True)
class PowerLaw(ScalarSequence):
    """theta_n = c * n**p * log(n+1)**q"""

    c: float = 1.0
    p: float = 0.0
    q: float = 0.0

    def eval(self, n):
        if n < 1:
            raise IndexError("sequence index starts at 1")
        if self.c == 0:
            return ZERO
        sign = 1 if self.c > 0 else -1
        return _float_or_log(
            lambda: self.c * float(n) ** self.p * math.log1p(n) ** self.q,
            lambda: math.log(abs(self.c)) + self.p * math.log(n) + self.q * math.log(math.log1p(n)),
            sign,
        )

    def signed_logs(self, ns):
        ns = np.asarray(ns, dtype=float)
        if self.c == 0:
            return np.zeros(ns.shape, np.int8), np.full(ns.shape, -np.inf)
        lg = math.log(abs(self.c)) + self.p * np.log(ns)
        if self.q:
            lg = lg + self.q * np.log(np.log1p(ns))
        return np.full(ns.shape, 1 if self.c > 0 else -1, np.int8), lg

    def support(self):
        return 0 if self.c == 0 else None

    def to_dict(self):
        return {"form": "powerlaw", "c": self.c, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class ExpOfExponent(ScalarSequence):
    """theta_n = exp(s * alpha_n)"""

    s: float
    alpha: ExponentSequence

    def eval(self, n):
        if n < 1:
            raise IndexError("sequence index starts at 1")
        return SignedLogValue(1, self.s * self.alpha.value(n))

    def signed_logs(self, ns):
        ns = np.asarray(ns, dtype=float)
        return np.ones(ns.shape, np.int8), self.s * self.alpha.values(ns)

    @property
    def probeable(self):
        return self.alpha.unbounded_domain

    def to_dict(self):
        return {"form": "expexp", "s": self.s, "alpha": self.alpha.to_dict()}


@dataclass(frozen=True)
class Scaled(ScalarSequence):
    """theta_n = factor * base_n"""

    factor: float
    base: ScalarSequence

    def eval(self, n):
        return self.base.eval(n) * SignedLogValue.from_float(self.factor)

    def signed_logs(self, ns):
        s, lg = self.base.signed_logs(ns)
        if self.factor == 0:
            return np.zeros_like(s), np.full(lg.shape, -np.inf)
        return (s * (1 if self.factor > 0 else -1)).astype(np.int8), lg + math.log(abs(self.factor))

    def support(self):
        return 0 if self.factor == 0 else self.base.support()

    @property
    def probeable(self):
        return self.base.probeable

    def to_dict(self):
        return {"form": "scaled", "factor": self.factor, "base": self.base.to_dict()}


@dataclass(frozen=True)
class Added(ScalarSequence):
    """theta_n = left_n + right_n"""

    left: ScalarSequence
    right: ScalarSequence

    def eval(self, n):
        return log_sum([self.left.eval(n), self.right.eval(n)])

    def support(self):
        a, b = self.left.support(), self.right.support()
        return None if a is None or b is None else max(a, b)

    @property
    def probeable(self):
        return self.left.probeable and self.right.probeable

    def to_dict(self):
        return {"form": "sum", "left": self.left.to_dict(), "right": self.right.to_dict()}


def unit(n: int) -> FiniteTable:
    """The basis vector e_n."""
    if n < 1:
        raise ValueError("basis index starts at 1")
    return FiniteTable((0.0,) * (n - 1) + (1.0,))


def constant(c: float = 1.0) -> PowerLaw:
    return PowerLaw(c, 0.0, 0.0)


def sequence_from_dict(d) -> ScalarSequence:
    if isinstance(d, (list, tuple)):
        return FiniteTable(tuple(d))
    form = d.get("form")
    if form == "table":
        return FiniteTable(tuple(d["values"]))
    if form == "expression":
        return Expression(d["expr"], bool(d.get("log", False)))
    if form == "geometric":
        return Geometric(float(d["r"]))
    if form == "powerlaw":
        return PowerLaw(float(d.get("c", 1.0)), float(d.get("p", 0.0)), float(d.get("q", 0.0)))
    if form == "expexp":
        return ExpOfExponent(float(d.get("s", 1.0)), exponent_from_dict(d["alpha"]))
    if form == "unit":
        return unit(int(d["n"]))
    if form == "constant":
        return constant(float(d.get("c", 1.0)))
    if form == "scaled":
        return Scaled(float(d["factor"]), sequence_from_dict(d["base"]))
    if form == "sum":
        return Added(sequence_from_dict(d["left"]), sequence_from_dict(d["right"]))
    raise ValueError(f"unknown sequence form {form!r}")


# ---------------------------------------------------------------------------
# prefixes and the Cauchy product


@dataclass(frozen=True)
class Prefix:
    """The first N entries of a sequence."""

    values: tuple

    @property
    def N(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n: int) -> SignedLogValue:
        # 1-based, like every other index in this package
        if not 1 <= n <= len(self.values):
            raise IndexError(n)
        return self.values[n - 1]

    def to_floats(self) -> list[float]:
        return [v.to_float() for v in self.values]

    def as_sequence(self) -> FiniteTable:
        return FiniteTable(self.values)

    def __add__(self, other: "Prefix") -> "Prefix":
        return Prefix(tuple(a + b for a, b in zip(self.values, other.values)))

    def scale(self, factor) -> "Prefix":
        return Prefix(tuple(v * factor for v in self.values))


def eval_sequence(seq: ScalarSequence, n: int) -> SignedLogValue:
    if n < 1:
        raise ValueError("index must be >= 1")
    return seq.eval(n)


def cauchy_product_prefix(x: ScalarSequence, y: ScalarSequence, N: int) -> Prefix:
    """Entries c_n = sum_{k=1..n} x_{n+1-k} y_k for n = 1..N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    xs = [x.eval(n) for n in range(1, N + 1)]
    ys = [y.eval(n) for n in range(1, N + 1)]
    xnz = [i for i, v in enumerate(xs) if v.sign]
    ynz = [i for i, v in enumerate(ys) if v.sign]
    out = []
    by_x = len(xnz) <= len(ynz)
    for n in range(N):
        # i + j == n over non-zero entries only; finitely supported inputs stay cheap
        if by_x:
            terms = [xs[i] * ys[n - i] for i in xnz if i <= n and ys[n - i].sign]
        else:
            terms = [xs[n - j] * ys[j] for j in ynz if j <= n and xs[n - j].sign]
        out.append(log_sum(terms))
    return Prefix(tuple(out))


def toeplitz_column(theta: ScalarSequence, n: int, N: int) -> Prefix:
    """Column n of the lower triangular matrix C, rows 1..N: theta_{j-n+1} for j >= n."""
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    return Prefix(tuple(ZERO if j < n else theta.eval(j - n + 1) for j in range(1, N + 1)))


def toeplitz_row(theta: ScalarSequence, n: int, N: int) -> Prefix:
    """Column n of the transpose C^t, rows 1..N: theta_{n+1-i} for i <= n."""
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    return Prefix(tuple(theta.eval(n + 1 - i) if i <= n else ZERO for i in range(1, N + 1)))
