"""Exponent sequences alpha_n used by power series spaces.

Every closed form is non-decreasing in ``n`` and tends to infinity; the
``Table`` form is a finite list and refuses indices past its end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ExponentSequence:
    """Base class; subclasses implement :meth:`values` on index arrays."""

    #: whether the sequence can be evaluated at arbitrarily large ``n``
    unbounded_domain = True

    def values(self, ns) -> np.ndarray:
        raise NotImplementedError

    def value(self, n: int) -> float:
        return float(self.values(np.array([n], dtype=float))[0])

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(ExponentSequence):
    """alpha_n = c * n"""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Linear exponent needs c > 0")

    def values(self, ns):
        return self.c * np.asarray(ns, dtype=float)

    def to_dict(self):
        return {"form": "linear", "c": self.c}


@dataclass(frozen=True)
class Log(ExponentSequence):
    """alpha_n = c * log(n + 1)"""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Log exponent needs c > 0")

    def values(self, ns):
        return self.c * np.log1p(np.asarray(ns, dtype=float))

    def to_dict(self):
        return {"form": "log", "c": self.c}


@dataclass(frozen=True)
class PowerLog(ExponentSequence):
    """alpha_n = c * n**p * log(n + 1)**q with p, q >= 0, not both zero."""

    c: float = 1.0
    p: float = 1.0
    q: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("PowerLog exponent needs c > 0")
        if self.p < 0 or self.q < 0 or (self.p == 0 and self.q == 0):
            raise ValueError("PowerLog exponent needs p, q >= 0, not both zero")

    def values(self, ns):
        ns = np.asarray(ns, dtype=float)
        out = self.c * np.ones_like(ns)
        if self.p:
            out = out * ns**self.p
        if self.q:
            out = out * np.log1p(ns) ** self.q
        return out

    def to_dict(self):
        return {"form": "powerlog", "c": self.c, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class Table(ExponentSequence):
    """Finitely many values alpha_1..alpha_L; indexing past L raises IndexError."""

    entries: tuple

    unbounded_domain = False

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(float(v) for v in self.entries))
        if not self.entries:
            raise ValueError("empty exponent table")

    def values(self, ns):
        idx = np.asarray(ns, dtype=np.int64)
        if idx.size and (idx.min() < 1 or idx.max() > len(self.entries)):
            raise IndexError(
                f"exponent table has {len(self.entries)} entries, asked for index {int(idx.max())}"
            )
        return np.asarray(self.entries)[idx - 1]

    def to_dict(self):
        return {"form": "table", "values": list(self.entries)}


def exponent_from_dict(d: dict) -> ExponentSequence:
    form = d.get("form")
    if form == "linear":
        return Linear(float(d.get("c", 1.0)))
    if form == "log":
        return Log(float(d.get("c", 1.0)))
    if form == "powerlog":
        return PowerLog(float(d.get("c", 1.0)), float(d.get("p", 1.0)), float(d.get("q", 0.0)))
    if form == "table":
        return Table(tuple(d["values"]))
    raise ValueError(f"unknown exponent form {form!r}")
