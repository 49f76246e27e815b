import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from koethe_lab.exponents import Linear, PowerLog
from koethe_lab.seqcore import (
    ONE,
    ZERO,
    Added,
    ExpOfExponent,
    Expression,
    FiniteTable,
    Geometric,
    PowerLaw,
    Prefix,
    Scaled,
    SignedLogValue,
    cauchy_product_prefix,
    constant,
    eval_sequence,
    log_sum,
    sequence_from_dict,
    toeplitz_column,
    toeplitz_row,
    unit,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-6)
tables = st.lists(finite_floats, min_size=1, max_size=12).map(lambda v: FiniteTable(tuple(v)))


def floats(p: Prefix):
    return p.to_floats()


def naive(x, y, N):
    return [sum(x[n + 1 - k] * y[k] for k in range(1, n + 1)) for n in range(1, N + 1)]


def seq_values(s, N):
    return {n: s.eval(n).to_float() for n in range(1, N + 1)}


# --- SignedLogValue --------------------------------------------------------


@pytest.mark.parametrize("x", [1e-300, 3.7e-200, 1e-17, 0.1, 1.0, 2.5, 1e17, 6.02e223, 1e300])
def test_round_trip_fixed(x):
    assert abs(SignedLogValue.from_float(x).to_float() - x) <= 1e-14 * x
    assert abs(SignedLogValue.from_float(-x).to_float() + x) <= 1e-14 * x


@given(st.floats(min_value=-300, max_value=300))
def test_round_trip_property(e):
    x = 10.0**e
    assert abs(SignedLogValue.from_float(x).to_float() - x) <= 1e-14 * x


def test_zero_absorbs():
    z = SignedLogValue.from_float(0.0)
    assert z == ZERO and z.sign == 0
    assert (z * SignedLogValue.from_float(5.0)) == ZERO
    assert (SignedLogValue.from_log(800.0) * z) == ZERO
    assert (z + ONE) == ONE


def test_huge_magnitudes_do_not_overflow():
    big = SignedLogValue.from_log(1e4)
    assert (big * big).log == pytest.approx(2e4)
    assert (big / big).to_float() == pytest.approx(1.0)
    assert math.isinf(big.to_float())


@pytest.mark.parametrize(
    "a,b",
    [(3.5, -2.0), (1e-30, 1e30), (-7.25, 7.25), (0.1, 0.2), (5.0, 0.0)],
)
def test_arithmetic_matches_floats(a, b):
    A, B = SignedLogValue.from_float(a), SignedLogValue.from_float(b)
    for got, want in [(A + B, a + b), (A - B, a - b), (A * B, a * b)]:
        assert got.to_float() == pytest.approx(want, rel=1e-14, abs=1e-300)
    if b:
        assert (A / B).to_float() == pytest.approx(a / b, rel=1e-14)


def test_ordering_and_decimal():
    vals = [SignedLogValue.from_float(v) for v in (-3.0, -0.5, 0.0, 1e-9, 2.0)]
    assert sorted(reversed(vals)) == vals
    assert SignedLogValue.from_float(1.0).decimal() == "1.00000e0"
    assert SignedLogValue.from_float(-0.000123456789).decimal() == "-1.23457e-4"
    assert SignedLogValue.from_log(1000 * math.log(10)).decimal() == "1.00000e1000"


def test_dict_round_trip():
    for v in (ZERO, ONE, SignedLogValue.from_float(-1.2345e-67), SignedLogValue.from_log(12345.678)):
        assert SignedLogValue.from_dict(v.to_dict()) == v


@given(st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=30))
def test_log_sum_order_independent(vals):
    terms = [SignedLogValue.from_float(v) for v in vals]
    assert log_sum(terms) == log_sum(list(reversed(terms)))
    exact = float(sum(Fraction(v) for v in vals))
    assert log_sum(terms).to_float() == pytest.approx(exact, rel=1e-12, abs=1e-9)


# --- sequences -------------------------------------------------------------


@pytest.mark.parametrize(
    "seq,n,want",
    [
        (Geometric(0.5), 3, 0.125),
        (FiniteTable((1, 2, 3)), 5, 0.0),
        (PowerLaw(1, 1, 0), 7, 7.0),
        (PowerLaw(2, 1, 1), 3, 6 * math.log(4)),
        (Expression("n**2 - 1"), 4, 15.0),
        (ExpOfExponent(1.0, Linear(1.0)), 2, math.exp(2)),
        (Scaled(-2.0, Geometric(0.5)), 1, -1.0),
        (Added(constant(1.0), unit(2)), 2, 2.0),
        (unit(3), 3, 1.0),
        (unit(3), 2, 0.0),
    ],
)
def test_eval_sequence(seq, n, want):
    assert eval_sequence(seq, n).to_float() == pytest.approx(want, rel=1e-14)


def test_eval_huge_stays_in_log_domain():
    v = eval_sequence(ExpOfExponent(1.0, PowerLog(1.0, 2.0, 0.0)), 1000)
    assert v.sign == 1 and v.log == pytest.approx(1e6)


def test_eval_rejects_index_zero():
    with pytest.raises(ValueError):
        eval_sequence(Geometric(0.5), 0)


@pytest.mark.parametrize(
    "d",
    [
        [1.0, -2.0],
        {"form": "geometric", "r": 0.25},
        {"form": "powerlaw", "c": 2, "p": 1, "q": 0},
        {"form": "expexp", "s": -1, "alpha": {"form": "linear", "c": 1}},
        {"form": "expression", "expr": "1/n"},
        {"form": "unit", "n": 4},
        {"form": "scaled", "factor": 3, "base": {"form": "constant", "c": 1}},
    ],
)
def test_sequence_dict_forms(d):
    s = sequence_from_dict(d)
    again = sequence_from_dict(s.to_dict())
    assert [again.eval(n) for n in range(1, 6)] == [s.eval(n) for n in range(1, 6)]


# --- Cauchy product --------------------------------------------------------


def test_unit_is_identity():
    y = Geometric(-0.3)
    assert floats(cauchy_product_prefix(unit(1), y, 8)) == floats(y.prefix(8))


def test_ones_count():
    assert floats(cauchy_product_prefix(constant(1), constant(1), 4)) == pytest.approx([1, 2, 3, 4], rel=1e-14)


def test_small_table_product():
    assert floats(cauchy_product_prefix(FiniteTable((1, 2, 3)), FiniteTable((4, 5)), 3)) == pytest.approx([4, 13, 22], rel=1e-14)


@given(tables, tables, st.integers(1, 20))
@settings(max_examples=60)
def test_matches_double_loop(x, y, N):
    xs, ys = seq_values(x, N), seq_values(y, N)
    want = naive(xs, ys, N)
    got = floats(cauchy_product_prefix(x, y, N))
    for g, w, n in zip(got, want, range(1, N + 1)):
        scale = sum(abs(xs[n + 1 - k] * ys[k]) for k in range(1, n + 1))
        assert abs(g - w) <= 1e-12 * scale + 1e-300


@given(tables, tables, st.integers(1, 20))
@settings(max_examples=60)
def test_commutative_exactly(x, y, N):
    assert cauchy_product_prefix(x, y, N) == cauchy_product_prefix(y, x, N)


@given(tables, tables, tables, st.integers(1, 12))
@settings(max_examples=40)
def test_associative(x, y, z, N):
    xy = FiniteTable(tuple(floats(cauchy_product_prefix(x, y, N))))
    yz = FiniteTable(tuple(floats(cauchy_product_prefix(y, z, N))))
    lhs = floats(cauchy_product_prefix(xy, z, N))
    rhs = floats(cauchy_product_prefix(x, yz, N))
    # scale: the same triple product with absolute values
    ax, ay, az = (FiniteTable(tuple(abs(v) for v in s.values)) for s in (x, y, z))
    axy = FiniteTable(tuple(floats(cauchy_product_prefix(ax, ay, N))))
    scale = floats(cauchy_product_prefix(axy, az, N))
    for l, r, s in zip(lhs, rhs, scale):
        assert abs(l - r) <= 1e-12 * s + 1e-300


@given(tables, tables, tables, st.integers(1, 12))
@settings(max_examples=40)
def test_distributive(x, y, z, N):
    lhs = floats(cauchy_product_prefix(x, Added(y, z), N))
    rhs = [a + b for a, b in zip(floats(cauchy_product_prefix(x, y, N)), floats(cauchy_product_prefix(x, z, N)))]
    ax = FiniteTable(tuple(abs(v) for v in x.values))
    ayz = FiniteTable(tuple(abs(a) + abs(b) for a, b in zip(
        floats(y.prefix(N)), floats(z.prefix(N)))))
    scale = floats(cauchy_product_prefix(ax, ayz, N))
    for l, r, s in zip(lhs, rhs, scale):
        assert abs(l - r) <= 1e-12 * s + 1e-300


def test_extreme_magnitudes():
    x = ExpOfExponent(1.0, Linear(1.0))  # e^n overflows past n = 709
    y = Geometric(0.5)
    p = cauchy_product_prefix(x, y, 1000)
    # c_n = sum_k e^(n+1-k) 2^-k = e^(n+1) * sum_k (2e)^-k
    n = 1000
    r = 1 / (2 * math.e)
    want = (n + 1) + math.log(r * (1 - r**n) / (1 - r))
    assert p[n].log == pytest.approx(want, rel=1e-14)


# --- Toeplitz structure ----------------------------------------------------


def test_column_examples():
    th = PowerLaw(1, 1, 0)
    assert floats(toeplitz_column(th, 1, 3)) == [1, 2, 3]
    assert floats(toeplitz_column(th, 3, 3)) == [0, 0, 1]
    assert floats(toeplitz_column(th, 2, 4)) == [0, 1, 2, 3]


def test_row_examples():
    th = PowerLaw(1, 1, 0)
    assert floats(toeplitz_row(th, 1, 3)) == [1, 0, 0]
    assert floats(toeplitz_row(th, 3, 3)) == [3, 2, 1]
    assert floats(toeplitz_row(th, 4, 6)) == [4, 3, 2, 1, 0, 0]


@pytest.mark.parametrize("bad", [(0, 3), (4, 3)])
def test_column_index_range(bad):
    with pytest.raises(ValueError):
        toeplitz_column(Geometric(0.5), *bad)
    with pytest.raises(ValueError):
        toeplitz_row(Geometric(0.5), *bad)


@pytest.mark.parametrize("theta", [Geometric(-0.7), PowerLaw(1.5, 2, 1), FiniteTable((0, 3, -1))])
def test_column_is_product_with_unit(theta):
    N = 15
    for n in range(1, N + 1):
        assert toeplitz_column(theta, n, N) == cauchy_product_prefix(theta, unit(n), N)


def test_row_matrix_is_transpose():
    theta = Expression("(-1)**n * exp(n / 3)")
    N = 24
    C = [toeplitz_column(theta, n, N).values for n in range(1, N + 1)]
    Ct = [toeplitz_row(theta, n, N).values for n in range(1, N + 1)]
    for i in range(N):
        for j in range(N):
            assert Ct[j][i] == C[i][j]
