import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from koethe_lab.exponents import Linear, Log, PowerLog, Table, exponent_from_dict
from koethe_lab.koethe import (
    ExpressionMatrix,
    FiniteType,
    GridRangeError,
    InfiniteType,
    Tabulated,
    check_dual_membership,
    check_G1,
    check_Ginf,
    check_inclusion,
    check_koethe_axioms,
    check_membership,
    check_nuclear,
    entry,
    matrix_from_dict,
    normalize,
    revalidate_relation,
    seminorm_l1,
    seminorm_sup,
)
from koethe_lab.seqcore import (
    ExpOfExponent,
    Expression,
    FiniteTable,
    Geometric,
    PowerLaw,
    constant,
    unit,
)
from koethe_lab.verdicts import BoundPair, Budget, DivergenceTrace, Status

INF_LOG = InfiniteType(Log(1.0))
FIN_LIN = FiniteType(Linear(1.0))
SMALL = Budget(N=400, kmax=4, mmax=12, jmax=12)

MATRICES = [
    INF_LOG,
    FIN_LIN,
    InfiniteType(Linear(0.5)),
    FiniteType(Log(2.0)),
    InfiniteType(PowerLog(1.0, 0.5, 0.0)),
    FiniteType(PowerLog(1.0, 1.0, 1.0)),
    normalize(INF_LOG),
]


# --- entries and axioms ----------------------------------------------------


def test_entry_examples():
    assert entry(INF_LOG, 3, 2).to_float() == pytest.approx(16.0, rel=1e-14)
    assert entry(FIN_LIN, 2, 1).to_float() == pytest.approx(math.exp(-2), rel=1e-14)
    assert entry(normalize(INF_LOG), 5, 1).to_float() == 1.0


@pytest.mark.parametrize("A", MATRICES)
def test_entries_monotone_in_k(A):
    rng = np.random.default_rng(7)
    ns = rng.integers(1, 10_000, size=10_000).astype(float)
    for k in range(1, 6):
        assert np.all(A.log_col(k, ns) <= A.log_col(k + 1, ns))


def test_tabulated_range_error():
    T = Tabulated(((1.0, 2.0), (1.0, 3.0)))
    assert entry(T, 2, 2).to_float() == pytest.approx(3.0)
    with pytest.raises(GridRangeError):
        entry(T, 3, 1)
    with pytest.raises(GridRangeError):
        entry(T, 1, 3)


@pytest.mark.parametrize(
    "d",
    [
        {"class": "infinite", "alpha": {"form": "log"}},
        {"class": "finite", "alpha": {"form": "powerlog", "c": 2, "p": 1, "q": 1}},
        {"class": "expression", "expr": "n * k"},
        {"class": "tabulated", "grid": [[1, 2], [3, 4]]},
        {"class": "normalized", "base": {"class": "infinite", "alpha": {"form": "linear"}}},
    ],
)
def test_matrix_dict_round_trip(d):
    A = matrix_from_dict(d)
    B = matrix_from_dict(A.to_dict())
    ns = np.arange(1, 3, dtype=float)
    assert np.array_equal(A.log_col(2, ns), B.log_col(2, ns))


@pytest.mark.parametrize("bad", [{"class": "hyperbolic"}, {"class": "finite", "alpha": {"form": "cubic"}}])
def test_unknown_classes(bad):
    with pytest.raises(ValueError):
        matrix_from_dict(bad)


def test_exponent_grammar_validation():
    with pytest.raises(ValueError):
        PowerLog(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        Linear(-1.0)
    assert exponent_from_dict({"form": "table", "values": [1, 2]}).value(2) == 2.0
    with pytest.raises(IndexError):
        Table((1.0, 2.0)).value(3)


@pytest.mark.parametrize(
    "A,N,K,status",
    [
        (INF_LOG, 100, 10, Status.HOLDS),
        (ExpressionMatrix("1/k"), 10, 5, Status.FAILS),
        (FIN_LIN, 100, 10, Status.HOLDS),
        (ExpressionMatrix("0*n*k"), 5, 3, Status.FAILS),
    ],
)
def test_axioms(A, N, K, status):
    v = check_koethe_axioms(A, N, K)
    assert v.status is status


def test_axiom_violation_location():
    v = check_koethe_axioms(ExpressionMatrix("1/k"), 10, 5)
    w = v.witnesses[0]
    assert (w.n, w.k) == (1, 1)


def test_axioms_with_gset_extras():
    assert check_koethe_axioms(FIN_LIN, 50, 5, extra="g1").status is Status.HOLDS
    assert check_koethe_axioms(INF_LOG, 50, 5, extra="g1").status is Status.FAILS
    assert check_koethe_axioms(normalize(INF_LOG), 50, 5, extra="ginf").status is Status.HOLDS
    assert check_koethe_axioms(FIN_LIN, 50, 5, extra="ginf").status is Status.FAILS


# --- seminorms -------------------------------------------------------------


def test_geometric_closed_form():
    cv = seminorm_l1(FIN_LIN, 1, constant(1.0))
    want = 1 / (math.e - 1)
    assert cv.certified
    lo, hi = cv.value.to_float(), cv.upper.to_float()
    assert lo <= want + 1e-15 and want <= hi + 1e-15
    assert hi - lo < 1e-9
    assert abs(hi - want) < 1e-9


@pytest.mark.parametrize("A", [INF_LOG, FIN_LIN, InfiniteType(Linear(3.0))])
@pytest.mark.parametrize("k", [1, 3])
def test_unit_vector_seminorms(A, k):
    for cv in (seminorm_l1(A, k, unit(5)), seminorm_sup(A, k, unit(5))):
        assert cv.certified and cv.tail_bound.sign == 0
        assert cv.value == entry(A, 5, k)


def test_zero_vector():
    cv = seminorm_l1(INF_LOG, 2, FiniteTable((0.0,)))
    assert cv.certified and cv.value.sign == 0


def test_sup_examples():
    cv = seminorm_sup(FIN_LIN, 2, constant(1.0))
    assert cv.certified
    assert cv.value.to_float() == pytest.approx(math.exp(-0.5), rel=1e-14)
    div = seminorm_sup(INF_LOG, 1, constant(1.0))
    assert div.divergent and not div.certified


def test_l1_divergence_flag():
    cv = seminorm_l1(INF_LOG, 1, constant(1.0))
    assert cv.divergent and not cv.certified
    idx, vals = cv.trace
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_harmonic_terms_are_not_certified():
    # sum 1/(n+1) diverges slowly: neither certificate nor false convergence
    cv = seminorm_l1(FiniteType(Log(1.0)), 1, constant(1.0))
    assert not cv.certified


def test_power_tail_bound_is_sound():
    # sum_n (n+1)^-3 = zeta(3) - 1
    cv = seminorm_l1(normalize(INF_LOG), 1, PowerLaw(1.0, -3.0, 0.0) if False else Expression("(n+1)**-3"))
    want = 1.2020569031595942 - 1
    assert cv.certified
    assert cv.value.to_float() <= want <= cv.upper.to_float()


seqs = st.sampled_from([constant(1.0), Geometric(0.9), Geometric(-0.5), unit(3), FiniteTable((1, -4, 2)),
                        Expression("sin(n)"), PowerLaw(2.0, 1.0, 0.0)])


@given(seqs, st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_seminorm_monotone_and_sup_below_l1(x, k):
    for l1a, l1b in [(seminorm_l1(FIN_LIN, k, x), seminorm_l1(FIN_LIN, k + 1, x))]:
        if l1a.certified and l1b.certified:
            assert l1a.value <= l1b.value
    s, l = seminorm_sup(FIN_LIN, k, x), seminorm_l1(FIN_LIN, k, x)
    if s.certified and l.certified:
        assert s.value <= l.upper


# --- nuclearity ------------------------------------------------------------


def test_nuclear_infinite_log_needs_two_steps():
    v = check_nuclear(INF_LOG, use_symbolic=False)
    assert v.status is Status.HOLDS
    assert [(w.k, w.m) for w in v.bound_pairs()] == [(k, k + 2) for k in range(1, 9)]


def test_nuclear_finite_linear():
    v = check_nuclear(FIN_LIN, use_symbolic=False)
    assert v.status is Status.HOLDS
    # the search reports the smallest m; the symbolic selector m = 2k is also valid
    assert all(w.m == w.k + 1 for w in v.bound_pairs())


def test_nuclear_constant_matrix_fails():
    v = check_nuclear(ExpressionMatrix("k"), SMALL)
    assert v.status is Status.FAILS
    for w in v.witnesses:
        assert isinstance(w, DivergenceTrace)
        assert all(b > a for a, b in zip(w.values, w.values[1:]))


def test_nuclear_fails_only_symbolically_for_slow_divergence():
    A = FiniteType(Log(1.0))
    assert check_nuclear(A, SMALL, use_symbolic=False).status is Status.INCONCLUSIVE
    v = check_nuclear(A, SMALL)
    assert v.status is Status.FAILS and v.notes


def test_nuclear_log_scale_half():
    v = check_nuclear(InfiniteType(Log(0.5)), SMALL)
    assert [w.m - w.k for w in v.bound_pairs()] == [3] * SMALL.kmax


# --- G-sets ----------------------------------------------------------------


@pytest.mark.parametrize("B", [FIN_LIN, FiniteType(Log(1.0)), FiniteType(PowerLog(2.0, 1.0, 1.0))])
def test_g1_doubling(B):
    v = check_G1(B, SMALL)
    assert v.status is Status.HOLDS
    for w in v.bound_pairs():
        assert w.m == 2 * w.k
        assert abs(w.C.log) < 1e-12


def test_g1_rejects_infinite_type():
    v = check_G1(INF_LOG, SMALL)
    assert v.status is Status.FAILS
    assert "< 1" in v.witnesses[0].condition


def test_ginf_normalized_infinite_type():
    v = check_Ginf(INF_LOG, SMALL, normalize_first=True)
    assert v.status is Status.HOLDS
    assert [w.m for w in v.bound_pairs()] == [2 * k - 1 for k in range(1, SMALL.kmax + 1)]


def test_ginf_rejects_unnormalized_and_finite():
    assert check_Ginf(INF_LOG, SMALL).status is Status.FAILS
    assert check_Ginf(FIN_LIN, SMALL).status is Status.FAILS


def test_ginf_identity_grid():
    T = Tabulated(tuple((1.0,) * 6 for _ in range(50)))
    v = check_Ginf(T, Budget(N=50, kmax=6, mmax=6, jmax=6))
    assert v.status is Status.HOLDS
    assert all(w.m == w.k and w.C.log == 0 for w in v.bound_pairs())


# --- inclusion, membership, dual -------------------------------------------


def test_inclusion_infinite_into_finite():
    v = check_inclusion(INF_LOG, FIN_LIN, SMALL)
    assert v.status is Status.HOLDS
    assert all(w.C.to_float() <= 1.0 for w in v.bound_pairs())


def test_inclusion_reverse_fails_with_trace():
    v = check_inclusion(FIN_LIN, INF_LOG, SMALL)
    assert v.status is Status.FAILS
    tr = [w for w in v.witnesses if isinstance(w, DivergenceTrace)]
    assert tr and all(all(b > a for a, b in zip(t.values, t.values[1:])) for t in tr)


@pytest.mark.parametrize("A", [INF_LOG, FIN_LIN, InfiniteType(PowerLog(1.0, 0.5, 0.0))])
def test_inclusion_reflexive(A):
    v = check_inclusion(A, A, SMALL)
    assert v.status is Status.HOLDS
    assert all(w.m == w.k and w.C.log == 0 for w in v.bound_pairs())


@pytest.mark.parametrize(
    "theta,status",
    [
        (constant(1.0), Status.HOLDS),
        (ExpOfExponent(1.0, PowerLog(1.0, 2.0, 0.0)), Status.FAILS),
        (FiniteTable((3.0, -1.0, 7.0)), Status.HOLDS),
        (Geometric(2.0), Status.FAILS),
    ],
)
def test_membership(theta, status):
    assert check_membership(theta, FIN_LIN, SMALL).status is status


@pytest.mark.parametrize(
    "theta,A,status,k",
    [
        (Expression("(n+1)**3"), INF_LOG, Status.HOLDS, 3),
        (ExpOfExponent(1.0, Linear(1.0)), INF_LOG, Status.FAILS, None),
        (Expression("sin(n)"), INF_LOG, Status.HOLDS, 1),
        (PowerLaw(1.0, 3.0, 0.0), normalize(INF_LOG), Status.HOLDS, 4),
    ],
)
def test_dual_membership(theta, A, status, k):
    v = check_dual_membership(theta, A, SMALL)
    assert v.status is status
    if k is not None:
        assert v.witnesses[0].k == k


# --- certificate soundness -------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: (check_nuclear(INF_LOG, SMALL), INF_LOG, None, None),
        lambda: (check_G1(FIN_LIN, SMALL), FIN_LIN, None, None),
        lambda: (check_Ginf(normalize(INF_LOG), SMALL), normalize(INF_LOG), None, None),
        lambda: (check_inclusion(INF_LOG, FIN_LIN, SMALL), INF_LOG, FIN_LIN, None),
        lambda: (check_membership(Geometric(0.5), FIN_LIN, SMALL), FIN_LIN, None, Geometric(0.5)),
        lambda: (check_dual_membership(PowerLaw(1, 2, 0), INF_LOG, SMALL), INF_LOG, None, PowerLaw(1, 2, 0)),
    ],
)
def test_witnesses_revalidate(make):
    v, A, B, theta = make()
    assert v.status is Status.HOLDS
    for w in v.bound_pairs():
        assert revalidate_relation(w, A, B, theta)


def test_tampered_witness_is_rejected():
    v = check_inclusion(INF_LOG, FIN_LIN, SMALL)
    w = v.bound_pairs()[0]
    from koethe_lab.seqcore import SignedLogValue

    bad = BoundPair(w.k, w.m, SignedLogValue.from_float(1e-300), w.verified_up_to, w.tail, w.relation)
    assert not revalidate_relation(bad, INF_LOG, FIN_LIN)
