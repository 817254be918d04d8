import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exactcp import (CandidatePoint, LabeledPoint, PlausibilityValue, Sample, ScanSpec,
                     critical_count, nonconformity_scores, plausibility,
                     plausibility_unsupervised, region_oracle, region_oracle_unsupervised,
                     threshold)
from exactcp.core import plausibility_profile, unsupervised_scores
from exactcp.exceptions import DimensionError, NonFiniteScoreError, ScanWindowError
from exactcp.measures import (PolynomialSupervisedParams, PolynomialUnsupervisedParams,
                              UPPER_PARAMS, catalog_entry, counterexample_catalog,
                              polynomial_supervised, polynomial_unsupervised)
from exactcp.regions import FULL_LINE, LEFT_RAY, UNION


def brute_count(sample, x_new, y, measure):
    """Leave-one-out scores evaluated point by point, no shared code path."""
    X = [tuple(r) for r in sample.X] + [tuple(x_new)]
    Y = list(sample.y) + [y]
    mus = []
    for i in range(len(Y)):
        bx = np.array([X[j] for j in range(len(Y)) if j != i])
        by = np.array([Y[j] for j in range(len(Y)) if j != i])
        mus.append(measure.evaluator(bx, by, np.array(X[i]), Y[i]))
    return sum(m >= mus[-1] for m in mus)


# --- domain types --------------------------------------------------------------


def test_labeled_point_rejects_non_finite():
    with pytest.raises(ValueError):
        LabeledPoint((1.0, math.nan), 0.0)
    with pytest.raises(ValueError):
        LabeledPoint((1.0,), math.inf)


def test_sample_from_points_round_trip():
    pts = [LabeledPoint((1.0, 2.0), 3.0), LabeledPoint((4.0, 5.0), 6.0)]
    s = Sample.from_points(pts)
    assert s.n == 2 and s.p == 2
    assert s.points == tuple(pts)


def test_sample_rejects_ragged_and_empty():
    with pytest.raises((ValueError, DimensionError)):
        Sample.from_points([LabeledPoint((1.0,), 0.0), LabeledPoint((1.0, 2.0), 0.0)])
    with pytest.raises((ValueError, DimensionError)):
        Sample(np.zeros((0, 1)), np.zeros(0))


def test_sample_arrays_are_read_only():
    s = Sample(np.zeros((2, 1)), np.ones(2))
    with pytest.raises(ValueError):
        s.y[0] = 5.0


def test_plausibility_value_bounds():
    with pytest.raises(ValueError):
        PlausibilityValue(0, 4)
    with pytest.raises(ValueError):
        PlausibilityValue(5, 4)
    v = PlausibilityValue(3, 4)
    assert v.as_fraction() == Fraction(3, 4)
    assert v.exceeds(0.5) and not v.exceeds(0.75)


# --- threshold --------------------------------------------------------------------


@pytest.mark.parametrize("n, alpha, expected", [
    (9, 0.3, Fraction(3, 10)),
    (1000, 0.1, Fraction(100, 1001)),
    (4, 0.5, Fraction(2, 5)),
])
def test_threshold_examples(n, alpha, expected):
    assert threshold(n, alpha) == float(expected)


def test_critical_count_uses_decimal_alpha():
    # 0.29 * 100 is 28.999... in binary floating point
    assert critical_count(99, 0.29) == 29
    assert critical_count(9, 0.1) == 1


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
def test_threshold_rejects_alpha_outside_unit_interval(alpha):
    with pytest.raises(ValueError):
        threshold(5, alpha)


@given(st.integers(1, 500), st.integers(1, 99))
def test_exceeds_alpha_iff_count_exceeds_critical(n, pct):
    alpha = pct / 100
    m = critical_count(n, alpha)
    for k in range(1, n + 2):
        assert PlausibilityValue(k, n + 1).exceeds(alpha) == (k > m)


# --- scores and plausibility ---------------------------------------------------------


def test_identical_points_give_equal_scores():
    s = Sample(np.ones((3, 2)), np.full(3, 4.0))
    for entry in counterexample_catalog():
        if entry.kind != "supervised" or entry.evaluation_only:
            continue
        mu = nonconformity_scores(s, CandidatePoint((1.0, 1.0), 4.0), entry.measure)
        assert np.all(mu == mu[0])


def test_example_two_scores_by_hand():
    ce2 = catalog_entry("ce2").measure
    s = Sample(np.array([[0.5], [1.5]]), np.array([1.0, 2.0]))
    cand = CandidatePoint((2.5,), 0.0)
    mu = nonconformity_scores(s, cand, ce2)
    X, Y = [0.5, 1.5, 2.5], [1.0, 2.0, 0.0]
    for i in range(3):
        others = [j for j in range(3) if j != i]
        by_hand = sum(X) + sum(Y[j] ** 2 for j in others) + Y[i] ** 2 + Y[i]
        assert mu[i] == pytest.approx(by_hand, abs=1e-12)
    # the squared terms add up to the same total for every i
    np.testing.assert_allclose(mu[:2] - mu[2], [1.0, 2.0], atol=1e-12)


def test_polynomial_measure_scores_by_hand():
    m = polynomial_supervised(PolynomialSupervisedParams(beta1=1.0, beta2=0.0, gamma=-1.0, eta=0.0))
    s = Sample(np.array([[1.0], [2.0]]), np.array([5.0, 7.0]))
    mu = nonconformity_scores(s, CandidatePoint((3.0,), 6.0), m)
    # with eta = 0, mu_i = y_i - x_i
    np.testing.assert_allclose(mu, [4.0, 5.0, 3.0])


def test_all_ties_give_plausibility_one():
    s = Sample(np.zeros((4, 1)), np.zeros(4))
    pl = plausibility(s, CandidatePoint((0.0,), 0.0), polynomial_supervised(UPPER_PARAMS))
    assert pl.count == 5 and pl.value == 1.0


def test_strictly_worst_candidate_gets_minimum():
    s = Sample(np.zeros((4, 1)), np.arange(4.0))
    # upper measure: larger y is less conforming
    pl = plausibility(s, CandidatePoint((0.0,), 100.0), polynomial_supervised(UPPER_PARAMS))
    assert pl.count == 1 and pl.value == pytest.approx(1 / 5)


def test_example_two_plausibility():
    ce2 = catalog_entry("ce2").measure
    s = Sample(np.zeros((3, 1)), np.array([3.0, 1.0, 2.0]))
    pl = plausibility(s, CandidatePoint((0.0,), 1.5), ce2)
    assert pl.as_fraction() == Fraction(3, 4)


def test_unsupervised_examples():
    assert plausibility_unsupervised([2.0, 2.0, 2.0], 2.0,
                                     polynomial_unsupervised(PolynomialUnsupervisedParams(0, 1, -1))).value == 1
    upper = polynomial_unsupervised(PolynomialUnsupervisedParams(0.0, 1.0, -1.0))
    assert plausibility_unsupervised([1.0, 2.0, 3.0], 2.5, upper).as_fraction() == Fraction(2, 4)


def test_min_based_unsupervised_against_inequality_chain():
    ce1u = catalog_entry("ce1u").measure
    values, cand = np.array([0.0, 10.0]), 5.0
    pl = plausibility_unsupervised(values, cand, ce1u)
    # scores: min of the other two plus the point itself
    full = [0.0, 10.0, 5.0]
    mus = [min(full[:i] + full[i + 1:]) + full[i] for i in range(3)]
    assert pl.count == sum(m >= mus[2] for m in mus)


def test_dimension_mismatch():
    s = Sample(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(DimensionError):
        nonconformity_scores(s, CandidatePoint((0.0,), 0.0), polynomial_supervised(UPPER_PARAMS))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_scores_raise():
    m = polynomial_supervised(PolynomialSupervisedParams(0.0, 1.0, 0.0, 0.0))
    s = Sample(np.zeros((2, 1)), np.array([1e200, 1.0]))
    with pytest.raises(NonFiniteScoreError):
        nonconformity_scores(s, CandidatePoint((0.0,), 0.0), m)


def test_kind_mismatch_rejected():
    with pytest.raises(TypeError):
        unsupervised_scores([1.0, 2.0], 0.0, polynomial_supervised(UPPER_PARAMS))


@st.composite
def small_sample(draw, p=1):
    n = draw(st.integers(2, 8))
    vals = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    X = np.array(draw(st.lists(st.lists(vals, min_size=p, max_size=p), min_size=n, max_size=n)))
    y = np.array(draw(st.lists(vals, min_size=n, max_size=n)))
    x_new = np.array(draw(st.lists(vals, min_size=p, max_size=p)))
    cand = draw(vals)
    return Sample(X, y), x_new, cand


SUPERVISED_ENTRIES = [e for e in counterexample_catalog() if e.kind == "supervised" and not e.evaluation_only]


@given(small_sample(), st.randoms())
def test_self_inclusion_and_bag_symmetry(data, rnd):
    sample, x_new, cand = data
    order = list(range(sample.n))
    rnd.shuffle(order)
    perm = sample.permuted(order)
    c = CandidatePoint(tuple(x_new), cand)
    for entry in SUPERVISED_ENTRIES + [None]:
        measure = polynomial_supervised(UPPER_PARAMS) if entry is None else entry.measure
        mu = nonconformity_scores(sample, c, measure)
        mu_p = nonconformity_scores(perm, c, measure)
        assert np.array_equal(mu[:-1][order], mu_p[:-1])
        assert mu[-1] == mu_p[-1]
        pl = plausibility(sample, c, measure)
        assert pl.count >= 1
        assert pl == plausibility(perm, c, measure)


@st.composite
def dyadic_sample(draw, p=1):
    # multiples of 1/64 in [-10, 10]: every score is computed without rounding
    n = draw(st.integers(2, 8))
    vals = st.integers(-640, 640).map(lambda k: k / 64)
    X = np.array(draw(st.lists(st.lists(vals, min_size=p, max_size=p), min_size=n, max_size=n)))
    y = np.array(draw(st.lists(vals, min_size=n, max_size=n)))
    return Sample(X, y), np.array(draw(st.lists(vals, min_size=p, max_size=p))), draw(vals)


@given(dyadic_sample())
def test_vectorised_profile_matches_literal_scores_exact_ties(data):
    sample, x_new, cand = data
    for entry in SUPERVISED_ENTRIES:
        k = plausibility_profile(sample, x_new, entry.measure, [cand])[0]
        assert k == brute_count(sample, x_new, cand, entry.measure)
        assert k == plausibility(sample, CandidatePoint(tuple(x_new), cand), entry.measure).count


@given(small_sample())
def test_vectorised_profile_matches_literal_scores(data):
    # with arbitrary floats, comparisons closer than rounding error are undecidable
    sample, x_new, cand = data
    c = CandidatePoint(tuple(x_new), cand)
    for entry in SUPERVISED_ENTRIES:
        mu = nonconformity_scores(sample, c, entry.measure)
        gap = np.abs(mu[:-1] - mu[-1])
        if np.any(gap <= 16 * np.spacing(np.max(np.abs(mu)))):
            continue
        k = plausibility_profile(sample, x_new, entry.measure, [cand])[0]
        assert k == brute_count(sample, x_new, cand, entry.measure)
        assert k == plausibility(sample, c, entry.measure).count


# --- oracle -----------------------------------------------------------------------------


def test_oracle_upper_on_unit_data(unit_sample):
    r = region_oracle(unit_sample, [0.0], polynomial_supervised(UPPER_PARAMS), 0.25)
    assert r.kind == LEFT_RAY
    assert r.upper == pytest.approx(8.0, abs=1e-8)
    assert r.intervals[0].upper_closed


def test_oracle_at_m_equal_one_keeps_strict_membership():
    # floor(6 * 0.2) = 1: the single least-conforming candidate is still excluded
    s = Sample(np.zeros((5, 1)), np.arange(1.0, 6.0))
    measure = polynomial_supervised(UPPER_PARAMS)
    r = region_oracle(s, [0.0], measure, 0.2)
    assert r.kind == LEFT_RAY and r.upper == pytest.approx(5.0, abs=1e-8)
    assert brute_count(s, [0.0], 5.5, measure) == 1


def test_oracle_full_line_when_m_is_zero():
    s = Sample(np.zeros((5, 1)), np.arange(1.0, 6.0))
    r = region_oracle(s, [0.0], polynomial_supervised(UPPER_PARAMS), 0.1)
    assert r.kind == FULL_LINE


def test_oracle_two_rays_for_monotone_quadratic_bag(rng):
    s = Sample(rng.normal(size=(12, 1)), rng.normal(size=12))
    r = region_oracle(s, [0.3], catalog_entry("ce4").measure, 0.3)
    assert r.kind == UNION and len(r.gaps()) == 1


def test_oracle_is_deterministic(rng):
    s = Sample(rng.normal(size=(10, 1)), rng.normal(size=10))
    scan = ScanSpec(-40, 40, 2048, 1e-10)
    m = catalog_entry("ce1").measure
    assert region_oracle(s, [0.1], m, 0.3, scan) == region_oracle(s, [0.1], m, 0.3, scan)


def test_oracle_flags_window_that_cuts_the_region(unit_sample):
    # membership changes at 8, far beyond this window on the left edge side
    with pytest.raises(ScanWindowError):
        region_oracle(unit_sample, [0.0], polynomial_supervised(UPPER_PARAMS), 0.25,
                      ScanSpec(20.0, 30.0, 64))


def test_unsupervised_oracle_order_statistic():
    upper = polynomial_unsupervised(PolynomialUnsupervisedParams(0.0, 1.0, -1.0))
    r = region_oracle_unsupervised(np.arange(1.0, 10.0), upper, 0.25)
    assert r.kind == LEFT_RAY and r.upper == pytest.approx(8.0, abs=1e-8)


def test_scan_spec_validation():
    with pytest.raises(ValueError):
        ScanSpec(1.0, 1.0)
    with pytest.raises(ValueError):
        ScanSpec(0.0, 1.0, grid_size=1)
    spec = ScanSpec.around([3.0, 3.0])
    assert (spec.lower, spec.upper) == (-7.0, 13.0)


def test_oracle_clips_restricted_domain_to_window():
    from exactcp.measures import catalog_entry
    s = Sample(np.zeros((9, 1)), np.linspace(-1.5, 1.5, 9))
    reg = region_oracle(s, [0.0], catalog_entry("ce9").measure, 0.25, ScanSpec(-1.9, 1.9))
    assert reg.kind == "bounded" and reg.lower == -1.9
    assert reg.intervals[0].lower_closed
