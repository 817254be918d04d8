"""Nonconformity measures: the two polynomial families and the counterexamples.

Every catalog entry carries the comparison predicate claimed for it, written
directly over the raw responses so it can be checked against computed scores
without sharing any code path with them.

Literal evaluators sum with :func:`math.fsum`, so they are bit-for-bit
invariant to bag order and mathematically tied scores stay tied in floating
point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    SUPERVISED,
    UNSUPERVISED,
    MeasureSpec,
    Sample,
    critical_count,
)
from .exceptions import DomainError
from .regions import Interval, PredictionRegion


@dataclass(frozen=True)
class PolynomialSupervisedParams:
    beta1: float
    beta2: float
    gamma: float
    eta: float

    def __post_init__(self):
        for name in ("beta1", "beta2", "gamma", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class PolynomialUnsupervisedParams:
    lam: float
    theta: float
    kappa: float

    def __post_init__(self):
        for name in ("lam", "theta", "kappa"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


# presets with closed-form regions
UPPER_PARAMS = PolynomialSupervisedParams(beta1=1.0, beta2=0.0, gamma=-1.0, eta=0.0)
LOWER_PARAMS = PolynomialSupervisedParams(beta1=-1.0, beta2=0.0, gamma=1.0, eta=0.0)
UPPER_UNSUP_PARAMS = PolynomialUnsupervisedParams(lam=0.0, theta=1.0, kappa=-1.0)
LOWER_UNSUP_PARAMS = PolynomialUnsupervisedParams(lam=0.0, theta=-1.0, kappa=1.0)


def bounded_params(eta: float) -> PolynomialSupervisedParams:
    return PolynomialSupervisedParams(beta1=0.0, beta2=1.0, gamma=-1.0, eta=eta)


def bounded_unsup_params(kappa: float) -> PolynomialUnsupervisedParams:
    return PolynomialUnsupervisedParams(lam=1.0, theta=0.0, kappa=kappa)


def polynomial_supervised(params: PolynomialSupervisedParams) -> MeasureSpec:
    """Degree-two polynomial measure over a labeled bag.

    ``M(B, (x, y)) = beta2*y**2 + beta1*y
    + gamma*(sum(x) + eta*sum_i(y_i - sum_j x_ij))``
    """
    b1, b2, g, eta = params.beta1, params.beta2, params.gamma, params.eta

    def evaluator(bag_X, bag_y, x, y):
        residual_sum = math.fsum(np.concatenate([bag_y, -bag_X.ravel()]))
        inner = math.fsum(x) + eta * residual_sum
        return math.fsum([b2 * y * y, b1 * y, g * inner])

    def batch(X_all, Y):
        S = X_all.sum(axis=1)
        R = Y - S
        T = R.sum(axis=1, keepdims=True)
        return b2 * Y * Y + b1 * Y + g * (S + eta * (T - R))

    return MeasureSpec(
        label="poly-sup",
        evaluator=evaluator,
        kind=SUPERVISED,
        params={"beta1": b1, "beta2": b2, "gamma": g, "eta": eta},
        batch=batch,
    )


def polynomial_unsupervised(params: PolynomialUnsupervisedParams) -> MeasureSpec:
    """``M(B, x) = lam*x**2 + theta*x + kappa*sum(B)``."""
    lam, theta, kappa = params.lam, params.theta, params.kappa

    def evaluator(bag, x):
        return math.fsum([lam * x * x, theta * x, kappa * math.fsum(bag)])

    def batch(V):
        T = V.sum(axis=1, keepdims=True)
        return lam * V * V + theta * V + kappa * (T - V)

    return MeasureSpec(
        label="poly-unsup",
        evaluator=evaluator,
        kind=UNSUPERVISED,
        params={"lambda": lam, "theta": theta, "kappa": kappa},
        batch=batch,
    )


# ---------------------------------------------------------------------------
# helpers shared by the counterexample measures
# ---------------------------------------------------------------------------


def _feature_total(bag_X, x):
    return list(bag_X.ravel()) + list(np.ravel(x))


def _min_excluding_self(Y):
    """Row-wise ``min_{j != i} Y[:, j]`` for every column ``i``."""
    if Y.shape[1] == 1:
        return np.full_like(Y, np.inf)
    two = np.partition(Y, 1, axis=1)[:, :2]
    first, second = two[:, :1], two[:, 1:2]
    is_min = np.arange(Y.shape[1])[None, :] == np.argmin(Y, axis=1)[:, None]
    return np.where(is_min, second, first)


def _others_min(values, i):
    others = np.delete(np.asarray(values, dtype=float), i)
    return float(others.min()) if others.size else math.inf


_CE9_LIMIT = 2.0


def _ce9_domain(ys):
    if np.any(np.abs(ys) > _CE9_LIMIT):
        raise DomainError(f"ce9 is only evaluated for |y| <= {_CE9_LIMIT}; exp(y**8) overflows beyond")


def _ce9_g(y):
    pos = np.maximum(0.0, y)
    return np.exp(pos ** 8) + pos


# ---------------------------------------------------------------------------
# supervised counterexamples (p features, response y)
# ---------------------------------------------------------------------------


def _ce1_measure() -> MeasureSpec:
    def evaluator(bag_X, bag_y, x, y):
        return math.fsum(_feature_total(bag_X, x) + [float(np.min(bag_y)), y])

    def batch(X_all, Y):
        C = math.fsum(X_all.ravel())
        return C + (_min_excluding_self(Y) + Y)

    return MeasureSpec("ce1", evaluator, SUPERVISED, batch=batch)


def _ce2_measure() -> MeasureSpec:
    def evaluator(bag_X, bag_y, x, y):
        return math.fsum(_feature_total(bag_X, x) + list(bag_y * bag_y) + [y * y, y])

    def batch(X_all, Y):
        C = math.fsum(X_all.ravel())
        Q = (Y * Y).sum(axis=1, keepdims=True)
        return (C + Q) + Y

    return MeasureSpec("ce2", evaluator, SUPERVISED, batch=batch)


def _ce4_measure() -> MeasureSpec:
    def evaluator(bag_X, bag_y, x, y):
        return math.fsum(_feature_total(bag_X, x) + list(bag_y * bag_y) + [y])

    def batch(X_all, Y):
        C = math.fsum(X_all.ravel())
        Q = (Y * Y).sum(axis=1, keepdims=True)
        return (C + Q) + (Y - Y * Y)

    return MeasureSpec("ce4", evaluator, SUPERVISED, batch=batch)


def _ce9_measure() -> MeasureSpec:
    def evaluator(bag_X, bag_y, x, y):
        _ce9_domain(np.append(bag_y, y))
        return math.fsum(_feature_total(bag_X, x) + [float(_ce9_g(y))])

    def batch(X_all, Y):
        _ce9_domain(Y)
        return math.fsum(X_all.ravel()) + _ce9_g(Y)

    return MeasureSpec("ce9", evaluator, SUPERVISED, batch=batch, domain=_ce9_domain)


# unsupervised twins -------------------------------------------------------


def _ce1u_measure() -> MeasureSpec:
    def evaluator(bag, x):
        return float(np.min(bag)) + x

    def batch(V):
        return _min_excluding_self(V) + V

    return MeasureSpec("ce1u", evaluator, UNSUPERVISED, batch=batch)


def _ce2u_measure() -> MeasureSpec:
    def evaluator(bag, x):
        return math.fsum(list(bag * bag) + [x * x, x])

    def batch(V):
        return (V * V).sum(axis=1, keepdims=True) + V

    return MeasureSpec("ce2u", evaluator, UNSUPERVISED, batch=batch)


def _ce4u_measure() -> MeasureSpec:
    def evaluator(bag, x):
        return math.fsum(list(bag * bag) + [x])

    def batch(V):
        return (V * V).sum(axis=1, keepdims=True) + (V - V * V)

    return MeasureSpec("ce4u", evaluator, UNSUPERVISED, batch=batch)


# ---------------------------------------------------------------------------
# claims: comparison predicates over raw data
# ---------------------------------------------------------------------------
# Each claim answers "is mu_i >= mu_{n+1}?" for a training index i (0-based)
# using only the responses and the candidate value.


def _claim_min_based(values, candidate, i):
    m_i = _others_min(values, i)
    y_i = float(values[i])
    if m_i >= candidate:
        return True
    # fsum keeps y_i + m_i - min(m_i, y_i) exact at ties
    return m_i < candidate <= math.fsum((y_i, m_i, -min(m_i, y_i)))


def _claim_below(values, candidate, i):
    return candidate <= float(values[i])


def _claim_two_rays(values, candidate, i):
    y_i = float(values[i])
    lo, hi = min(y_i, 1.0 - y_i), max(y_i, 1.0 - y_i)
    return candidate <= lo or candidate >= hi


def _supervised(claim):
    def wrapped(sample: Sample, candidate, i):
        return claim(sample.y, float(candidate.provisional_response), i)

    wrapped.__doc__ = claim.__doc__
    return wrapped


def _unsupervised(claim):
    def wrapped(values, candidate, i):
        return claim(np.asarray(values, dtype=float), float(candidate), i)

    return wrapped


# region claims: closed forms the examples derive for each measure ----------


def _ray_at_order_stat(a, m):
    if m == 0:
        return PredictionRegion.full_line()
    a = np.sort(np.asarray(a, dtype=float), kind="stable")
    return PredictionRegion.left_ray(float(a[a.shape[0] - m]), closed=True)


def _consolidated_shift(values):
    values = np.asarray(values, dtype=float)
    overall = values.min()
    return np.array([values[i] + _others_min(values, i) - overall
                     if values.shape[0] > 1 else values[i]
                     for i in range(values.shape[0])])


def _two_ray_region(values, m):
    if m == 0:
        return PredictionRegion.full_line()
    h = np.sort(np.abs(np.asarray(values, dtype=float) - 0.5), kind="stable")[m - 1]
    if h == 0.0:
        return PredictionRegion.full_line()
    return PredictionRegion((Interval(-math.inf, 0.5 - h, upper_closed=True),
                             Interval(0.5 + h, math.inf, lower_closed=True)))


def _region_below_order_stat(values, alpha):
    return _ray_at_order_stat(values, critical_count(len(values), alpha))


def _region_min_based(values, alpha):
    return _ray_at_order_stat(_consolidated_shift(values), critical_count(len(values), alpha))


def _region_two_rays(values, alpha):
    return _two_ray_region(values, critical_count(len(values), alpha))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

INCREASING = "increasing"
DECREASING = "decreasing"
NON_MONOTONE = "non-monotone"
CONSTANT = "constant"


@dataclass(frozen=True)
class CatalogEntry:
    """A counterexample measure with the claims made about it.

    ``claim(data, candidate, i)`` predicts ``mu_i >= mu_{n+1}``;
    ``region_claim(values, alpha)`` is the closed-form region (responses or
    raw values only), and ``monotonicity`` the label the measure is known by.
    """

    id: str
    measure: MeasureSpec
    claim: Callable | None
    region_claim: Callable | None
    monotonicity: str
    description: str
    evaluation_only: bool = False
    alias_of: str | None = None

    @property
    def kind(self) -> str:
        return self.measure.kind


def counterexample_catalog() -> list[CatalogEntry]:
    """All counterexample measures, supervised then unsupervised."""
    ce1, ce2, ce4 = _ce1_measure(), _ce2_measure(), _ce4_measure()
    ce1u, ce2u, ce4u = _ce1u_measure(), _ce2u_measure(), _ce4u_measure()
    return [
        CatalogEntry("ce1", ce1, _supervised(_claim_min_based), None, INCREASING,
                     "sum(x) + min(bag responses) + y: monotone without a one-sided threshold"),
        CatalogEntry("ce2", ce2, _supervised(_claim_below), _region_below_order_stat, NON_MONOTONE,
                     "sum(x) + sum(bag y^2) + y^2 + y: not monotone, mu_i >= mu_{n+1} iff y <= y_i"),
        CatalogEntry("ce4", ce4, _supervised(_claim_two_rays), _region_two_rays, INCREASING,
                     "sum(x) + sum(bag y^2) + y: monotone, region is two rays"),
        CatalogEntry("ce5", ce1, _supervised(_claim_min_based), _region_min_based, INCREASING,
                     "ce1 with its one-sided closed-form region", alias_of="ce1"),
        CatalogEntry("ce9", _ce9_measure(), None, None, INCREASING,
                     "sum(x) + exp(max(0,y)^8) + max(0,y): monotone, no closed form known",
                     evaluation_only=True),
        CatalogEntry("ce1u", ce1u, _unsupervised(_claim_min_based), None, INCREASING,
                     "min(bag) + x"),
        CatalogEntry("ce2u", ce2u, _unsupervised(_claim_below), _region_below_order_stat, NON_MONOTONE,
                     "sum(bag^2) + x^2 + x"),
        CatalogEntry("ce4u", ce4u, _unsupervised(_claim_two_rays), _region_two_rays, INCREASING,
                     "sum(bag^2) + x"),
        CatalogEntry("ce5u", ce1u, _unsupervised(_claim_min_based), _region_min_based, INCREASING,
                     "ce1u with its one-sided closed-form region", alias_of="ce1u"),
    ]


def catalog_entry(entry_id: str) -> CatalogEntry:
    for entry in counterexample_catalog():
        if entry.id == entry_id:
            return entry
    raise KeyError(f"unknown catalog entry {entry_id!r}")


_POLY_IDS = {
    "poly-sup-upper": lambda eta: polynomial_supervised(
        PolynomialSupervisedParams(1.0, 0.0, -1.0, 0.0 if eta is None else eta)),
    "poly-sup-lower": lambda eta: polynomial_supervised(
        PolynomialSupervisedParams(-1.0, 0.0, 1.0, 0.0 if eta is None else eta)),
    "poly-sup-bounded": lambda eta: polynomial_supervised(bounded_params(eta)),
    "poly-unsup-upper": lambda _: polynomial_unsupervised(UPPER_UNSUP_PARAMS),
    "poly-unsup-lower": lambda _: polynomial_unsupervised(LOWER_UNSUP_PARAMS),
    "poly-unsup-bounded": lambda kappa: polynomial_unsupervised(bounded_unsup_params(kappa)),
}

MEASURE_IDS = tuple(_POLY_IDS) + tuple(e.id for e in counterexample_catalog())


def get_measure(measure_id: str, param: float | None = None) -> MeasureSpec:
    """Look up a measure by CLI id.

    ``param`` is eta for the supervised polynomial presets and kappa for
    ``poly-unsup-bounded``; the bounded presets require it.
    """
    if measure_id in _POLY_IDS:
        if measure_id.endswith("bounded") and param is None:
            raise ValueError(f"{measure_id} needs a parameter (eta or kappa)")
        return _POLY_IDS[measure_id](param)
    return catalog_entry(measure_id).measure


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


def classify_monotonicity(measure: MeasureSpec, rng: np.random.Generator, trials: int = 1000,
                          n: int = 8, p: int = 1, scale: float = 2.0,
                          limit: float | None = None) -> str:
    """Numerically label ``y -> M(B, (x, y))`` over random bags and pairs ``y < y'``.

    ``limit`` clips the responses to ``[-limit, limit]`` for measures with a
    restricted domain.
    """
    saw_up = saw_down = False
    for _ in range(trials):
        draw = rng.normal(0.0, scale, size=n + 2)
        if limit is not None:
            draw = np.clip(draw, -limit, limit)
        bag_y, (y, y2) = draw[:n], np.sort(draw[n:])
        if measure.kind == SUPERVISED:
            bag_X = rng.normal(size=(n, p))
            x = rng.normal(size=p)
            lo, hi = measure(bag_X, bag_y, x, y), measure(bag_X, bag_y, x, y2)
        else:
            lo, hi = measure(bag_y, y), measure(bag_y, y2)
        if y < y2:
            saw_up |= hi > lo
            saw_down |= hi < lo
    if saw_up and saw_down:
        return NON_MONOTONE
    if saw_up:
        return INCREASING
    if saw_down:
        return DECREASING
    return CONSTANT
