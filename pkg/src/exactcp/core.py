"""Conformal plausibility engine and the brute-force region oracle.

The supervised engine follows the classic transductive recipe: append the
candidate ``(x_new, y)`` to the observed bag, score every point against the
bag of the remaining ``n`` points, and report the fraction of scores that are
at least as large as the candidate's own score.  The unsupervised engine is
the same computation without features.

:func:`region_oracle` scans the candidate response over a finite window,
refines every membership change by bisection and returns the resulting
:class:`~exactcp.regions.PredictionRegion`.  It knows nothing about closed
forms and is the ground truth the ``exact`` module is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DimensionError, NonFiniteScoreError, ScanWindowError
from .regions import Interval, PredictionRegion

SUPERVISED = "supervised"
UNSUPERVISED = "unsupervised"


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


def _finite_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LabeledPoint:
    """One observation ``(features, response)``."""

    features: tuple[float, ...]
    response: float

    def __post_init__(self):
        feats = tuple(float(v) for v in np.atleast_1d(np.asarray(self.features, dtype=float)))
        if not all(math.isfinite(v) for v in feats):
            raise ValueError("features must be finite")
        resp = float(self.response)
        if not math.isfinite(resp):
            raise ValueError("response must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "response", resp)


@dataclass(frozen=True)
class CandidatePoint:
    """A new feature vector paired with a provisional response."""

    features: tuple[float, ...]
    provisional_response: float

    def __post_init__(self):
        feats = tuple(float(v) for v in np.atleast_1d(np.asarray(self.features, dtype=float)))
        if not all(math.isfinite(v) for v in feats):
            raise ValueError("features must be finite")
        resp = float(self.provisional_response)
        if not math.isfinite(resp):
            raise ValueError("provisional response must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "provisional_response", resp)


@dataclass(frozen=True, eq=False)
class Sample:
    """An exchangeable bag of ``n`` labeled points sharing dimension ``p``.

    Stored column-wise as a read-only ``(n, p)`` feature matrix ``X`` and a
    response vector ``y``.  Operations that treat the sample as a bag are
    invariant to row order.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        y = _finite_vector(self.y, "responses")
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, 0)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionError(f"feature matrix shape {X.shape} does not match {y.shape[0]} responses")
        if y.shape[0] < 1:
            raise ValueError("a sample needs at least one point")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint]) -> "Sample":
        points = list(points)
        if not points:
            raise ValueError("a sample needs at least one point")
        p = len(points[0].features)
        if any(len(pt.features) != p for pt in points):
            raise DimensionError("all points must share the same feature dimension")
        X = np.array([pt.features for pt in points], dtype=float).reshape(len(points), p)
        return cls(X, [pt.response for pt in points])

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def points(self) -> tuple[LabeledPoint, ...]:
        return tuple(LabeledPoint(tuple(row), yi) for row, yi in zip(self.X, self.y))

    def __len__(self) -> int:
        return self.n

    def permuted(self, order) -> "Sample":
        order = np.asarray(order)
        return Sample(self.X[order], self.y[order])

    def check_features(self, features) -> np.ndarray:
        x = _finite_vector(features, "features")
        if x.shape[0] != self.p:
            raise DimensionError(f"expected {self.p} features, got {x.shape[0]}")
        return x


@dataclass(frozen=True, order=True)
class PlausibilityValue:
    """The exact rational ``count / denominator`` returned by the engine."""

    count: int
    denominator: int

    def __post_init__(self):
        if not 1 <= self.count <= self.denominator:
            raise ValueError(f"count {self.count} outside [1, {self.denominator}]")

    @property
    def value(self) -> float:
        return self.count / self.denominator

    def __float__(self) -> float:
        return self.value

    def as_fraction(self) -> Fraction:
        return Fraction(self.count, self.denominator)

    def exceeds(self, alpha: float) -> bool:
        """Exact test of ``count / denominator > alpha``."""
        return self.count > critical_count(self.denominator - 1, alpha)


@dataclass(frozen=True)
class MeasureSpec:
    """A deterministic, bag-symmetric nonconformity measure.

    Parameters
    ----------
    label : str
        Catalog identifier.
    evaluator : callable
        ``evaluator(bag_X, bag_y, x, y)`` for supervised measures or
        ``evaluator(bag, x)`` for unsupervised ones; returns a float.
    kind : {"supervised", "unsupervised"}
    params : mapping, optional
        Parameter record echoed in reports.
    batch : callable, optional
        Vectorised leave-one-out scores used by the oracle.  For supervised
        measures ``batch(X_all, Y)`` with ``X_all`` of shape ``(n+1, p)`` and
        ``Y`` of shape ``(G, n+1)``; for unsupervised ones ``batch(V)`` with
        ``V`` of shape ``(G, n+1)``.  Must return an array of shape
        ``(G, n+1)`` equal to the literal evaluator row by row.
    domain : callable, optional
        Called with the array of responses about to be scored; raises
        :class:`~exactcp.exceptions.DomainError` when they are out of range.
    """

    label: str
    evaluator: Callable[..., float]
    kind: str = SUPERVISED
    params: Mapping[str, float] | None = None
    batch: Callable[..., np.ndarray] | None = field(default=None, compare=False)
    domain: Callable[[np.ndarray], None] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (SUPERVISED, UNSUPERVISED):
            raise ValueError(f"unknown measure kind {self.kind!r}")

    def __call__(self, *args) -> float:
        return self.evaluator(*args)


def _require_kind(measure: MeasureSpec, kind: str):
    if measure.kind != kind:
        raise TypeError(f"measure {measure.label!r} is {measure.kind}, expected {kind}")


def _check_scores(scores: np.ndarray, label: str) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScoreError(f"measure {label!r} produced a non-finite score")
    return scores


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


def _alpha_fraction(alpha) -> Fraction:
    a = float(alpha)
    if not (0.0 < a < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    # shortest decimal repr, so 0.29 means 29/100 rather than its binary neighbour
    return Fraction(repr(a))


def critical_count(n: int, alpha: float) -> int:
    """Return ``floor((n + 1) * alpha)`` computed in exact arithmetic."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.floor((n + 1) * _alpha_fraction(alpha))


def threshold(n: int, alpha: float) -> float:
    """Validity threshold ``floor((n+1) alpha) / (n+1)``."""
    return critical_count(n, alpha) / (n + 1)


# ---------------------------------------------------------------------------
# Algorithms 1 and 2, literal form
# ---------------------------------------------------------------------------


def nonconformity_scores(sample: Sample, candidate: CandidatePoint, measure: MeasureSpec) -> np.ndarray:
    """Leave-one-out scores ``mu_1, ..., mu_{n+1}``; the last is the candidate's."""
    _require_kind(measure, SUPERVISED)
    x_new = sample.check_features(candidate.features)
    X = np.vstack([sample.X, x_new[None, :]])
    Y = np.append(sample.y, candidate.provisional_response)
    if measure.domain is not None:
        measure.domain(Y)
    keep = np.ones(X.shape[0], dtype=bool)
    scores = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        keep[i] = False
        scores[i] = measure.evaluator(X[keep], Y[keep], X[i], Y[i])
        keep[i] = True
    return _check_scores(scores, measure.label)


def unsupervised_scores(values, candidate: float, measure: MeasureSpec) -> np.ndarray:
    """Unsupervised counterpart of :func:`nonconformity_scores`."""
    _require_kind(measure, UNSUPERVISED)
    V = np.append(_finite_vector(values, "values"), float(candidate))
    if not math.isfinite(V[-1]):
        raise ValueError("candidate must be finite")
    if measure.domain is not None:
        measure.domain(V)
    keep = np.ones(V.shape[0], dtype=bool)
    scores = np.empty(V.shape[0])
    for i in range(V.shape[0]):
        keep[i] = False
        scores[i] = measure.evaluator(V[keep], V[i])
        keep[i] = True
    return _check_scores(scores, measure.label)


def _count(scores: np.ndarray) -> int:
    # ties count, as does the candidate's comparison with itself
    return int(np.count_nonzero(scores >= scores[-1]))


def plausibility(sample: Sample, candidate: CandidatePoint, measure: MeasureSpec) -> PlausibilityValue:
    """Plausibility of the candidate's provisional response (supervised)."""
    scores = nonconformity_scores(sample, candidate, measure)
    return PlausibilityValue(_count(scores), scores.shape[0])


def plausibility_unsupervised(values, candidate: float, measure: MeasureSpec) -> PlausibilityValue:
    """Plausibility of ``candidate`` given a bag of real ``values``."""
    scores = unsupervised_scores(values, candidate, measure)
    return PlausibilityValue(_count(scores), scores.shape[0])


# ---------------------------------------------------------------------------
# vectorised profiles
# ---------------------------------------------------------------------------


def _supervised_score_grid(sample: Sample, x_new: np.ndarray, measure: MeasureSpec):
    X_all = np.vstack([sample.X, x_new[None, :]])
    n1 = X_all.shape[0]

    def scores(ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float).reshape(-1)
        Y = np.empty((ys.shape[0], n1))
        Y[:, :-1] = sample.y
        Y[:, -1] = ys
        if measure.domain is not None:
            measure.domain(ys)
        if measure.batch is not None:
            out = np.asarray(measure.batch(X_all, Y), dtype=float)
        else:
            out = np.empty_like(Y)
            keep = np.ones(n1, dtype=bool)
            for g in range(Y.shape[0]):
                for i in range(n1):
                    keep[i] = False
                    out[g, i] = measure.evaluator(X_all[keep], Y[g, keep], X_all[i], Y[g, i])
                    keep[i] = True
        return _check_scores(out, measure.label)

    return scores


def _unsupervised_score_grid(values: np.ndarray, measure: MeasureSpec):
    n1 = values.shape[0] + 1

    def scores(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        V = np.empty((xs.shape[0], n1))
        V[:, :-1] = values
        V[:, -1] = xs
        if measure.domain is not None:
            measure.domain(xs)
        if measure.batch is not None:
            out = np.asarray(measure.batch(V), dtype=float)
        else:
            out = np.empty_like(V)
            keep = np.ones(n1, dtype=bool)
            for g in range(V.shape[0]):
                for i in range(n1):
                    keep[i] = False
                    out[g, i] = measure.evaluator(V[g, keep], V[g, i])
                    keep[i] = True
        return _check_scores(out, measure.label)

    return scores


def score_grid(sample: Sample, features_new, measure: MeasureSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``f(ys) -> (len(ys), n+1)`` leave-one-out score matrix."""
    _require_kind(measure, SUPERVISED)
    return _supervised_score_grid(sample, sample.check_features(features_new), measure)


def score_grid_unsupervised(values, measure: MeasureSpec) -> Callable[[np.ndarray], np.ndarray]:
    _require_kind(measure, UNSUPERVISED)
    return _unsupervised_score_grid(_finite_vector(values, "values"), measure)


def _counts_from(scores_fn):
    def counts(ys):
        s = scores_fn(ys)
        return np.count_nonzero(s >= s[:, -1:], axis=1)

    return counts


def plausibility_profile(sample: Sample, features_new, measure: MeasureSpec, ys) -> np.ndarray:
    """Plausibility counts ``k(y)`` at every candidate response in ``ys``."""
    return _counts_from(score_grid(sample, features_new, measure))(ys)


def plausibility_profile_unsupervised(values, measure: MeasureSpec, xs) -> np.ndarray:
    return _counts_from(score_grid_unsupervised(values, measure))(xs)


# ---------------------------------------------------------------------------
# region oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanSpec:
    """Scan window, initial grid resolution and bisection tolerance."""

    lower: float
    upper: float
    grid_size: int = 4096
    tol: float = 1e-9

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper) and self.lower < self.upper):
            raise ValueError("scan window must be a finite, non-empty interval")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @classmethod
    def around(cls, values: Iterable[float], span: float = 10.0, grid_size: int = 4096,
               tol: float = 1e-9) -> "ScanSpec":
        """Window ``[min - span*range, max + span*range]`` (range floored at 1 when zero)."""
        v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
        lo, hi = float(v.min()), float(v.max())
        width = hi - lo
        if width == 0.0:
            width = 1.0
        return cls(lo - span * width, hi + span * width, grid_size, tol)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def default_scan(sample: Sample, features_new) -> ScanSpec:
    """Window anchored on the responses and their feature-shifted copies."""
    x_new = sample.check_features(features_new)
    shift = x_new.sum() - sample.X.sum(axis=1)
    return ScanSpec.around(np.concatenate([sample.y, sample.y + shift]))


_FAR_PROBES = 7


def _scan(counts_fn, m: int, scan: ScanSpec, extrapolate: bool = True) -> PredictionRegion:
    def member(ys):
        return counts_fn(ys) > m

    grid = np.linspace(scan.lower, scan.upper, scan.grid_size)
    inside = member(grid)

    # beyond the window the region is extrapolated; probe far out to confirm
    for edge, direction in ((0, -1.0), (-1, 1.0)):
        if not extrapolate:
            break
        far = grid[edge] + direction * scan.width * 10.0 ** np.arange(_FAR_PROBES)
        if np.any(member(far) != inside[edge]):
            raise ScanWindowError("region changes outside the scan window; widen the window")
    outer_lo, outer_hi = (-math.inf, math.inf) if extrapolate else (scan.lower, scan.upper)

    flips = np.flatnonzero(inside[1:] != inside[:-1])
    lo = grid[flips].copy()
    hi = grid[flips + 1].copy()
    lo_state = inside[flips]
    active = np.ones(flips.shape[0], dtype=bool)
    while True:
        active &= (hi - lo) > scan.tol
        mid = 0.5 * (lo + hi)
        active &= (mid > lo) & (mid < hi)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        same = member(mid[idx]) == lo_state[idx]
        lo[idx[same]] = mid[idx[same]]
        hi[idx[~same]] = mid[idx[~same]]
    bounds = 0.5 * (lo + hi)
    closed = member(bounds) if bounds.size else np.zeros(0, dtype=bool)

    intervals = []
    start, start_closed = (outer_lo, not extrapolate) if inside[0] else (None, False)
    for j in range(flips.shape[0]):
        if lo_state[j]:  # leaving the region
            intervals.append(Interval(start, bounds[j], start_closed, bool(closed[j])))
            start = None
        else:
            start, start_closed = bounds[j], bool(closed[j])
    if start is not None:
        intervals.append(Interval(start, outer_hi, start_closed, not extrapolate))
    return PredictionRegion(tuple(intervals))


def region_oracle(sample: Sample, features_new, measure: MeasureSpec, alpha: float,
                  scan: ScanSpec | None = None) -> PredictionRegion:
    """Brute-force conformal region ``{y : pl(y) > alpha}``.

    Membership is scanned on ``scan.grid_size`` equally spaced responses and
    every change of membership is bisected down to ``scan.tol``.  Endpoint
    closedness is the membership of the refined endpoint itself, which is
    only informative when the endpoint lands exactly on a boundary.

    For a measure with a restricted ``domain`` nothing outside the window is
    scored: the result is the region intersected with the window, so pick a
    window inside the domain.

    Raises
    ------
    ScanWindowError
        If membership far outside the window differs from membership at the
        window edge.
    """
    _require_kind(measure, SUPERVISED)
    x_new = sample.check_features(features_new)
    if scan is None:
        scan = default_scan(sample, x_new)
    m = critical_count(sample.n, alpha)
    return _scan(_counts_from(_supervised_score_grid(sample, x_new, measure)), m, scan,
                 extrapolate=measure.domain is None)


def region_oracle_unsupervised(values, measure: MeasureSpec, alpha: float,
                               scan: ScanSpec | None = None) -> PredictionRegion:
    """Unsupervised counterpart of :func:`region_oracle`."""
    _require_kind(measure, UNSUPERVISED)
    v = _finite_vector(values, "values")
    if scan is None:
        scan = ScanSpec.around(v)
    m = critical_count(v.shape[0], alpha)
    return _scan(_counts_from(_unsupervised_score_grid(v, measure)), m, scan,
                 extrapolate=measure.domain is None)
