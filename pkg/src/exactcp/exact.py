"""Closed-form conformal prediction intervals built from order statistics.

Each construction pairs a polynomial nonconformity measure with a per-point
comparison ``mu_i >= mu_{n+1}`` that reduces to a threshold (or a symmetric
band) in the candidate response.  A candidate belongs to the region exactly
when at least ``m = floor((n+1) alpha)`` of the ``n`` comparisons hold, so
every endpoint is an order statistic selected by that count.  The
conventional indices built from ``r1``, ``r2`` and ``r3`` are reported
alongside for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Sample, _alpha_fraction, critical_count
from .regions import PredictionRegion

UPPER, LOWER, BOUNDED = "upper", "lower", "bounded"
SHAPES = (UPPER, LOWER, BOUNDED)


@dataclass(frozen=True)
class RankConstants:
    """``m = floor((n+1) alpha)`` and the three conventional rank indices."""

    n: int
    m: int
    r1: int
    r2: int
    r3: int

    @property
    def trivial(self) -> bool:
        return self.m <= 1

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "r1": self.r1, "r2": self.r2, "r3": self.r3,
                "trivial": self.trivial}


def rank_constants(n: int, alpha: float) -> RankConstants:
    m = critical_count(n, alpha)
    upper_count = math.floor((n + 1) * (1 - _alpha_fraction(alpha)))
    return RankConstants(
        n=n,
        m=m,
        r1=min(n, upper_count + 1),
        r2=(n + 1) - upper_count,
        r3=(n + 1) - m,
    )


def trivial_region_guard(n: int, alpha: float) -> PredictionRegion | None:
    """Full line when ``floor((n+1) alpha) <= 1``, else ``None``."""
    return PredictionRegion.full_line() if rank_constants(n, alpha).trivial else None


@dataclass(frozen=True)
class ShiftScores:
    a: np.ndarray

    def __len__(self):
        return self.a.shape[0]


def shift_scores(sample: Sample, features_new) -> ShiftScores:
    """``a_i = sum_j (x_new_j - x_ij) + y_i``."""
    x_new = sample.check_features(features_new)
    a = (x_new[None, :] - sample.X).sum(axis=1) + sample.y
    a.setflags(write=False)
    return ShiftScores(a)


@dataclass(frozen=True)
class BoundedScores:
    eta: float
    c: np.ndarray
    d: np.ndarray
    s: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return -self.s - self.eta / 2

    @property
    def b(self) -> np.ndarray:
        return self.s - self.eta / 2


def _c_d(sample: Sample, features_new):
    x_new = sample.check_features(features_new)
    shift = (x_new[None, :] - sample.X).sum(axis=1)
    return sample.y + shift, sample.y ** 2 + shift


def eta_lower_bound(sample: Sample, features_new) -> float:
    """Smallest eta for which every radicand is non-negative."""
    c, d = _c_d(sample, features_new)
    return float(np.max(2.0 * (np.sqrt(np.maximum(0.0, c * c - d)) - c)))


def default_eta(sample: Sample, features_new) -> float:
    """``max_i 2*(sqrt(max(0, c_i^2 - d_i) + 1) - c_i)``, strictly above the bound."""
    c, d = _c_d(sample, features_new)
    return float(np.max(2.0 * (np.sqrt(np.maximum(0.0, c * c - d) + 1.0) - c)))


def bounded_scores(sample: Sample, features_new, eta: float) -> BoundedScores:
    c, d = _c_d(sample, features_new)
    bound = float(np.max(2.0 * (np.sqrt(np.maximum(0.0, c * c - d)) - c)))
    if not math.isfinite(eta) or eta < bound:
        raise ValueError(f"eta={eta!r} is below the admissible bound {bound!r}")
    radicand = eta * eta / 4.0 + eta * c + d
    # eta >= bound makes the radicand non-negative; clip rounding residue only
    s = np.sqrt(np.maximum(radicand, 0.0))
    return BoundedScores(eta=float(eta), c=c, d=d, s=s)


def _order_stat(values: np.ndarray, k: int) -> float:
    """``k``-th smallest (1-based) with duplicates retained."""
    return float(np.sort(values, kind="stable")[k - 1])


def _upper_from_scores(a: np.ndarray, m: int) -> PredictionRegion:
    if m == 0:
        return PredictionRegion.full_line()
    end = _order_stat(a, a.shape[0] + 1 - m)
    closed = int(np.count_nonzero(a >= end)) >= m
    return PredictionRegion.left_ray(end, closed)


def _lower_from_scores(a: np.ndarray, m: int) -> PredictionRegion:
    if m == 0:
        return PredictionRegion.full_line()
    end = _order_stat(a, m)
    closed = int(np.count_nonzero(a <= end)) >= m
    return PredictionRegion.right_ray(end, closed)


def _band_from_halfwidths(center: float, h: np.ndarray, m: int) -> PredictionRegion:
    if m == 0:
        return PredictionRegion.full_line()
    w = _order_stat(h, h.shape[0] + 1 - m)
    lo, hi = center - w, center + w
    closed = int(np.count_nonzero(h >= w)) >= m
    return PredictionRegion.bounded(lo, hi, closed, closed)


def exact_upper_interval(sample: Sample, features_new, alpha: float) -> PredictionRegion:
    """One-sided region ``(-inf, a_(n+1-m)]`` of the upper-ray polynomial measure."""
    m = critical_count(sample.n, alpha)
    return _upper_from_scores(shift_scores(sample, features_new).a, m)


def exact_lower_interval(sample: Sample, features_new, alpha: float) -> PredictionRegion:
    """One-sided region ``[a_(m), inf)`` of the lower-ray polynomial measure."""
    m = critical_count(sample.n, alpha)
    return _lower_from_scores(shift_scores(sample, features_new).a, m)


def exact_bounded_interval(sample: Sample, features_new, alpha: float,
                           eta: float | None = None) -> PredictionRegion:
    """Bounded region of the quadratic measure, symmetric about ``-eta/2``.

    Every comparison holds on a band ``|y + eta/2| <= s_i``, so the region is
    ``|y + eta/2| <= s_(n+1-m)``.  ``eta`` defaults to :func:`default_eta`.
    """
    if eta is None:
        eta = default_eta(sample, features_new)
    scores = bounded_scores(sample, features_new, eta)
    m = critical_count(sample.n, alpha)
    return _band_from_halfwidths(-scores.eta / 2.0, scores.s, m)


def exact_unsupervised_interval(values, alpha: float, shape: str,
                                kappa: float | None = None) -> PredictionRegion:
    """Closed-form region for the unsupervised polynomial measure.

    ``upper`` and ``lower`` are raw order statistics of ``values``;
    ``bounded`` is the band ``|x - kappa/2| <= h_(n+1-m)`` with
    ``h_i = |x_i - kappa/2|``.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("values must be a non-empty finite vector")
    m = critical_count(v.shape[0], alpha)
    if shape == UPPER:
        return _upper_from_scores(v, m)
    if shape == LOWER:
        return _lower_from_scores(v, m)
    if shape == BOUNDED:
        if kappa is None or kappa == 0 or not math.isfinite(kappa):
            raise ValueError("bounded shape needs a finite, nonzero kappa")
        return _band_from_halfwidths(kappa / 2.0, np.abs(v - kappa / 2.0), m)
    raise ValueError(f"unknown shape {shape!r}")


# ---------------------------------------------------------------------------
# reporting wrapper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactResult:
    """Region plus the bookkeeping a report needs."""

    region: PredictionRegion
    shape: str
    ranks: RankConstants
    order_index: int | None
    rank_index: int | None
    eta: float | None = None
    kappa: float | None = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        out = {
            "shape": self.shape,
            "region": self.region.to_dict(),
            "rank_constants": self.ranks.to_dict(),
            "order_index": self.order_index,
            "rank_index": self.rank_index,
        }
        if self.eta is not None:
            out["eta"] = self.eta
        if self.kappa is not None:
            out["kappa"] = self.kappa
        out["notes"] = list(self.notes)
        return out


def _notes(ranks: RankConstants, shape: str, used: int | None, conventional: int | None) -> list[str]:
    notes = []
    if ranks.m == 0:
        notes.append("floor((n+1)alpha) = 0: every candidate is plausible, region is the full line")
    elif ranks.m == 1:
        notes.append("floor((n+1)alpha) = 1: flagged trivial, but the membership rule still "
                     "excludes candidates that are strictly least conforming; the region shown "
                     "is the exact one")
    if used is not None and conventional is not None and used != conventional and ranks.m >= 1:
        notes.append(f"{shape}: membership count selects order statistic {used}, "
                     f"conventional rank index is {conventional}")
    return notes


def solve(sample: Sample, features_new, alpha: float, shape: str,
          eta: float | None = None) -> ExactResult:
    """Supervised closed form of the given shape with index bookkeeping."""
    ranks = rank_constants(sample.n, alpha)
    n, m = sample.n, ranks.m
    if shape == UPPER:
        region = exact_upper_interval(sample, features_new, alpha)
        used, conventional = n + 1 - m, ranks.r1
    elif shape == LOWER:
        region = exact_lower_interval(sample, features_new, alpha)
        used, conventional = m, ranks.r2
    elif shape == BOUNDED:
        if eta is None:
            eta = default_eta(sample, features_new)
        region = exact_bounded_interval(sample, features_new, alpha, eta)
        # conventional lower endpoint a_(r1) of ascending a_i is -s_(n+1-r1) - eta/2
        used, conventional = n + 1 - m, n + 1 - ranks.r1
    else:
        raise ValueError(f"unknown shape {shape!r}")
    if m == 0:
        used = None
    return ExactResult(region, shape, ranks, used, conventional, eta=eta,
                       notes=tuple(_notes(ranks, shape, used, conventional)))


def solve_unsupervised(values, alpha: float, shape: str, kappa: float | None = None) -> ExactResult:
    v = np.asarray(values, dtype=float).reshape(-1)
    ranks = rank_constants(v.shape[0], alpha)
    n, m = v.shape[0], ranks.m
    region = exact_unsupervised_interval(v, alpha, shape, kappa)
    used = {UPPER: n + 1 - m, LOWER: m, BOUNDED: n + 1 - m}[shape]
    conventional = {UPPER: ranks.r1, LOWER: ranks.r2, BOUNDED: n + 1 - ranks.r1}[shape]
    notes = _notes(ranks, shape, used, conventional)
    if shape == BOUNDED:
        notes.append("bounded: per-point bands use min/max{x_i, kappa - x_i}")
    if m == 0:
        used = None
    return ExactResult(region, shape, ranks, used, conventional, kappa=kappa, notes=tuple(notes))
