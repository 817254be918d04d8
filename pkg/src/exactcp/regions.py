"""Subsets of the real line returned by the oracle and the closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

FULL_LINE = "full_line"
LEFT_RAY = "left_ray"
RIGHT_RAY = "right_ray"
BOUNDED = "bounded"
UNION = "union"
EMPTY = "empty"


@dataclass(frozen=True)
class Interval:
    """A single interval of the real line.

    Infinite endpoints are always open. A degenerate interval ``[c, c]`` is
    allowed (it arises from a zero-width linear-model interval).
    """

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be nan")
        if lo > hi:
            raise ValueError(f"interval lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "lower_closed", bool(self.lower_closed) and math.isfinite(lo))
        object.__setattr__(self, "upper_closed", bool(self.upper_closed) and math.isfinite(hi))

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        above = y >= self.lower if self.lower_closed else y > self.lower
        below = y <= self.upper if self.upper_closed else y < self.upper
        return above & below

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {
            "lower": _encode(self.lower),
            "upper": _encode(self.upper),
            "lower_closed": self.lower_closed,
            "upper_closed": self.upper_closed,
        }


def _encode(v: float):
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return v


def _decode(v) -> float:
    return float(v)


@dataclass(frozen=True)
class PredictionRegion:
    """A finite union of sorted, pairwise disjoint intervals.

    The ``kind`` property classifies the region as one of ``full_line``,
    ``left_ray``, ``right_ray``, ``bounded``, ``union`` or ``empty``.
    Membership is total over finite reals.
    """

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        ivs = tuple(self.intervals)
        for a, b in zip(ivs, ivs[1:]):
            touching = a.upper == b.lower and (a.upper_closed or b.lower_closed)
            if a.upper > b.lower or touching:
                raise ValueError("union intervals must be sorted and pairwise disjoint")
        object.__setattr__(self, "intervals", ivs)

    # constructors -----------------------------------------------------
    @classmethod
    def full_line(cls) -> "PredictionRegion":
        return cls((Interval(-math.inf, math.inf),))

    @classmethod
    def left_ray(cls, upper: float, closed: bool = False) -> "PredictionRegion":
        return cls((Interval(-math.inf, upper, upper_closed=closed),))

    @classmethod
    def right_ray(cls, lower: float, closed: bool = False) -> "PredictionRegion":
        return cls((Interval(lower, math.inf, lower_closed=closed),))

    @classmethod
    def bounded(cls, lower, upper, lower_closed=False, upper_closed=False) -> "PredictionRegion":
        return cls((Interval(lower, upper, lower_closed, upper_closed),))

    @classmethod
    def union(cls, intervals: Iterable[Interval]) -> "PredictionRegion":
        return cls(tuple(sorted(intervals, key=lambda iv: iv.lower)))

    @classmethod
    def from_dict(cls, payload: dict) -> "PredictionRegion":
        return cls(tuple(
            Interval(_decode(d["lower"]), _decode(d["upper"]), d["lower_closed"], d["upper_closed"])
            for d in payload["intervals"]
        ))

    # queries ----------------------------------------------------------
    @property
    def kind(self) -> str:
        if not self.intervals:
            return EMPTY
        if len(self.intervals) > 1:
            return UNION
        iv = self.intervals[0]
        lo_inf, hi_inf = math.isinf(iv.lower), math.isinf(iv.upper)
        if lo_inf and hi_inf:
            return FULL_LINE
        if lo_inf:
            return LEFT_RAY
        if hi_inf:
            return RIGHT_RAY
        return BOUNDED

    @property
    def is_interval(self) -> bool:
        return len(self.intervals) == 1

    @property
    def is_one_sided(self) -> bool:
        return self.kind in (LEFT_RAY, RIGHT_RAY)

    @property
    def lower(self) -> float:
        return self.intervals[0].lower if self.intervals else math.nan

    @property
    def upper(self) -> float:
        return self.intervals[-1].upper if self.intervals else math.nan

    @property
    def length(self) -> float:
        return math.fsum(iv.length for iv in self.intervals)

    def gaps(self) -> list[tuple[float, float]]:
        """Bounded holes between consecutive intervals."""
        return [(a.upper, b.lower) for a, b in zip(self.intervals, self.intervals[1:])]

    def endpoints(self) -> list[float]:
        out = []
        for iv in self.intervals:
            out.extend([iv.lower, iv.upper])
        return out

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        hit = np.zeros(y.shape, dtype=bool)
        for iv in self.intervals:
            hit |= iv.contains(y)
        return bool(hit) if hit.ndim == 0 else hit

    def __contains__(self, y) -> bool:
        return bool(self.contains(y))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "intervals": [iv.to_dict() for iv in self.intervals]}

    def __str__(self) -> str:
        if not self.intervals:
            return "{}"
        parts = []
        for iv in self.intervals:
            lb = "[" if iv.lower_closed else "("
            rb = "]" if iv.upper_closed else ")"
            parts.append(f"{lb}{iv.lower:.10g}, {iv.upper:.10g}{rb}")
        return " U ".join(parts)


def endpoint_discrepancy(a: PredictionRegion, b: PredictionRegion) -> float:
    """Largest absolute difference between matching endpoints of two regions.

    Returns ``inf`` when the regions have different shapes (interval count
    or which ends are unbounded).
    """
    ea, eb = a.endpoints(), b.endpoints()
    if len(ea) != len(eb):
        return math.inf
    worst = 0.0
    for u, v in zip(ea, eb):
        if math.isinf(u) or math.isinf(v):
            if u != v:
                return math.inf
            continue
        worst = max(worst, abs(u - v))
    return worst
