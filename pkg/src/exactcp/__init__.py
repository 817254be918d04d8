"""Exact conformal prediction intervals from order statistics."""

from .core import (CandidatePoint, LabeledPoint, MeasureSpec, PlausibilityValue, Sample, ScanSpec,
                   critical_count, nonconformity_scores, plausibility, plausibility_unsupervised,
                   region_oracle, region_oracle_unsupervised, threshold)
from .estimators import ExactConformalPredictor, ExactConformalRegressor, LinearModelInterval
from .exact import (default_eta, exact_bounded_interval, exact_lower_interval,
                    exact_unsupervised_interval, exact_upper_interval, rank_constants, solve,
                    solve_unsupervised, trivial_region_guard)
from .exceptions import (DimensionError, DomainError, ExactCPError, NonFiniteScoreError,
                         RankDeficientError, ScanWindowError)
from .measures import counterexample_catalog, get_measure, polynomial_supervised, polynomial_unsupervised
from .regions import Interval, PredictionRegion

__all__ = [
    "CandidatePoint", "LabeledPoint", "MeasureSpec", "PlausibilityValue", "Sample", "ScanSpec",
    "critical_count", "nonconformity_scores", "plausibility", "plausibility_unsupervised",
    "region_oracle", "region_oracle_unsupervised", "threshold",
    "ExactConformalPredictor", "ExactConformalRegressor", "LinearModelInterval",
    "default_eta", "exact_bounded_interval", "exact_lower_interval", "exact_unsupervised_interval",
    "exact_upper_interval", "rank_constants", "solve", "solve_unsupervised", "trivial_region_guard",
    "DimensionError", "DomainError", "ExactCPError", "NonFiniteScoreError", "RankDeficientError",
    "ScanWindowError", "counterexample_catalog", "get_measure", "polynomial_supervised",
    "polynomial_unsupervised", "Interval", "PredictionRegion",
]
