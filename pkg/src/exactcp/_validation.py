"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array, check_X_y

from .core import critical_count

SHAPES = ("upper", "lower", "bounded")


def validate_training_data(X, y):
    X, y = check_X_y(X, y, dtype=np.float64, ensure_all_finite=True, y_numeric=True)
    return X, y


def validate_features(X, n_features: int):
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, but the estimator was fitted with {n_features}")
    return X


def validate_values(values):
    v = check_array(np.asarray(values, dtype=float).reshape(-1, 1), dtype=np.float64,
                    ensure_all_finite=True).ravel()
    return v


def validate_alpha(alpha) -> float:
    if isinstance(alpha, bool) or not isinstance(alpha, numbers.Real):
        raise TypeError(f"alpha must be a real number, got {type(alpha).__name__}")
    alpha = float(alpha)
    critical_count(1, alpha)  # raises on alpha outside (0, 1)
    return alpha


def validate_shape(shape: str) -> str:
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}, got {shape!r}")
    return shape


def validate_optional_real(value, name: str):
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number or None")
    return float(value)
