"""Estimator-style wrappers around the closed-form and linear-model intervals.

The classes follow the scikit-learn conventions: hyperparameters are set in
``__init__`` and stored verbatim, learned state gets a trailing underscore,
and ``get_params``/``set_params``/``clone`` work out of the box.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import baseline, exact
from ._validation import (validate_alpha, validate_features, validate_optional_real,
                          validate_shape, validate_training_data, validate_values)
from .core import CandidatePoint, Sample, plausibility, plausibility_unsupervised
from .measures import (LOWER_PARAMS, LOWER_UNSUP_PARAMS, UPPER_PARAMS, UPPER_UNSUP_PARAMS,
                       bounded_params, bounded_unsup_params, polynomial_supervised,
                       polynomial_unsupervised)
from .regions import PredictionRegion


def _bounds(regions) -> np.ndarray:
    """Stack the hull ``[lower, upper]`` of each region into an ``(n, 2)`` array."""
    return np.array([[r.lower, r.upper] for r in regions], dtype=float).reshape(-1, 2)


class ExactConformalRegressor(BaseEstimator):
    """Conformal prediction intervals in closed form for regression.

    Parameters
    ----------
    alpha : float, default=0.1
        Miscoverage level; intervals have coverage at least ``1 - alpha``.
    shape : {"upper", "lower", "bounded"}, default="upper"
        ``upper`` gives ``(-inf, u]``, ``lower`` gives ``[l, inf)`` and
        ``bounded`` a finite interval.
    eta : float or None, default=None
        Weight of the bag residual term for the bounded shape.  ``None`` picks
        the data-driven default for every prediction point.

    Attributes
    ----------
    sample_ : Sample
        Training data.
    n_features_in_ : int
    ranks_ : RankConstants
        Order-statistic indices for the training size and ``alpha``.

    Examples
    --------
    >>> import numpy as np
    >>> X = np.zeros((9, 1)); y = np.arange(1.0, 10.0)
    >>> est = ExactConformalRegressor(alpha=0.25, shape="upper").fit(X, y)
    >>> est.predict_interval([[0.0]])
    array([[-inf,   8.]])
    """

    def __init__(self, alpha: float = 0.1, shape: str = "upper", eta: float | None = None):
        self.alpha = alpha
        self.shape = shape
        self.eta = eta

    def fit(self, X, y):
        X, y = validate_training_data(X, y)
        validate_alpha(self.alpha)
        validate_shape(self.shape)
        validate_optional_real(self.eta, "eta")
        self.sample_ = Sample(X, y)
        self.n_features_in_ = X.shape[1]
        self.ranks_ = exact.rank_constants(self.sample_.n, self.alpha)
        return self

    def _solve(self, x_row) -> exact.ExactResult:
        return exact.solve(self.sample_, x_row, self.alpha, self.shape, self.eta)

    def predict_result(self, X) -> list[exact.ExactResult]:
        """Full result records (region, rank indices, eta, notes) per row."""
        check_is_fitted(self, "sample_")
        X = validate_features(X, self.n_features_in_)
        return [self._solve(row) for row in X]

    def predict_region(self, X) -> list[PredictionRegion]:
        return [r.region for r in self.predict_result(X)]

    def predict_interval(self, X) -> np.ndarray:
        """Lower and upper endpoints, shape ``(n_samples, 2)``; open sides are infinite."""
        return _bounds(self.predict_region(X))

    def predict(self, X) -> np.ndarray:
        """Alias of :meth:`predict_interval`."""
        return self.predict_interval(X)

    def measure_for(self, x_row=None):
        """The nonconformity measure behind the current shape."""
        if self.shape == "upper":
            return polynomial_supervised(UPPER_PARAMS)
        if self.shape == "lower":
            return polynomial_supervised(LOWER_PARAMS)
        eta = self.eta
        if eta is None:
            if x_row is None:
                raise ValueError("the default eta depends on the prediction point")
            eta = exact.default_eta(self.sample_, x_row)
        return polynomial_supervised(bounded_params(eta))

    def plausibility(self, x_row, y_candidate: float) -> float:
        """Plausibility of ``y_candidate`` at ``x_row``, by direct scoring."""
        check_is_fitted(self, "sample_")
        x_row = validate_features(np.atleast_2d(x_row), self.n_features_in_)[0]
        cand = CandidatePoint(tuple(x_row), y_candidate)
        return plausibility(self.sample_, cand, self.measure_for(x_row)).value


class ExactConformalPredictor(BaseEstimator):
    """Closed-form conformal prediction interval for a new draw of a scalar variable.

    ``kappa`` is the linear bag weight used by the bounded shape and must be
    nonzero there.
    """

    def __init__(self, alpha: float = 0.1, shape: str = "upper", kappa: float | None = None):
        self.alpha = alpha
        self.shape = shape
        self.kappa = kappa

    def fit(self, values, y=None):
        v = validate_values(values)
        validate_alpha(self.alpha)
        validate_shape(self.shape)
        kappa = validate_optional_real(self.kappa, "kappa")
        if self.shape == "bounded" and not kappa:
            raise ValueError("bounded shape needs a nonzero kappa")
        self.values_ = v
        self.n_samples_ = v.shape[0]
        self.result_ = exact.solve_unsupervised(v, self.alpha, self.shape, kappa)
        self.region_ = self.result_.region
        return self

    def predict_interval(self) -> np.ndarray:
        check_is_fitted(self, "region_")
        return _bounds([self.region_])[0]

    def plausibility(self, candidate: float) -> float:
        check_is_fitted(self, "values_")
        if self.shape == "upper":
            measure = polynomial_unsupervised(UPPER_UNSUP_PARAMS)
        elif self.shape == "lower":
            measure = polynomial_unsupervised(LOWER_UNSUP_PARAMS)
        else:
            measure = polynomial_unsupervised(bounded_unsup_params(self.kappa))
        return plausibility_unsupervised(self.values_, candidate, measure).value


class LinearModelInterval(BaseEstimator):
    """Gaussian linear-model prediction interval fitted by least squares."""

    def __init__(self, alpha: float = 0.1, shape: str = "bounded", fit_intercept: bool = True):
        self.alpha = alpha
        self.shape = shape
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = validate_training_data(X, y)
        validate_alpha(self.alpha)
        validate_shape(self.shape)
        self.fit_ = baseline.ols_fit(Sample(X, y), intercept=bool(self.fit_intercept))
        self.coef_ = self.fit_.coefficients[1:] if self.fit_intercept else self.fit_.coefficients
        self.intercept_ = float(self.fit_.coefficients[0]) if self.fit_intercept else 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        """Point predictions ``x^T beta``."""
        check_is_fitted(self, "fit_")
        return self.fit_.predict(validate_features(X, self.n_features_in_))

    def predict_interval(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_")
        X = validate_features(X, self.n_features_in_)
        lo, hi = baseline.lm_bounds(self.fit_, X, self.alpha, self.shape)
        return np.column_stack([lo, hi])
