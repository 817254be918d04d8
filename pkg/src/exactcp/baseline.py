"""Ordinary least squares and Student-t prediction intervals.

This is the parametric comparison point: a Gaussian linear model fitted by
least squares, with prediction intervals built from the residual standard
error and the leverage of the new point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, special

from .core import Sample
from .exceptions import RankDeficientError
from .regions import PredictionRegion

UPPER, LOWER, BOUNDED = "upper", "lower", "bounded"


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Least-squares fit of ``y = X beta + sigma * eps``.

    Attributes
    ----------
    coefficients : ndarray of shape (p + intercept,)
        Intercept first when ``intercept`` is true.
    sigma_hat : float
        Residual standard error ``sqrt(RSS / dof)``.
    gram_inverse : ndarray
        ``(X^T X)^{-1}`` of the design actually fitted.
    dof : int
        Residual degrees of freedom ``n - (p + intercept)``.
    """

    coefficients: np.ndarray
    sigma_hat: float
    gram_inverse: np.ndarray
    dof: int
    intercept: bool = True

    def design_row(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if self.intercept:
            x = np.hstack([np.ones((x.shape[0], 1)), x])
        if x.shape[1] != self.coefficients.shape[0]:
            raise ValueError(f"expected {self.coefficients.shape[0] - self.intercept} features")
        return x

    def predict(self, features) -> np.ndarray:
        return self.design_row(features) @ self.coefficients

    def leverage(self, features) -> np.ndarray:
        D = self.design_row(features)
        return np.einsum("ij,jk,ik->i", D, self.gram_inverse, D)


def _design(X: np.ndarray, intercept: bool) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X]) if intercept else X


def ols_fit(sample: Sample, intercept: bool = True) -> OlsFit:
    """Least squares through a thin QR factorisation.

    Raises
    ------
    RankDeficientError
        If there are too few rows or the design loses column rank.
    """
    D = _design(sample.X, intercept)
    n, k = D.shape
    if n <= k:
        raise RankDeficientError(f"need more than {k} rows to fit {k} coefficients, got {n}")
    Q, R = np.linalg.qr(D, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() <= np.finfo(float).eps * max(n, k) * diag.max():
        raise RankDeficientError("design matrix does not have full column rank")
    beta = linalg.solve_triangular(R, Q.T @ sample.y)
    resid = sample.y - D @ beta
    dof = n - k
    sigma = math.sqrt(math.fsum(resid * resid) / dof)
    R_inv = linalg.solve_triangular(R, np.eye(k))
    gram_inv = R_inv @ R_inv.T
    return OlsFit(beta, sigma, 0.5 * (gram_inv + gram_inv.T), dof, intercept)


def t_cdf(q, dof: float):
    """Student-t CDF through the regularised incomplete beta function."""
    q = np.asarray(q, dtype=float)
    tail = 0.5 * special.betainc(dof / 2.0, 0.5, dof / (dof + q * q))
    out = np.where(q > 0, 1.0 - tail, tail)
    return float(out) if out.ndim == 0 else out


def t_sf(q, dof: float):
    q = np.asarray(q, dtype=float)
    tail = 0.5 * special.betainc(dof / 2.0, 0.5, dof / (dof + q * q))
    out = np.where(q > 0, tail, 1.0 - tail)
    return float(out) if out.ndim == 0 else out


def t_quantile(dof: float, upper_tail: float) -> float:
    """Value ``q`` with ``P(T > q) = upper_tail`` for ``T ~ t(dof)``.

    Found by bracketing and Brent's method on the survival function.
    """
    if not dof >= 1:
        raise ValueError("dof must be at least 1")
    if not 0.0 < upper_tail < 1.0:
        raise ValueError("upper_tail must lie in (0, 1)")
    if upper_tail == 0.5:
        return 0.0
    if upper_tail > 0.5:
        return -t_quantile(dof, 1.0 - upper_tail)
    hi = 1.0
    while t_sf(hi, dof) > upper_tail:
        hi *= 2.0
    return optimize.brentq(lambda q: t_sf(q, dof) - upper_tail, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def lm_interval(fit: OlsFit, features_new, alpha: float, shape: str) -> PredictionRegion:
    """Linear-model prediction interval of the requested shape.

    The bounded shape uses the two-sided multiplier ``t(alpha/2)``; each
    one-sided shape puts the whole ``alpha`` in its single tail.
    """
    lo, hi = lm_bounds(fit, np.atleast_2d(features_new), alpha, shape)
    if shape == UPPER:
        return PredictionRegion.left_ray(float(hi[0]), closed=True)
    if shape == LOWER:
        return PredictionRegion.right_ray(float(lo[0]), closed=True)
    return PredictionRegion.bounded(float(lo[0]), float(hi[0]), True, True)


def lm_bounds(fit: OlsFit, features, alpha: float, shape: str):
    """Vectorised lower and upper bounds, ``-inf``/``inf`` for open sides."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    center = fit.predict(features)
    se = fit.sigma_hat * np.sqrt(1.0 + fit.leverage(features))
    if shape == BOUNDED:
        half = t_quantile(fit.dof, alpha / 2.0) * se
        return center - half, center + half
    half = t_quantile(fit.dof, alpha) * se
    if shape == UPPER:
        return np.full_like(center, -np.inf), center + half
    if shape == LOWER:
        return center - half, np.full_like(center, np.inf)
    raise ValueError(f"unknown shape {shape!r}")
