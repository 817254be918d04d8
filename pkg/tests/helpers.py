"""Shared checking routines for the closed-form versus grid-oracle comparisons."""

import math

import numpy as np

from exactcp import Sample
from exactcp.core import (ScanSpec, critical_count, default_scan, plausibility_profile,
                          plausibility_profile_unsupervised, region_oracle,
                          region_oracle_unsupervised)
from exactcp.exact import default_eta, solve, solve_unsupervised
from exactcp.measures import get_measure
from exactcp.regions import endpoint_discrepancy

ALPHAS = (0.2, 0.25, 0.3, 0.35)


def random_instance(rng):
    """Draw (sample, x_new, alpha) with n in [10, 50], p in {1,2,3}, (n+1)alpha non-integer."""
    while True:
        n = int(rng.integers(10, 51))
        alpha = float(rng.choice(ALPHAS))
        if ((n + 1) * alpha) % 1 != 0:
            break
    p = int(rng.integers(1, 4))
    X = rng.normal(size=(n, p))
    y = X.sum(axis=1) + rng.normal(scale=rng.uniform(0.3, 2.0), size=n)
    return Sample(X, y), rng.normal(size=p), alpha


def _probes(rng, region, window, count):
    """Half uniform over the window, half near finite endpoints (never closer than 1e-7)."""
    uniform = rng.uniform(window[0], window[1], size=count // 2)
    ends = [e for e in region.endpoints() if math.isfinite(e)]
    if not ends:
        return rng.uniform(window[0], window[1], size=count)
    rest = count - uniform.size
    centre = rng.choice(ends, size=rest)
    offset = rng.choice([-1.0, 1.0], size=rest) * 10.0 ** rng.uniform(-7, 0, size=rest)
    return np.concatenate([uniform, centre + offset])


def compare(closed, oracle, counts_fn, m, rng, window, probes):
    disc = endpoint_discrepancy(closed, oracle)
    ys = _probes(rng, closed, window, probes)
    truth = counts_fn(ys) > m
    mismatches = int(np.count_nonzero(closed.contains(ys) != truth))
    return disc, mismatches


def check_instance(rng, probes=1000):
    """Return ``[(label, endpoint_error, membership_mismatches), ...]`` for one random instance."""
    sample, x_new, alpha = random_instance(rng)
    m = critical_count(sample.n, alpha)
    out = []
    scan = default_scan(sample, x_new)
    eta = default_eta(sample, x_new)
    for shape, param in (("upper", None), ("lower", None), ("bounded", eta)):
        measure = get_measure(f"poly-sup-{shape}", param)
        closed = solve(sample, x_new, alpha, shape, param).region
        oracle = region_oracle(sample, x_new, measure, alpha, scan)
        counts = lambda ys, measure=measure: plausibility_profile(sample, x_new, measure, ys)
        out.append((f"supervised-{shape}",)
                   + compare(closed, oracle, counts, m, rng, (scan.lower, scan.upper), probes))
    values = sample.y
    kappa = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 3.0))
    uscan = ScanSpec.around(np.concatenate([values, kappa - values]))
    for shape, param in (("upper", None), ("lower", None), ("bounded", kappa)):
        measure = get_measure(f"poly-unsup-{shape}", param)
        closed = solve_unsupervised(values, alpha, shape, param).region
        oracle = region_oracle_unsupervised(values, measure, alpha, uscan)
        counts = lambda xs, measure=measure: plausibility_profile_unsupervised(values, measure, xs)
        out.append((f"unsupervised-{shape}",)
                   + compare(closed, oracle, counts, m, rng, (uscan.lower, uscan.upper), probes))
    return out
