"""Randomised verdicts for the nine structural questions, in both settings.

Each question asks whether one property of a conformal procedure implies
another (monotone measure, threshold-type comparisons, monotone plausibility,
interval-shaped region, exact determination of the region).  Every verdict
is decided by brute force: claims about ``mu_i >= mu_{n+1}`` are checked
against computed scores, regions against the grid oracle, and the threshold
property against scanned comparison sets.

The threshold property means every comparison set
``A_i = {y : mu_i >= mu_{n+1}}`` is a ray ``y <= Y_i - f`` (or ``y >= Y_i - f``)
with one direction and one offset ``f`` that depends on the features only.
Without features the offset must vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .core import (SUPERVISED, CandidatePoint, Sample, ScanSpec, critical_count,
                   default_scan, plausibility_profile, plausibility_profile_unsupervised,
                   region_oracle, region_oracle_unsupervised, score_grid,
                   score_grid_unsupervised)
from .exceptions import ExactCPError
from .measures import (INCREASING, NON_MONOTONE, UPPER_PARAMS, UPPER_UNSUP_PARAMS,
                       bounded_params, bounded_unsup_params, catalog_entry,
                       classify_monotonicity, polynomial_supervised, polynomial_unsupervised)
from .regions import LEFT_RAY, UNION, endpoint_discrepancy

QUESTIONS = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX")
ANSWERS = {q: ("yes" if q == "VI" else "no") for q in QUESTIONS}
DEFAULT_TRIALS = 10_000
DEFAULT_SEED = 20240611

ENDPOINT_TOL = 1e-6
OFFSET_TOL = 1e-7
# the two-ray region of ce4 can have a narrow gap, so its oracle scans finer
_FINE_GRID = 65536
_PROBE_GRID = np.linspace(-3.0, 3.0, 61)


# ---------------------------------------------------------------------------
# trial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    index: int
    sample: Sample
    x_new: np.ndarray
    resampled_y: np.ndarray
    values: np.ndarray
    resampled_values: np.ndarray
    alpha: float
    candidates: np.ndarray
    pairs: np.ndarray


def draw_trial(seed: int, index: int) -> Trial:
    """Random instance with ``floor((n+1) alpha) >= 2`` and non-integer ``(n+1) alpha``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
    n = int(rng.integers(8, 16))
    m = int(rng.integers(2, math.floor(0.45 * (n + 1)) + 1))
    alpha = (m + rng.uniform(0.05, 0.95)) / (n + 1)
    X = rng.normal(size=(n, 1))
    y = rng.normal(size=n)
    values = rng.normal(size=n)
    return Trial(
        index=index,
        sample=Sample(X, y),
        x_new=rng.normal(size=1),
        resampled_y=rng.normal(size=n),
        values=values,
        resampled_values=rng.normal(size=n),
        alpha=float(alpha),
        candidates=np.concatenate([rng.normal(0.0, 1.5, size=4), y[:1], values[:1]]),
        pairs=np.sort(rng.normal(0.0, 2.0, size=(4, 2)), axis=1),
    )


# ---------------------------------------------------------------------------
# brute-force checks
# ---------------------------------------------------------------------------


def comparison_thresholds(scores_fn, n: int, scan: ScanSpec):
    """Scan each comparison set ``A_i`` and locate its threshold.

    Returns
    -------
    directions : ndarray of str
        ``"left"`` for ``A_i = (-inf, t_i]``, ``"right"`` for ``[t_i, inf)``,
        ``"other"`` when ``A_i`` is not a single ray.
    thresholds : ndarray
        ``t_i`` for rays, ``nan`` otherwise.
    """
    grid = np.linspace(scan.lower, scan.upper, scan.grid_size)
    S = scores_fn(grid)
    ind = S[:, :n] >= S[:, n:n + 1]
    steps = scan.width * 10.0 ** np.arange(7)
    far = scores_fn(np.concatenate([grid[0] - steps, grid[-1] + steps]))
    far_ind = far[:, :n] >= far[:, n:n + 1]
    k = steps.shape[0]
    steady = np.all(far_ind[:k] == ind[0], axis=0) & np.all(far_ind[k:] == ind[-1], axis=0)

    flips = ind[1:] != ind[:-1]
    single = steady & (flips.sum(axis=0) == 1)
    directions = np.full(n, "other", dtype=object)
    thresholds = np.full(n, np.nan)
    cols = np.flatnonzero(single)
    if cols.size == 0:
        return directions, thresholds
    j = np.argmax(flips[:, cols], axis=0)
    lo, hi = grid[j].copy(), grid[j + 1].copy()
    lo_state = ind[j, cols]
    rows = np.arange(cols.size)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        live = (hi - lo > scan.tol) & (mid > lo) & (mid < hi)
        if not live.any():
            break
        Sm = scores_fn(mid)
        val = Sm[rows, cols] >= Sm[:, n]
        same = (val == lo_state) & live
        lo = np.where(same, mid, lo)
        hi = np.where(~same & live, mid, hi)
    thresholds[cols] = 0.5 * (lo + hi)
    directions[cols] = np.where(lo_state, "left", "right")
    return directions, thresholds


def _offsets(scores_fn, responses, scan):
    directions, thresholds = comparison_thresholds(scores_fn, responses.shape[0], scan)
    return directions, responses - thresholds


@dataclass(frozen=True)
class ThresholdCheck:
    holds: bool
    reason: str


def threshold_property(measure, X, x_new, response_draws, scan_grid: int = 2048) -> ThresholdCheck:
    """Check the threshold property on several response vectors sharing ``X``."""
    dirs, offs = [], []
    for y in response_draws:
        sample = Sample(X, y)
        scan = ScanSpec.around(np.concatenate([y, [0.0]]), span=10.0, grid_size=scan_grid, tol=1e-11)
        d, o = _offsets(score_grid(sample, x_new, measure), np.asarray(y, dtype=float), scan)
        dirs.append(d)
        offs.append(o)
    return _judge(np.concatenate(dirs), np.concatenate(offs), need_zero=False)


def threshold_property_unsupervised(measure, value_draws, scan_grid: int = 2048) -> ThresholdCheck:
    dirs, offs = [], []
    for v in value_draws:
        v = np.asarray(v, dtype=float)
        scan = ScanSpec.around(np.concatenate([v, [0.0]]), span=10.0, grid_size=scan_grid, tol=1e-11)
        d, o = _offsets(score_grid_unsupervised(v, measure), v, scan)
        dirs.append(d)
        offs.append(o)
    return _judge(np.concatenate(dirs), np.concatenate(offs), need_zero=True)


def _judge(directions, offsets, need_zero: bool) -> ThresholdCheck:
    if np.any(directions == "other"):
        return ThresholdCheck(False, "a comparison set is not a single ray")
    if len(set(directions.tolist())) > 1:
        return ThresholdCheck(False, "comparison sets point in different directions")
    spread = float(offsets.max() - offsets.min())
    scale = max(1.0, float(np.max(np.abs(offsets))))
    if spread > OFFSET_TOL * scale:
        return ThresholdCheck(False, f"offsets differ by {spread:.3g}")
    if need_zero and float(np.max(np.abs(offsets))) > OFFSET_TOL:
        return ThresholdCheck(False, "offset is nonzero")
    return ThresholdCheck(True, "all comparison sets share one threshold offset")


def _monotone_direction(values: np.ndarray) -> str:
    d = np.diff(values)
    up, down = bool(np.any(d > 0)), bool(np.any(d < 0))
    if up and down:
        return NON_MONOTONE
    return INCREASING if up else ("decreasing" if down else "constant")


def _measure_profile(measure, trial: Trial, supervised: bool) -> str:
    """Direction of ``y -> M(bag, y)`` on a fixed probe grid plus random pairs."""
    ys = np.concatenate([_PROBE_GRID, trial.pairs.ravel()])
    order = np.argsort(ys, kind="stable")
    if supervised:
        s = trial.sample
        vals = np.array([measure(s.X, s.y, trial.x_new, y) for y in ys[order]])
    else:
        vals = np.array([measure(trial.values, y) for y in ys[order]])
    return _monotone_direction(vals)


def _claim_violations(entry, trial: Trial, supervised: bool) -> int:
    cands = trial.candidates
    if supervised:
        S = score_grid(trial.sample, trial.x_new, entry.measure)(cands)
        n = trial.sample.n
    else:
        S = score_grid_unsupervised(trial.values, entry.measure)(cands)
        n = trial.values.shape[0]
    bad = 0
    for g, c in enumerate(cands):
        for i in range(n):
            direct = bool(S[g, i] >= S[g, n])
            if supervised:
                claimed = bool(entry.claim(trial.sample, CandidatePoint(tuple(trial.x_new), c), i))
            else:
                claimed = bool(entry.claim(trial.values, c, i))
            bad += direct != claimed
    return bad


# ---------------------------------------------------------------------------
# per-trial evidence
# ---------------------------------------------------------------------------


@dataclass
class Evidence:
    """Per-setting tallies collected across trials."""

    claim_violations: dict = field(default_factory=lambda: {"ce1": 0, "ce2": 0, "ce4": 0})
    ce1_monotone: int = 0
    ce4_monotone: int = 0
    ce2_non_monotone: int = 0
    ce1_threshold_fails: int = 0
    ce2_threshold_holds: int = 0
    ce2_left_ray: int = 0
    ce2_region_match: int = 0
    ce1_one_sided: int = 0
    ce1_region_match: int = 0
    ce4_union: int = 0
    ce4_region_match: int = 0
    ce4_pl_non_monotone: int = 0
    peak_found: int = 0
    peak_region_ok: int = 0
    monotone_pl_one_sided: int = 0
    errors: list = field(default_factory=list)
    failed_trials: dict = field(default_factory=dict)

    def miss(self, key: str, index: int):
        self.failed_trials.setdefault(key, [])
        if len(self.failed_trials[key]) < 5:
            self.failed_trials[key].append(index)

    def tally(self, attr: str, ok, index: int):
        if ok:
            setattr(self, attr, getattr(self, attr) + 1)
        else:
            self.miss(attr, index)


def _entries(supervised: bool):
    suffix = "" if supervised else "u"
    return (catalog_entry("ce1" + suffix), catalog_entry("ce2" + suffix),
            catalog_entry("ce4" + suffix), catalog_entry("ce5" + suffix))


def _oracle(trial: Trial, measure, supervised: bool, fine: bool = False):
    # fine scans resolve narrow gaps: tight window, dense grid, far probes still guard the tails;
    # mirrored anchors keep the window around 1/2, the centre of the quadratic comparisons
    span = 1.0 if fine else 10.0
    grid = _FINE_GRID if fine else 4096
    if supervised:
        shift = trial.x_new.sum() - trial.sample.X.sum(axis=1)
        anchors = np.concatenate([trial.sample.y, trial.sample.y + shift])
    else:
        anchors = trial.values
    if fine:
        anchors = np.concatenate([anchors, 1.0 - anchors])
    scan = ScanSpec.around(anchors, span=span, grid_size=grid)
    if supervised:
        return region_oracle(trial.sample, trial.x_new, measure, trial.alpha, scan)
    return region_oracle_unsupervised(trial.values, measure, trial.alpha, scan)


def _responses(trial: Trial, supervised: bool) -> np.ndarray:
    return trial.sample.y if supervised else trial.values


def _peak_check(trial: Trial, supervised: bool):
    """Bounded polynomial measure: find a < b < c with a plausibility peak at b."""
    if supervised:
        eta = exact.default_eta(trial.sample, trial.x_new)
        measure = polynomial_supervised(bounded_params(eta))
        scan = default_scan(trial.sample, trial.x_new)
        grid = np.linspace(scan.lower, scan.upper, 2049)
        counts = plausibility_profile(trial.sample, trial.x_new, measure, grid)
        n = trial.sample.n
    else:
        measure = polynomial_unsupervised(bounded_unsup_params(1.0))
        scan = ScanSpec.around(trial.values)
        grid = np.linspace(scan.lower, scan.upper, 2049)
        counts = plausibility_profile_unsupervised(trial.values, measure, grid)
        n = trial.values.shape[0]
    b = int(np.argmax(counts))
    a, c = 0, grid.shape[0] - 1
    if not (a < b < c and counts[b] > max(counts[a], counts[c])):
        return False, False
    alpha = (max(counts[a], counts[c]) + 0.5) / (n + 1)
    if supervised:
        region = region_oracle(trial.sample, trial.x_new, measure, alpha, scan)
    else:
        region = region_oracle_unsupervised(trial.values, measure, alpha, scan)
    ok = (bool(region.contains(grid[b])) and not region.contains(grid[a])
          and not region.contains(grid[c]) and not region.is_one_sided)
    return True, ok


def _monotone_pl_one_sided(trial: Trial, supervised: bool) -> bool:
    if supervised:
        region = _oracle(trial, polynomial_supervised(UPPER_PARAMS), True)
    else:
        region = _oracle(trial, polynomial_unsupervised(UPPER_UNSUP_PARAMS), False)
    return region.is_one_sided


def collect(trial: Trial, supervised: bool, ev: Evidence):
    ce1, ce2, ce4, ce5 = _entries(supervised)
    t = trial.index
    try:
        for entry, key in ((ce1, "ce1"), (ce2, "ce2"), (ce4, "ce4")):
            v = _claim_violations(entry, trial, supervised)
            ev.claim_violations[key] += v
            if v:
                ev.miss(f"claim_{key}", t)

        d1 = _measure_profile(ce1.measure, trial, supervised)
        d2 = _measure_profile(ce2.measure, trial, supervised)
        d4 = _measure_profile(ce4.measure, trial, supervised)
        ev.tally("ce1_monotone", d1 == INCREASING, t)
        ev.tally("ce4_monotone", d4 == INCREASING, t)
        ev.tally("ce2_non_monotone", d2 == NON_MONOTONE, t)

        if supervised:
            draws = (trial.sample.y, trial.resampled_y)
            th1 = threshold_property(ce1.measure, trial.sample.X, trial.x_new, draws)
            th2 = threshold_property(ce2.measure, trial.sample.X, trial.x_new, draws)
        else:
            draws = (trial.values, trial.resampled_values)
            th1 = threshold_property_unsupervised(ce1.measure, draws)
            th2 = threshold_property_unsupervised(ce2.measure, draws)
        ev.tally("ce1_threshold_fails", not th1.holds, t)
        ev.tally("ce2_threshold_holds", th2.holds, t)

        resp = _responses(trial, supervised)
        r2 = _oracle(trial, ce2.measure, supervised)
        ev.tally("ce2_left_ray", r2.kind == LEFT_RAY, t)
        ok2 = endpoint_discrepancy(r2, ce2.region_claim(resp, trial.alpha)) <= ENDPOINT_TOL
        ev.tally("ce2_region_match", ok2, t)

        r1 = _oracle(trial, ce5.measure, supervised)
        ev.tally("ce1_one_sided", r1.is_one_sided, t)
        ok1 = endpoint_discrepancy(r1, ce5.region_claim(resp, trial.alpha)) <= ENDPOINT_TOL
        ev.tally("ce1_region_match", ok1, t)

        r4 = _oracle(trial, ce4.measure, supervised, fine=True)
        ev.tally("ce4_union", r4.kind == UNION, t)
        ok4 = endpoint_discrepancy(r4, ce4.region_claim(resp, trial.alpha)) <= ENDPOINT_TOL
        ev.tally("ce4_region_match", ok4, t)
        if supervised:
            counts = plausibility_profile(trial.sample, trial.x_new, ce4.measure, _PROBE_GRID)
        else:
            counts = plausibility_profile_unsupervised(trial.values, ce4.measure, _PROBE_GRID)
        ev.tally("ce4_pl_non_monotone", _monotone_direction(counts) == NON_MONOTONE, t)

        found, ok = _peak_check(trial, supervised)
        ev.tally("peak_found", found, t)
        ev.tally("peak_region_ok", found and ok, t)
        ev.tally("monotone_pl_one_sided", _monotone_pl_one_sided(trial, supervised), t)
    except ExactCPError as exc:
        ev.errors.append({"trial": t, "error": f"{type(exc).__name__}: {exc}"})


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    label: str
    setting: str
    expected_answer: str
    passed: bool
    checks: tuple[tuple[str, bool, str], ...]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "setting": self.setting,
            "expected_answer": self.expected_answer,
            "pass": self.passed,
            "checks": [{"name": n, "pass": p, "detail": d} for n, p, d in self.checks],
        }


def _verdicts(ev: Evidence, trials: int, supervised: bool) -> list[Verdict]:
    setting = "supervised" if supervised else "unsupervised"
    prime = "" if supervised else "'"
    N = trials
    cv = ev.claim_violations

    def every(name, count):
        return (name, count == N and not ev.errors, f"{count}/{N} trials")

    def some(name, count):
        return (name, count >= 1 and not ev.errors, f"{count}/{N} trials")

    def zero(name, count):
        return (name, count == 0, f"{count} violations")

    table = {
        "I": [every("ce1 measure monotone", ev.ce1_monotone),
              zero("ce1 comparison claim", cv["ce1"]),
              some("ce1 breaks the threshold property", ev.ce1_threshold_fails)],
        "II": [every("ce2 satisfies the threshold property", ev.ce2_threshold_holds),
               zero("ce2 comparison claim", cv["ce2"]),
               some("ce2 measure not monotone", ev.ce2_non_monotone)],
        "III": [some("ce2 measure not monotone", ev.ce2_non_monotone),
                every("ce2 region is a left ray", ev.ce2_left_ray),
                every("ce2 region at the order statistic", ev.ce2_region_match)],
        "IV": [every("ce4 measure monotone", ev.ce4_monotone),
               zero("ce4 comparison claim", cv["ce4"]),
               some("ce4 region is not an interval", ev.ce4_union),
               every("ce4 region equals two rays", ev.ce4_region_match)],
        "V": [some("ce1 breaks the threshold property", ev.ce1_threshold_fails),
              every("ce1 region one-sided", ev.ce1_one_sided),
              every("ce1 region at the shifted order statistic", ev.ce1_region_match)],
        "VI": [every("plausibility peak found", ev.peak_found),
               every("peak region contains b and excludes a, c", ev.peak_region_ok),
               every("monotone plausibility gives a one-sided region", ev.monotone_pl_one_sided)],
        "VII": [some("ce2 measure not monotone", ev.ce2_non_monotone),
                every("ce2 region determined exactly", ev.ce2_region_match)],
        "VIII": [some("ce1 breaks the threshold property", ev.ce1_threshold_fails),
                 every("ce1 region determined exactly", ev.ce1_region_match)],
        "IX": [some("ce4 plausibility not monotone", ev.ce4_pl_non_monotone),
               every("ce4 region determined exactly", ev.ce4_region_match)],
    }
    out = []
    for q in QUESTIONS:
        checks = tuple(table[q])
        out.append(Verdict(q + prime, setting, ANSWERS[q], all(c[1] for c in checks), checks))
    return out


@dataclass(frozen=True)
class SuiteReport:
    trials: int
    seed: int
    verdicts: tuple[Verdict, ...]
    notes: tuple[str, ...]
    errors: tuple[dict, ...]
    failed_trials: dict

    @property
    def all_pass(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "all_pass": self.all_pass,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "notes": list(self.notes),
            "errors": list(self.errors),
            "failed_trials": self.failed_trials,
        }


def _ce9_note(seed: int) -> str:
    entry = catalog_entry("ce9")
    label = classify_monotonicity(entry.measure, np.random.default_rng(seed), trials=200,
                                  limit=2.0)
    return (f"ce9: evaluation only, no closed form attempted; measure {label} "
            f"on |y| <= 2")


def run_suite(trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED) -> SuiteReport:
    """Run every question in both settings over ``trials`` random instances."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sup, unsup = Evidence(), Evidence()
    for t in range(trials):
        trial = draw_trial(seed, t)
        collect(trial, True, sup)
        collect(trial, False, unsup)
    verdicts = _verdicts(sup, trials, True) + _verdicts(unsup, trials, False)
    failed = {"supervised": sup.failed_trials, "unsupervised": unsup.failed_trials}
    return SuiteReport(trials, seed, tuple(verdicts), (_ce9_note(seed),),
                       tuple(sup.errors + unsup.errors), failed)
