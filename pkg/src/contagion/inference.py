"""Scale/floor fitting and enhancement-factor maximum likelihood.

Two estimators live here. The first recovers the task-specific scale p0 and
the visibility floor v_min by minimizing a trial-weighted mean absolute
percent error between affine-rescaled computed visibility and observed
response rates, over single-message events. The second recovers the social
enhancement factors F(n_e) by binomial maximum likelihood: events are binned
by their computed raw visibility nu, the n_e = 1 bins calibrate the baseline
response probability P(nu) (with F(1) = 1 by convention), and each F(n_e)
solves a one-dimensional stationarity condition by bracketed bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .atrisk import risk_segments
from .binning import FLOOR_BIN, log_bin_center, log_bin_index
from .errors import BracketError, ContagionError, FitError
from .visibility import TrfBundle

logger = logging.getLogger(__name__)

MIN_TRIALS = 30  # calibration points below this are flagged, not fitted


@dataclass(frozen=True)
class VisibilityBin:
    """Counts for one raw-visibility bin: nu label, trials, responses."""

    nu: float
    trials: int
    responses: int
    mean_nu: float = 0.0
    index: int | float = FLOOR_BIN  # log-bin index, or the exact nu value

    def __post_init__(self):
        if not 0 <= self.responses <= self.trials:
            raise ContagionError("need 0 <= responses <= trials")


@dataclass(frozen=True)
class CalibrationPoint:
    predicted: float
    observed: float
    trials: int


@dataclass
class CalibrationCurve:
    points: list[CalibrationPoint]

    def __post_init__(self):
        for pt in self.points:
            if not (0.0 <= pt.predicted <= 1.0 and 0.0 <= pt.observed <= 1.0):
                raise ContagionError("calibration values must lie in [0, 1]")
            if pt.trials <= 0:
                raise ContagionError("calibration points need positive trials")


def wmap_error(curve: CalibrationCurve, p0: float, v_min: float) -> float:
    """Trial-weighted mean of |p0 * observed + v_min - predicted| / predicted."""
    num = 0.0
    den = 0.0
    for pt in curve.points:
        if pt.predicted <= 0.0:
            raise ContagionError("percent error undefined at predicted = 0")
        num += pt.trials * abs(p0 * pt.observed + v_min - pt.predicted) / pt.predicted
        den += pt.trials
    return num / den


def _transposed(curve: CalibrationCurve) -> CalibrationCurve:
    # The scale fit rescales computed visibility onto the observed response
    # rate, so the observed rate takes the target (denominator) slot.
    return CalibrationCurve(
        points=[
            CalibrationPoint(predicted=pt.observed, observed=pt.predicted, trials=pt.trials)
            for pt in curve.points
            if pt.observed > 0.0
        ]
    )


def fit_scale_and_floor(
    curve: CalibrationCurve,
    grid_log10_p0: tuple[float, float] = (-4.0, 5.0),
    grid_log10_v: tuple[float, float] = (-12.0, -0.5),
) -> tuple[float, float]:
    """Fit (p0, v_min) so that p0 * predicted + v_min tracks observed.

    Points are (computed raw visibility, observed response rate, trials) from
    single-message events. Coarse log-grid search followed by simplex descent
    on the wmap objective; deterministic. Zero-observed points carry no
    percent-error information and are skipped.
    """
    if len({(pt.predicted, pt.observed) for pt in curve.points}) < 3:
        raise FitError("need at least 3 distinct calibration points")
    if all(pt.observed == 0.0 for pt in curve.points):
        raise FitError("degenerate curve: every observed rate is zero")
    target = _transposed(curve)

    best = None
    for lg_p0 in np.arange(grid_log10_p0[0], grid_log10_p0[1] + 1e-9, 0.25):
        for lg_v in np.arange(grid_log10_v[0], grid_log10_v[1] + 1e-9, 0.25):
            err = wmap_error(target, 10.0**lg_p0, 10.0**lg_v)
            if best is None or err < best[0]:
                best = (err, lg_p0, lg_v)

    def objective(x) -> float:
        return wmap_error(target, math.exp(x[0]), math.exp(x[1]))

    x0 = np.array([best[1] * math.log(10.0), best[2] * math.log(10.0)])
    res = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxiter": 3000, "xatol": 1e-10, "fatol": 1e-14},
    )
    res2 = optimize.minimize(
        objective,
        res.x,
        method="Nelder-Mead",
        options={"maxiter": 3000, "xatol": 1e-10, "fatol": 1e-14},
    )
    x = res2.x if res2.fun <= res.fun else res.x
    return math.exp(x[0]), math.exp(x[1])


def collect_visibility_bins(
    series_list,
    susceptibility: Callable[[int], float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    per_decade: int | None = 10,
) -> dict[int, dict]:
    """Aggregate at-risk seconds into raw-visibility bins per exposure count.

    Returns {n_e: {bin_key: [trials, responses, sum_nu]}}. Each at-risk
    second is one Bernoulli trial; the response second is a success trial.
    Seconds whose computed visibility is exactly zero pool into the floor
    bin. With ``per_decade=None`` every distinct computed visibility value
    keys its own cell (exact matching across exposure counts, at the cost of
    many small cells).
    """
    edges = trf.bin_edges
    out: dict[int, dict] = {}
    dens_cache: dict[int, tuple] = {}
    for s in series_list:
        cached = dens_cache.get(s.n_f)
        if cached is None:
            p_nf = susceptibility(s.n_f)
            dens = trf.densities_for(s.n_f)
            # single-message nu values repeat per delay bin: index them once
            nu_idx = {0.0: FLOOR_BIN if per_decade is not None else 0.0}
            for d in dens:
                nu = p_nf * d
                nu_idx[nu] = log_bin_index(nu, per_decade) if per_decade is not None else nu
            cached = (p_nf, dens, nu_idx)
            dens_cache[s.n_f] = cached
        p_nf, dens, nu_idx = cached
        segs = risk_segments(s, p_nf, dens, edges, site, obs_end)
        responded = s.response_time is not None and s.response_time <= obs_end
        for seg in segs:
            idx = nu_idx.get(seg.nu)
            if idx is None:
                idx = log_bin_index(seg.nu, per_decade) if per_decade is not None else seg.nu
            cell = out.setdefault(seg.n_e, {}).setdefault(idx, [0, 0, 0.0])
            cell[0] += seg.seconds
            cell[2] += seg.nu * seg.seconds
            if responded and seg.start <= s.response_time < seg.end:
                cell[1] += 1
    return out


def visibility_bins(
    series_list,
    susceptibility: Callable[[int], float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    per_decade: int | None = 10,
    raw: dict[int, dict] | None = None,
) -> dict[int, list[VisibilityBin]]:
    """Visibility-binned trial/response counts keyed by exposure count.

    Bins at n_e > 1 with no matching baseline (n_e = 1) bin, or whose
    baseline saw no responses, are dropped: they carry no likelihood
    information about the enhancement factor. Pass ``raw`` to reuse an
    existing :func:`collect_visibility_bins` pass.
    """
    if raw is None:
        raw = collect_visibility_bins(series_list, susceptibility, trf, site, obs_end, per_decade)
    base = raw.get(1, {})
    usable = {idx for idx, (n, r, _) in base.items() if n > 0 and r > 0}
    out: dict[int, list[VisibilityBin]] = {}
    for n_e, cells in sorted(raw.items()):
        bins = []
        for idx, (n, r, snu) in sorted(cells.items()):
            if n_e > 1 and idx not in usable:
                continue
            label = log_bin_center(idx, per_decade) if per_decade is not None else float(idx)
            bins.append(
                VisibilityBin(
                    nu=label,
                    trials=n,
                    responses=r,
                    mean_nu=snu / n if n else 0.0,
                    index=idx,
                )
            )
        if bins:
            out[n_e] = bins
    return out


def pooled_visibility_bins(
    series_list,
    susceptibility: Callable[[int], float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    min_baseline_responses: int = 50,
    raw: dict[int, dict] | None = None,
) -> dict[int, list[VisibilityBin]]:
    """Exact visibility cells pooled until each has a well-measured baseline.

    Every distinct computed-visibility value is first kept as its own cell
    (exact matching across exposure counts); adjacent cells in nu order then
    merge until the pooled n_e = 1 cell holds at least
    ``min_baseline_responses`` responses. Pooling keys on the baseline only,
    never on higher-count outcomes, so it introduces no selection on the
    quantity being estimated. The zero-visibility floor pools separately.
    """
    if raw is None:
        raw = collect_visibility_bins(
            series_list, susceptibility, trf, site, obs_end, per_decade=None
        )
    base = raw.get(1, {})
    if not base:
        raise ContagionError("need n_e = 1 cells to calibrate the baseline")

    pools: dict[float, int] = {}
    pool_id = 0
    acc = 0
    positive = sorted(nu for nu in base if nu > 0.0)
    for i, nu in enumerate(positive):
        pools[nu] = pool_id
        acc += base[nu][1]
        if acc >= min_baseline_responses and i != len(positive) - 1:
            pool_id += 1
            acc = 0
    floor_pool = -1  # distinct key; the floor never merges with positive nu

    out: dict[int, list[VisibilityBin]] = {}
    for n_e, cells in sorted(raw.items()):
        merged: dict[int, list] = {}
        for nu, (n, r, snu) in cells.items():
            key = floor_pool if nu == 0.0 else pools.get(nu)
            if key is None:
                continue  # no baseline cell at this exact value
            cell = merged.setdefault(key, [0, 0, 0.0])
            cell[0] += n
            cell[1] += r
            cell[2] += snu
        bins = [
            VisibilityBin(
                nu=(snu / n if n else 0.0),
                trials=n,
                responses=r,
                mean_nu=snu / n if n else 0.0,
                index=key,
            )
            for key, (n, r, snu) in sorted(merged.items())
            if n > 0
        ]
        if bins:
            out[n_e] = bins
    return out


def scale_fit_curve(
    series_list,
    susceptibility: Callable[[int], float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    per_decade: int = 10,
    min_trials: int = MIN_TRIALS,
    min_responses: int = 1,
    raw: dict[int, dict[int, list]] | None = None,
) -> CalibrationCurve:
    """Single-message calibration curve for the scale/floor fit.

    One point per visibility bin over n_e = 1 at-risk seconds: predicted is
    the mean computed raw visibility, observed the response rate. Bins with
    fewer than ``min_trials`` trials or ``min_responses`` responses are
    excluded: with per-second trials the observable rate is bounded by the
    response count, so sparse-response bins carry mostly noise.
    """
    if raw is None:
        raw = collect_visibility_bins(series_list, susceptibility, trf, site, obs_end, per_decade)
    pts = []
    for idx, (n, r, snu) in sorted(raw.get(1, {}).items()):
        # The floor bin is structural (all beyond-support seconds pool into
        # it) and is the only anchor for the visibility floor, so it is
        # exempt from the response filter.
        needed = 1 if idx == FLOOR_BIN else max(min_responses, 1)
        if n < min_trials or r < needed:
            continue
        pts.append(CalibrationPoint(predicted=snu / n, observed=r / n, trials=n))
    if not pts:
        raise FitError("no usable single-message bins")
    return CalibrationCurve(points=pts)


def _stationarity(f: float, cells: Sequence[tuple[int, int, float]]) -> float:
    total = 0.0
    for trials, responses, p in cells:
        total += responses / f - (trials - responses) * p / (1.0 - f * p)
    return total


def log_likelihood(f: float, cells: Sequence[tuple[int, int, float]]) -> float:
    """Binomial log-likelihood of one enhancement factor, up to constants."""
    total = 0.0
    for trials, responses, p in cells:
        fp = f * p
        if fp >= 1.0 or (fp == 0.0 and responses > 0):
            return -math.inf
        if responses > 0:
            total += responses * math.log(fp)
        if trials > responses:
            total += (trials - responses) * math.log(1.0 - fp)
    return total


def fit_enhancement(bins_by_ne: dict[int, list[VisibilityBin]]) -> "EnhancementTable":
    """Maximum-likelihood enhancement factors from visibility-binned counts.

    F(1) = 1 by convention and P(nu) = responses/trials from the n_e = 1
    bins. Each F(n_e > 1) is the root of the likelihood stationarity
    condition, bisected inside (0, 1/max P(nu)) so that F * P stays a valid
    probability; the bracket is tightened until it cannot shrink further.
    """
    from .models import EnhancementTable

    if 1 not in bins_by_ne:
        raise ContagionError("need n_e = 1 bins to calibrate the baseline")
    baseline: dict[int, float] = {}
    for b in bins_by_ne[1]:
        if b.trials > 0:
            baseline[b.index] = b.responses / b.trials

    values = {1: 1.0}
    for n_e, bins in sorted(bins_by_ne.items()):
        if n_e == 1:
            continue
        cells = []
        for b in bins:
            if b.index not in baseline:
                raise ContagionError(
                    f"visibility bin {b.nu:g} at n_e={n_e} has no n_e=1 baseline"
                )
            p = baseline[b.index]
            if p > 0.0:
                cells.append((b.trials, b.responses, p))
        if not cells or all(r == 0 for _, r, _ in cells):
            values[n_e] = 0.0  # likelihood peaks at the boundary
            continue
        p_max = max(p for _, _, p in cells)
        lo = 1e-12
        hi = (1.0 - 1e-12) / p_max
        g_lo = _stationarity(lo, cells)
        g_hi = _stationarity(hi, cells)
        if not (g_lo > 0.0 > g_hi):
            raise BracketError(
                f"no stationary point for F({n_e}) inside the bracket",
                lo,
                hi,
                g_lo,
                g_hi,
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break  # interval at float resolution
            if _stationarity(mid, cells) > 0.0:
                lo = mid
            else:
                hi = mid
        values[n_e] = 0.5 * (lo + hi)
    return EnhancementTable(values=values)


def fit_enhancement_by_cohort(
    series_list,
    cohorts: Sequence[tuple[int, int]],
    susceptibility: Callable[[int], float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    per_decade: int = 10,
) -> dict[tuple[int, int], "EnhancementTable"]:
    """Independent enhancement MLE per friend-count band.

    Empty cohorts are skipped with a warning rather than failing the batch.
    """
    out = {}
    for lo, hi in cohorts:
        subset = [s for s in series_list if lo <= s.n_f <= hi]
        if not subset:
            logger.warning("cohort n_f in [%d, %d] has no series; skipped", lo, hi)
            continue
        bins = visibility_bins(subset, susceptibility, trf, site, obs_end, per_decade)
        if 1 not in bins:
            logger.warning("cohort n_f in [%d, %d] has no baseline bins; skipped", lo, hi)
            continue
        out[(lo, hi)] = fit_enhancement(bins)
    return out


def fit_scale_floor_and_tail(
    series_list,
    base_params: dict[str, float],
    trf: TrfBundle,
    site: str,
    obs_end: int,
    form=None,
    per_decade: int = 10,
) -> tuple[float, float, float]:
    """Joint search over (p0, v_min, E): the high-friend-count pole offset of
    the five-parameter susceptibility form is refit together with the scale
    and floor, rebuilding the calibration curve at each candidate E.

    Optional mode; the default pipeline keeps E from the RMS fit.
    """
    from .visibility import SusceptibilityForm, evaluate_form

    if form is None:
        form = SusceptibilityForm.DIGG

    def objective(x) -> float:
        p0, v, e = (math.exp(v_) for v_ in x)
        params = dict(base_params, E=e)
        curve = scale_fit_curve(
            series_list,
            lambda nf: evaluate_form(form, params, nf),
            trf,
            site,
            obs_end,
            per_decade,
        )
        return wmap_error(_transposed(curve), p0, v)

    p0_init, v_init = fit_scale_and_floor(
        scale_fit_curve(
            series_list,
            lambda nf: evaluate_form(form, base_params, nf),
            trf,
            site,
            obs_end,
            per_decade,
        )
    )
    x0 = np.array([math.log(p0_init), math.log(v_init), math.log(base_params["E"])])
    res = optimize.minimize(
        objective, x0, method="Nelder-Mead", options={"maxiter": 600, "xatol": 1e-6}
    )
    p0, v, e = (math.exp(v_) for v_ in res.x)
    return p0, v, e
