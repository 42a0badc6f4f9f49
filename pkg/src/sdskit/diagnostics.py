"""Numerical witnesses for contractivity, escape, and recurrence dichotomies.

Everything here is a finite-horizon heuristic: the underlying dichotomies are
almost-sure tail events, so verdicts are "-indicative" and always carry the
horizon and thresholds they were computed with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import RightProcessPath, TrajectoryBundle
from .errors import ConfigurationError, IdentityViolation, SdsError

VANISHING = "vanishing-indicative"
BOUNDED_AWAY = "bounded-away"
INCONCLUSIVE = "inconclusive"


def _window_mask(bundle: TrajectoryBundle, tail_fraction: float) -> np.ndarray:
    if not 0 < tail_fraction <= 1:
        raise ConfigurationError("tail_fraction must be in (0, 1]")
    return bundle.indices >= (1.0 - tail_fraction) * bundle.horizon


@dataclass(frozen=True)
class ContractionEntry:
    pair: tuple
    radius: float
    tail_fraction: float
    threshold: float
    tail_sup: float          # sup over the window of d(X^x, X^y) * 1[X^x <= r]
    tail_sup_at_visits: float
    visits: int
    verdict: str


def local_contraction_stat(
    bundle: TrajectoryBundle,
    pair: tuple,
    radius: float,
    tail_fraction: float = 0.25,
    threshold: float = 1e-6,
    epochs: Optional[np.ndarray] = None,
) -> ContractionEntry:
    """Local-contractivity witness for one pair of starting points.

    The statistic is |X_n^x - X_n^y| * 1[X_n^x <= radius].  The window is the
    final tail_fraction of the horizon, optionally restricted to the given
    epochs (ladder windows are a first-class option because the exact
    non-contractivity witness of the dyadic example lives there).
    """
    x, y = pair
    ix, iy = bundle.point_index(x), bundle.point_index(y)
    win = _window_mask(bundle, tail_fraction)
    if epochs is not None:
        win &= np.isin(bundle.indices, epochs)
    px = bundle.paths[ix][win]
    py = bundle.paths[iy][win]
    inside = px <= radius
    stat = np.abs(px - py) * inside
    visits = int(inside.sum())
    if visits == 0:
        verdict = INCONCLUSIVE
        sup_at_visits = math.nan
    else:
        sup_at_visits = float(np.abs(px - py)[inside].max())
        if sup_at_visits < threshold:
            verdict = VANISHING
        elif float(np.abs(px - py)[inside].min()) > threshold:
            verdict = BOUNDED_AWAY
        else:
            verdict = INCONCLUSIVE
    return ContractionEntry(
        pair=(x, y),
        radius=radius,
        tail_fraction=tail_fraction,
        threshold=threshold,
        tail_sup=float(stat.max()) if stat.size else math.nan,
        tail_sup_at_visits=sup_at_visits,
        visits=visits,
        verdict=verdict,
    )


@dataclass(frozen=True)
class NormalizedDistance:
    pair: tuple
    series: np.ndarray       # D_n at the bundle's recorded indices
    tail_sup: float
    tail_fraction: float


def normalized_distance(
    bundle: TrajectoryBundle,
    pair: tuple,
    tail_fraction: float = 0.25,
) -> NormalizedDistance:
    """D_n = d(X_n^x, X_n^y) / A_{0,n}, computed in log space.

    For the reflected-affine family D_n is exactly nonincreasing (it follows
    the recursion Z_n = |Z_{n-1} - c_n| pairwise); a violation beyond rounding
    noise is reported as an internal error.
    """
    x, y = pair
    ix, iy = bundle.point_index(x), bundle.point_index(y)
    diff = np.abs(bundle.paths[ix] - bundle.paths[iy])
    with np.errstate(divide="ignore"):
        series = np.where(diff == 0.0, 0.0, np.exp(np.log(np.where(diff == 0, 1.0, diff)) - bundle.s))
    # exact zeros are absorbing for reflected pairs: keep zeros after first hit
    if bundle.family == "reflected_affine":
        slack = 1e-9 * max(1.0, float(series[0]))
        if np.any(np.diff(series) > slack):
            k = int(np.argmax(np.diff(series) > slack))
            raise IdentityViolation(
                f"normalized distance increased at recorded step {int(bundle.indices[k + 1])}"
            )
    win = _window_mask(bundle, tail_fraction)
    return NormalizedDistance(
        pair=(x, y),
        series=series,
        tail_sup=float(series[win].max()) if np.any(win) else math.nan,
        tail_fraction=tail_fraction,
    )


@dataclass(frozen=True)
class EscapeStat:
    radius: float
    tail_fraction: float
    threshold: float
    visits: int              # visits to [0, radius] inside the window
    tail_sup: float          # sup of A_{0,n} * 1[X_n <= radius] over the window
    verdict: str


def extended_escape_stat(
    bundle: TrajectoryBundle,
    radius: float,
    tail_fraction: float = 0.5,
    threshold: float = 1e-3,
    point_index: int = 0,
) -> EscapeStat:
    """Tail behavior of the series A_{0,n} * 1[X_n <= radius] for one point.

    The series is zero whenever the path is outside the ball, so a window
    with no visits contributes a sup of 0 — itself a vanishing witness.  A
    tail sup bounded away from 0 witnesses conservativity.  Only a ball that
    is never visited over the whole recorded path is uninformative (the
    radius was too small to probe anything).
    """
    path = bundle.paths[point_index]
    inside_all = path <= radius
    if not np.any(inside_all):
        return EscapeStat(radius, tail_fraction, threshold, 0, math.nan, INCONCLUSIVE)
    win = _window_mask(bundle, tail_fraction)
    inside = inside_all & win
    visits = int(inside.sum())
    with np.errstate(over="ignore"):
        sup = float(np.exp(bundle.s[inside]).max()) if visits else 0.0
    verdict = VANISHING if sup < threshold else BOUNDED_AWAY
    return EscapeStat(radius, tail_fraction, threshold, visits, sup, verdict)


# ---------------------------------------------------------------------------
# transience / recurrence classifier

@dataclass(frozen=True)
class ClassifyThresholds:
    r0_quantile: float = 0.90
    return_fraction: float = 0.90
    transient_factor: float = 10.0
    transient_fraction: float = 0.95
    min_replicas: int = 30


@dataclass(frozen=True)
class PathSummary:
    """Compact per-replica digest so huge bundles need not be kept around."""

    replica: int
    first_quarter_values: np.ndarray  # subsampled
    final_quarter_min: float
    horizon: int


def summarize_for_classify(bundle: TrajectoryBundle, point_index: int = 0,
                           max_samples: int = 4096) -> PathSummary:
    idx = bundle.indices
    path = bundle.paths[point_index]
    first = path[idx <= bundle.horizon // 4]
    stride = max(1, first.size // max_samples)
    final = path[idx >= 3 * (bundle.horizon // 4)]
    if final.size == 0:
        raise SdsError("no recorded values in the final quarter")
    return PathSummary(
        replica=bundle.replica,
        first_quarter_values=first[::stride].copy(),
        final_quarter_min=float(final.min()),
        horizon=bundle.horizon,
    )


@dataclass(frozen=True)
class ClassificationReport:
    verdict: str  # recurrent-indicative | transient-indicative | inconclusive
    r0: float
    horizon: int
    replicas: int
    returned_fraction: float
    transient_fraction: float
    per_replica_transient: tuple
    per_replica_returned: tuple
    thresholds: ClassifyThresholds = field(default_factory=ClassifyThresholds)


def classify_summaries(
    summaries: Sequence[PathSummary],
    thresholds: ClassifyThresholds = ClassifyThresholds(),
) -> ClassificationReport:
    """Finite-horizon recurrence/transience heuristic over many replicas.

    r0 is the r0_quantile of pooled first-quarter values; a replica "returns"
    if its final-quarter minimum is within [0, r0] and looks transient if that
    minimum exceeds transient_factor * r0.
    """
    if len(summaries) < thresholds.min_replicas:
        raise ConfigurationError(f"classify needs >= {thresholds.min_replicas} replicas")
    horizon = summaries[0].horizon
    pooled = np.concatenate([s.first_quarter_values for s in summaries])
    r0 = float(np.quantile(pooled, thresholds.r0_quantile))
    returned = tuple(bool(s.final_quarter_min <= r0) for s in summaries)
    transient = tuple(
        bool(s.final_quarter_min > thresholds.transient_factor * r0) for s in summaries
    )
    frac_ret = sum(returned) / len(returned)
    frac_tr = sum(transient) / len(transient)
    if frac_tr >= thresholds.transient_fraction:
        verdict = "transient-indicative"
    elif frac_ret >= thresholds.return_fraction:
        verdict = "recurrent-indicative"
    else:
        verdict = INCONCLUSIVE
    return ClassificationReport(
        verdict=verdict,
        r0=r0,
        horizon=horizon,
        replicas=len(summaries),
        returned_fraction=frac_ret,
        transient_fraction=frac_tr,
        per_replica_transient=transient,
        per_replica_returned=returned,
        thresholds=thresholds,
    )


def classify(
    bundles: Iterable[TrajectoryBundle],
    thresholds: ClassifyThresholds = ClassifyThresholds(),
) -> ClassificationReport:
    return classify_summaries([summarize_for_classify(b) for b in bundles], thresholds)


# ---------------------------------------------------------------------------
# Furstenberg limit of the right process

@dataclass(frozen=True)
class FurstenbergEstimate:
    limits: np.ndarray     # per (replica, starting point), converged only
    converged: int
    total: int
    tol: float
    dispersion: float


def furstenberg_limit(
    paths: Iterable[RightProcessPath],
    tol: float = 1e-9,
    regime: str = "contractive",
) -> FurstenbergEstimate:
    """Collect per-replica limits of the right process R_n^x.

    Convergence is declared when the final two recorded values differ by less
    than tol.  Refuses outside the contractive regime, where the limit does
    not exist almost surely.
    """
    if regime != "contractive":
        raise SdsError(f"right process has no a.s. limit in regime {regime!r}")
    limits = []
    total = 0
    for p in paths:
        for vals in p.values:
            total += 1
            if abs(vals[-1] - vals[-2]) < tol:
                limits.append(vals[-1])
    arr = np.array(limits)
    return FurstenbergEstimate(
        limits=arr,
        converged=arr.size,
        total=total,
        tol=tol,
        dispersion=float(arr.std()) if arr.size else math.nan,
    )
