"""
Experiment Trends Module

Aggregates TrialRecords per sweep point and fits log-log error slopes.

Usage:
    from topk_ranking.trends import summarize, error_slopes

    summaries = summarize(records)
    slopes = error_slopes(summaries, against="L")
    slopes["spectral"].slope      # ≈ -0.5 when the error scales as 1/sqrt(L)
"""

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from topk_ranking.errors import InsufficientData, InvalidArgument

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointSummary:
    """Aggregates for one (method, p, L, delta) sweep point over its ok trials."""

    method: str
    n: int
    p: float
    L: int
    K: int
    delta: Optional[float]
    trials: int
    excluded: int
    mean_rel_linf: float
    std_rel_linf: float
    mean_rel_l2: float
    std_rel_l2: float
    accuracy: float
    mean_iterations: float

    @property
    def samples(self) -> float:
        """Expected number of comparisons n²pL/2."""
        return self.n * self.n * self.p * self.L / 2.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["samples"] = self.samples
        return data


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    r_value: float
    points: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _mean_std(values: List[float]) -> Tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def summarize(records: Iterable[Any]) -> List[PointSummary]:
    """
    Group records by (method, p, L, delta) and aggregate the ok trials.

    Args:
        records: TrialRecords from run_experiment or read_csv

    Returns:
        One PointSummary per group, in first-seen order. Non-ok trials
        (disconnected, reducible, not converged) are counted in `excluded` only.
    """
    groups: Dict[Tuple, List[Any]] = defaultdict(list)
    for record in records:
        groups[(record.method, record.n, record.p, record.L, record.K, record.delta)].append(record)

    summaries = []
    for (method, n, p, L, K, delta), members in groups.items():
        ok = [r for r in members if r.ok]
        mean_linf, std_linf = _mean_std([r.rel_linf for r in ok])
        mean_l2, std_l2 = _mean_std([r.rel_l2 for r in ok])
        accuracy, _ = _mean_std([r.topk_exact for r in ok])
        iterations, _ = _mean_std([r.iterations for r in ok])
        summaries.append(PointSummary(
            method=method, n=n, p=p, L=L, K=K, delta=delta,
            trials=len(ok), excluded=len(members) - len(ok),
            mean_rel_linf=mean_linf, std_rel_linf=std_linf,
            mean_rel_l2=mean_l2, std_rel_l2=std_l2,
            accuracy=accuracy, mean_iterations=iterations,
        ))
        if len(ok) < len(members):
            logger.warning(f"{method} at p={p}, L={L}, delta={delta}: excluded {len(members) - len(ok)} trials")
    return summaries


def fit_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """
    Ordinary least-squares fit of log(y) against log(x).

    Raises:
        InsufficientData: fewer than 2 distinct x values
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidArgument(f"x and y lengths differ: {x.size} vs {y.size}")
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    x, y = x[keep], y[keep]
    if np.unique(x).size < 2:
        raise InsufficientData(f"Need at least 2 distinct sweep points for a slope, got {np.unique(x).size}")
    fit = linregress(np.log(x), np.log(y))
    return SlopeFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        r_value=float(fit.rvalue),
        points=int(x.size),
    )


_AXES = {
    "L": lambda s: s.L,
    "p": lambda s: s.p,
    "samples": lambda s: s.samples,
}


def error_slopes(summaries: Sequence[PointSummary], against: str = "L", metric: str = "rel_linf") -> Dict[str, SlopeFit]:
    """
    Per-method slope of log(mean error) against log(L), log(p) or log(n²pL/2).

    Methods with fewer than two usable sweep points are left out.
    """
    if against not in _AXES:
        raise InvalidArgument(f"against must be one of {sorted(_AXES)}, got {against!r}")
    if metric not in ("rel_linf", "rel_l2"):
        raise InvalidArgument(f"metric must be rel_linf or rel_l2, got {metric!r}")
    attr = f"mean_{metric}"
    by_method: Dict[str, List[PointSummary]] = defaultdict(list)
    for summary in summaries:
        by_method[summary.method].append(summary)

    slopes = {}
    for method, rows in by_method.items():
        try:
            slopes[method] = fit_slope([_AXES[against](r) for r in rows], [getattr(r, attr) for r in rows])
        except InsufficientData:
            logger.info(f"Skipping slope for {method}: not enough sweep points")
    if not slopes:
        raise InsufficientData(f"No method has 2 or more sweep points along {against}")
    return slopes


def is_nondecreasing(values: Sequence[float], tolerance: float = 0.02, allowed_inversions: int = 1) -> bool:
    """Monotone up to at most `allowed_inversions` drops, none larger than `tolerance`."""
    drops = [a - b for a, b in zip(values, values[1:]) if b < a]
    return len(drops) <= allowed_inversions and all(d <= tolerance for d in drops)
