"""Evaluation arithmetic: MAPE (mean / 90th percentile), coverage, NIW, nRMSE.

Relative-error metrics (MAPE, NIW) exclude hours whose ground truth is below
``EPSILON_GCO2_KWH``: near-zero carbon intensity makes the ratios unbounded.
Excluded hours are counted so reports stay honest about them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AllBelowEpsilon, DegenerateSeries, LengthMismatch

EPSILON_GCO2_KWH = 1.0


def mape(
    actual: Sequence[float],
    forecast: Sequence[float],
    epsilon: float = EPSILON_GCO2_KWH,
) -> float:
    """Mean absolute percentage error over hours with actual >= epsilon."""
    y = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if y.shape != f.shape:
        raise LengthMismatch("actual and forecast lengths differ")
    keep = y >= epsilon
    if not np.any(keep):
        raise AllBelowEpsilon("no hour has ground truth above the epsilon threshold")
    return float(100.0 * np.mean(np.abs(y[keep] - f[keep]) / y[keep]))


def excluded_below_epsilon(
    actual: Sequence[float], epsilon: float = EPSILON_GCO2_KWH
) -> int:
    y = np.asarray(actual, dtype=np.float64)
    return int(np.sum(y < epsilon))


def percentile_rank(values: Sequence[float], p: float) -> float:
    """Order statistic at ceil(p * n), 1-indexed (no interpolation)."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    k = math.ceil(p * len(ordered))
    k = min(max(k, 1), len(ordered))
    return ordered[k - 1]


def window_mapes(
    issuances: Sequence[tuple[Sequence[float], Sequence[float]]],
    epsilon: float = EPSILON_GCO2_KWH,
) -> tuple[float, float]:
    """(mean, 90th-percentile) of per-issuance window MAPEs."""
    if not issuances:
        raise ValueError("at least one issuance required")
    per_window = [mape(a, f, epsilon) for a, f in issuances]
    return float(np.mean(per_window)), percentile_rank(per_window, 0.9)


def coverage(
    actual: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
) -> float:
    """Percent of hours whose truth falls inside [lower, upper] (inclusive)."""
    y = np.asarray(actual, dtype=np.float64)
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    if not (y.shape == lo.shape == hi.shape):
        raise LengthMismatch("coverage inputs must have equal lengths")
    if y.size == 0:
        raise ValueError("empty sample")
    inside = (y >= lo) & (y <= hi)
    return float(100.0 * np.mean(inside))


def niw(
    actual: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    epsilon: float = EPSILON_GCO2_KWH,
) -> float:
    """Mean normalized interval width, percent: 100 * (U - L) / y."""
    y = np.asarray(actual, dtype=np.float64)
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    if not (y.shape == lo.shape == hi.shape):
        raise LengthMismatch("niw inputs must have equal lengths")
    keep = y >= epsilon
    if not np.any(keep):
        raise AllBelowEpsilon("no hour has ground truth above the epsilon threshold")
    return float(100.0 * np.mean((hi[keep] - lo[keep]) / y[keep]))


def normalized_rmse(
    truth: Sequence[float],
    estimate: Sequence[float],
    positions: Sequence[int],
    norm_stats: tuple[float, float],
) -> float:
    """RMSE of z-scored truth vs estimate, restricted to ``positions``."""
    mean, std = norm_stats
    if std <= 0.0:
        raise DegenerateSeries("zero-variance series cannot be z-scored")
    if len(positions) == 0:
        raise ValueError("positions must be non-empty")
    t = np.asarray(truth, dtype=np.float64)[list(positions)]
    e = np.asarray(estimate, dtype=np.float64)[list(positions)]
    zt = (t - mean) / std
    ze = (e - mean) / std
    return float(np.sqrt(np.mean((zt - ze) ** 2)))


@dataclass
class EvalReport:
    """Per-grid metric bundle for one protocol run."""

    grid_id: str
    protocol: str  # forecast_4d | forecast_extended | uncertainty | imputation
    n_issuances: int = 0
    mean_mape: float | None = None
    p90_mape: float | None = None
    coverage_overall: float | None = None
    coverage_by_day: tuple[float, ...] | None = None
    mean_niw: float | None = None
    nrmse: float | None = None
    excluded_hours: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "grid_id": self.grid_id,
            "protocol": self.protocol,
            "n_issuances": self.n_issuances,
            "mean_mape": self.mean_mape,
            "p90_mape": self.p90_mape,
            "coverage_overall": self.coverage_overall,
            "coverage_by_day": list(self.coverage_by_day) if self.coverage_by_day else None,
            "mean_niw": self.mean_niw,
            "nrmse": self.nrmse,
            "excluded_hours": self.excluded_hours,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table: one row per grid (grid, mean, 90th, ...)."""
    headers = ["grid", "mean", "90th", "coverage", "niw", "nrmse", "n"]
    rows = []
    for r in reports:
        rows.append([
            r.grid_id,
            _fmt(r.mean_mape),
            _fmt(r.p90_mape),
            _fmt(r.coverage_overall),
            _fmt(r.mean_niw),
            _fmt(r.nrmse, 4),
            str(r.n_issuances),
        ])
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


def _fmt(value: float | None, places: int = 2) -> str:
    if value is None:
        return "-"
    return f"{value:.{places}f}"
