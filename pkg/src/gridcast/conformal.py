"""Horizon-specific rolling conformal prediction intervals.

Forecasts are issued daily at 00:00 UTC for up to 96 hours. Because ground
truth for horizon hours beyond the first day arrives with a delay, each
horizon hour keeps its own residual history, and calibration for issue day
``d`` may only read residuals from forecasts issued on or before
``d - lag(k)``, where ``k`` is the hour's horizon day and ``lag(k) = k - 1``
by default. Interval bounds are the empirical-tail order statistics of the
most recent ``window_days`` qualifying issue days, added to the point
forecast:

    lower_h = max(0, yhat_h + q_lo),  upper_h = max(0, yhat_h + q_hi)

with q_lo / q_hi the (1-alpha)/2 and (1+alpha)/2 order-statistic quantiles
(index ceil((m+1) * p), clamped to [1, m]). Residuals are signed
``actual - forecast`` so the additive form covers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Callable, Sequence

import numpy as np

from .backends import ForecastRecord
from .errors import GridMismatch, LengthMismatch, ResolutionMismatch
from .metrics import coverage as coverage_percent
from .series import CarbonSeries, Resolution, day_start

MAX_HORIZON_HOURS = 96
DEFAULT_WINDOW_DAYS = 75
DEFAULT_MIN_DAYS = 10
DEFAULT_FALLBACK_WIDTH = 0.5
# queues keep a few days beyond the window so lagged availability never starves
RETENTION_SLACK_DAYS = 8


def default_lag(horizon_day: int) -> int:
    """Days before a horizon-day block's residuals become available."""
    return horizon_day - 1


def horizon_day(hour: int) -> int:
    """1-based horizon day k for a 1-based horizon hour."""
    if not 1 <= hour <= MAX_HORIZON_HOURS:
        raise ValueError(f"hour must be in 1..{MAX_HORIZON_HOURS}")
    return (hour + 23) // 24


@dataclass(frozen=True)
class CoverageTarget:
    """Desired interval coverage level, e.g. 0.95 for 95%."""

    alpha: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")

    @property
    def tail_lo(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @property
    def tail_hi(self) -> float:
        return (1.0 + self.alpha) / 2.0


@dataclass(frozen=True)
class IntervalSet:
    """Per-hour bounds plus one calibration flag per horizon-day block."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    calibrated: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper lengths differ")
        for lo, hi in zip(self.lower, self.upper):
            if not (0.0 <= lo <= hi):
                raise ValueError("intervals need 0 <= lower <= upper")
        if len(self.calibrated) != (len(self.lower) + 23) // 24:
            raise ValueError("one calibrated flag per horizon-day block required")


def empirical_quantile(residuals: Sequence[float], p: float) -> float:
    """Order statistic at index ceil((m+1) * p), clamped to [1, m]."""
    m = len(residuals)
    if m == 0:
        raise ValueError("no residuals")
    k = math.ceil((m + 1) * p)
    k = min(max(k, 1), m)
    return sorted(residuals)[k - 1]


def residual_quantiles(
    residuals: Sequence[float], target: CoverageTarget
) -> tuple[float, float]:
    """(q_lo, q_hi) order statistics for the target's tails."""
    ordered = sorted(residuals)
    m = len(ordered)
    if m == 0:
        raise ValueError("no residuals")
    k_lo = min(max(math.ceil((m + 1) * target.tail_lo), 1), m)
    k_hi = min(max(math.ceil((m + 1) * target.tail_hi), 1), m)
    return ordered[k_lo - 1], ordered[k_hi - 1]


class ResidualLedger:
    """Per-grid, per-horizon-hour residual history with issue-day bookkeeping.

    Each of the 96 queues holds (issue_day, residual) sorted by issue day,
    at most one entry per issue day (re-recording upserts, which keeps
    daily issuance idempotent). Mutation must be serialized per grid;
    reads are safe concurrently with each other.
    """

    def __init__(
        self,
        grid_id: str,
        window_days: int = DEFAULT_WINDOW_DAYS,
        lag: Callable[[int], int] = default_lag,
    ) -> None:
        if window_days <= 0:
            raise ValueError("window_days must be positive")
        self.grid_id = grid_id
        self.window_days = window_days
        self.lag = lag
        self.per_hour: list[list[tuple[date, float]]] = [
            [] for _ in range(MAX_HORIZON_HOURS)
        ]

    def insert(self, hour: int, issue_day: date, residual: float) -> None:
        """Upsert one residual; keeps the queue sorted and trimmed."""
        if not math.isfinite(residual):
            raise ValueError("residuals must be finite")
        queue = self.per_hour[hour - 1]
        days = [d for d, _ in queue]
        pos = bisect.bisect_left(days, issue_day)
        if pos < len(queue) and queue[pos][0] == issue_day:
            queue[pos] = (issue_day, residual)
        else:
            queue.insert(pos, (issue_day, residual))
        keep = self.window_days + RETENTION_SLACK_DAYS
        if len(queue) > keep:
            del queue[: len(queue) - keep]

    def copy(self) -> "ResidualLedger":
        clone = ResidualLedger(self.grid_id, self.window_days, self.lag)
        clone.per_hour = [list(queue) for queue in self.per_hour]
        return clone

    def known_before(self, day: date) -> "ResidualLedger":
        """View restricted to residuals whose ground truth predates ``day``.

        An entry for horizon hour h of the forecast issued on j has its
        truth on day j + (horizon_day(h) - 1); it is knowable at the
        midnight of ``day`` only if that lands on day - 1 or earlier. Live
        ledgers satisfy this by construction (truth drives recording); the
        filter makes re-issuing a past day reproducible when the stored
        ledger has since been advanced by later issuances.
        """
        clone = ResidualLedger(self.grid_id, self.window_days, self.lag)
        for h0, queue in enumerate(self.per_hour):
            k = horizon_day(h0 + 1)
            cutoff = day - timedelta(days=k)
            clone.per_hour[h0] = [(d, r) for d, r in queue if d <= cutoff]
        return clone


def record_outcome(
    ledger: ResidualLedger, record: ForecastRecord, actual: CarbonSeries
) -> ResidualLedger:
    """Append residuals (actual - forecast) for every horizon hour with truth.

    ``actual`` may cover any prefix/subset of the horizon; hours without
    truth are skipped. Entries are tagged with the record's issue day.
    """
    if record.grid_id != ledger.grid_id:
        raise GridMismatch(
            f"record is for {record.grid_id!r}, ledger for {ledger.grid_id!r}"
        )
    if actual.grid_id != ledger.grid_id:
        raise GridMismatch(
            f"actuals are for {actual.grid_id!r}, ledger for {ledger.grid_id!r}"
        )
    if actual.resolution is not Resolution.HOURLY:
        raise ResolutionMismatch("residual recording requires hourly actuals")
    issue_ts = day_start(record.issue_day)
    data = actual.to_array()
    n_hours = min(len(record.horizon), MAX_HORIZON_HOURS)
    for h in range(1, n_hours + 1):
        ts = issue_ts + timedelta(hours=h - 1)
        steps, rem = divmod(ts - actual.start, actual.resolution.step)
        idx = int(steps)
        if rem != timedelta(0) or not 0 <= idx < len(actual):
            continue
        y = data[idx]
        if math.isnan(y):
            continue
        ledger.insert(h, record.issue_day, float(y) - record.horizon[h - 1])
    return ledger


def available_residuals(
    ledger: ResidualLedger, hour: int, as_of_day: date
) -> list[float]:
    """Residuals usable at issue time, newest ``window_days`` issue days.

    Only entries from forecasts issued on or before
    ``as_of_day - lag(horizon_day(hour))`` qualify; later entries would
    require ground truth that is not yet observable.
    """
    k = horizon_day(hour)
    cutoff = as_of_day - timedelta(days=ledger.lag(k))
    queue = ledger.per_hour[hour - 1]
    qualifying = [(d, r) for d, r in queue if d <= cutoff]
    recent = qualifying[-ledger.window_days:]
    return [r for _, r in recent]


def calibrate(
    ledger: ResidualLedger,
    record: ForecastRecord,
    target: CoverageTarget = CoverageTarget(),
    min_days: int = DEFAULT_MIN_DAYS,
    fallback_width: float = DEFAULT_FALLBACK_WIDTH,
) -> IntervalSet:
    """Wrap a point forecast in per-hour conformal intervals.

    Horizon-day blocks where any hour has fewer than ``min_days``
    qualifying issue days fall back to the relative-width interval
    ``[max(0, yhat*(1-w)), yhat*(1+w)]`` and are flagged uncalibrated.
    """
    horizon = record.horizon
    if len(horizon) > MAX_HORIZON_HOURS:
        raise ValueError(f"calibrate supports at most {MAX_HORIZON_HOURS} hours")
    n_blocks = (len(horizon) + 23) // 24
    pools = [
        available_residuals(ledger, h, record.issue_day)
        for h in range(1, len(horizon) + 1)
    ]
    block_ok = []
    for b in range(n_blocks):
        hours = range(24 * b, min(24 * (b + 1), len(horizon)))
        block_ok.append(all(len(pools[h]) >= min_days for h in hours))

    lower: list[float] = []
    upper: list[float] = []
    for h0, yhat in enumerate(horizon):
        if block_ok[h0 // 24]:
            q_lo, q_hi = residual_quantiles(pools[h0], target)
            lower.append(max(0.0, yhat + q_lo))
            upper.append(max(0.0, yhat + q_hi))
        else:
            lower.append(max(0.0, yhat * (1.0 - fallback_width)))
            upper.append(yhat * (1.0 + fallback_width))
    return IntervalSet(tuple(lower), tuple(upper), tuple(block_ok))


def coverage_probe(
    intervals: Sequence[IntervalSet], actuals: Sequence[CarbonSeries]
) -> tuple[float, tuple[float | None, ...]]:
    """(overall, per-horizon-day) coverage percentages over known truth.

    ``actuals[i]`` must start at issuance i's first horizon hour; hours
    without truth are skipped. Per-day slots with no scored hours are None.
    """
    if len(intervals) != len(actuals):
        raise LengthMismatch("one actual series per interval set required")
    hit: list[list[float]] = [[] for _ in range(4)]
    lo_all: list[float] = []
    hi_all: list[float] = []
    y_all: list[float] = []
    for iset, actual in zip(intervals, actuals):
        data = actual.to_array()
        n = min(len(iset.lower), len(actual))
        for h0 in range(n):
            y = data[h0]
            if math.isnan(y):
                continue
            y_all.append(float(y))
            lo_all.append(iset.lower[h0])
            hi_all.append(iset.upper[h0])
            hit[min(h0 // 24, 3)].append(
                100.0 if iset.lower[h0] <= y <= iset.upper[h0] else 0.0
            )
    overall = coverage_percent(y_all, lo_all, hi_all)
    by_day = tuple(
        float(np.mean(day)) if day else None for day in hit
    )
    return overall, by_day
