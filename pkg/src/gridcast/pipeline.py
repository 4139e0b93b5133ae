"""Daily issuance orchestration: impute, forecast, calibrate, store, score.

The order mirrors the serving pipeline: gaps in the lookback are filled
before any forecasting, the point forecast is wrapped by the conformal
layer, and the residual ledger is brought up to date with whatever ground
truth became available before the issuance midnight: never anything later,
so calibration cannot see the future. Per-grid failures are isolated.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

from . import backends as backends_mod
from . import imputation
from .backends import BackendRegistry, ForecastRecord, ForecastRequest
from .config import ApiConfig
from .conformal import (
    MAX_HORIZON_HOURS,
    CoverageTarget,
    ResidualLedger,
    calibrate,
    record_outcome,
)
from .datastore import FileStore
from .errors import (
    AllMissing,
    GridcastError,
    InsufficientHistory,
    LengthMismatch,
    NoForecast,
    SchemaViolation,
    UnknownModel,
)
from .series import CarbonSeries, MaskedSeries, Resolution, missing_mask

log = logging.getLogger(__name__)

MIN_PRESENT_LOOKBACK_HOURS = 24


@dataclass(frozen=True)
class IssuanceResult:
    grid_id: str
    issue_day: date
    stored: bool
    error: str | None = None


def fill_gaps(
    masked: MaskedSeries, method: str, registry: BackendRegistry | None = None
) -> CarbonSeries:
    """Impute by native method name or by a registered remote backend."""
    if method in imputation.native_imputer_names():
        return imputation.impute_with(method, masked)
    if registry is None:
        raise UnknownModel(f"no imputer named {method!r}")
    return backends_mod.impute(registry, method, masked)


def masked_from_payload(payload: dict, max_length: int | None = None) -> MaskedSeries:
    """Masked series from an API/CLI payload; schema errors, not tracebacks.

    Payload keys: ``values`` (null where masked), ``mask`` (1 = observed;
    defaults to the nulls of ``values``), ``resolution``, optional
    ``grid_id`` and RFC 3339 ``start``.
    """
    values = payload.get("values")
    if not isinstance(values, list) or not values:
        raise SchemaViolation("payload needs a non-empty 'values' list")
    mask = payload.get("mask")
    if mask is None:
        mask = [0 if v is None else 1 for v in values]
    if not isinstance(mask, list) or len(mask) != len(values):
        raise LengthMismatch("values and mask lengths differ")
    if any(m not in (0, 1) for m in mask):
        raise SchemaViolation("mask entries must be 0 or 1")
    if max_length is not None and len(values) > max_length:
        raise SchemaViolation(f"series longer than the {max_length}-step limit")
    if not any(m == 1 for m in mask):
        raise AllMissing("mask hides every value")
    try:
        resolution = Resolution(payload.get("resolution", "hourly"))
    except ValueError:
        raise SchemaViolation("resolution must be hourly|five_minute") from None
    start_text = payload.get("start")
    if start_text:
        try:
            start = datetime.fromisoformat(str(start_text).replace("Z", "+00:00"))
        except ValueError:
            raise SchemaViolation(f"bad start timestamp {start_text!r}") from None
    else:
        start = datetime(1970, 1, 1, tzinfo=timezone.utc)
    hidden = []
    for v, m in zip(values, mask):
        if m == 0:
            hidden.append(None)
            continue
        if v is None:
            raise SchemaViolation("observed position carries null value")
        hidden.append(float(v))
    try:
        series = CarbonSeries(payload.get("grid_id", "adhoc"), start, resolution, hidden)
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from None
    return MaskedSeries(series=series, mask=tuple(int(m) for m in mask))


def load_lookback(
    store: FileStore, grid_id: str, issue_day: date, lookback_days: int
) -> CarbonSeries:
    first = issue_day - timedelta(days=lookback_days)
    last = issue_day - timedelta(days=1)
    return store.load_actuals(grid_id, first, last)


def update_ledger(
    store: FileStore,
    ledger: ResidualLedger,
    grid_id: str,
    issue_day: date,
    scan_days: int | None = None,
) -> ResidualLedger:
    """Record residuals for past issuances using truth known before issue_day.

    Only ground truth strictly before ``issue_day`` 00:00 UTC is read, so
    re-running any day reproduces the same ledger (upsert semantics).
    """
    if scan_days is None:
        scan_days = ledger.window_days + 8
    horizon_days = MAX_HORIZON_HOURS // 24
    for back in range(1, scan_days + 1):
        d = issue_day - timedelta(days=back)
        try:
            record = store.load_forecast(grid_id, d)
        except NoForecast:
            continue
        truth_first = d
        truth_last = min(d + timedelta(days=horizon_days - 1), issue_day - timedelta(days=1))
        if truth_last < truth_first:
            continue
        actual = store.load_actuals(grid_id, truth_first, truth_last)
        record_outcome(ledger, record, actual)
    return ledger


def issue_for_grid(
    store: FileStore,
    registry: BackendRegistry,
    config: ApiConfig,
    grid_id: str,
    issue_day: date,
    backend_name: str | None = None,
    horizon_hours: int = MAX_HORIZON_HOURS,
) -> ForecastRecord:
    """One grid's daily issuance; returns the stored record."""
    entry = store.catalog().get(grid_id)
    if entry.resolution is not Resolution.HOURLY:
        raise InsufficientHistory(f"grid {grid_id!r} is not an hourly grid")
    lookback = load_lookback(store, grid_id, issue_day, config.lookback_days)
    if lookback.present_count() < MIN_PRESENT_LOOKBACK_HOURS:
        raise InsufficientHistory(
            f"{grid_id}: {lookback.present_count()} observed hours in lookback, "
            f"need {MIN_PRESENT_LOOKBACK_HOURS}"
        )

    ledger = store.load_ledger(grid_id, config.window_days)
    update_ledger(store, ledger, grid_id, issue_day)
    store.store_ledger(ledger)

    masked = missing_mask(lookback)
    if lookback.present_count() < len(lookback):
        lookback = fill_gaps(masked, config.imputer, registry)

    name = backend_name or registry.default_name or config.default_backend
    record = backends_mod.forecast(
        registry, name, ForecastRequest(grid_id, lookback, horizon_hours), issue_day
    )
    intervals = calibrate(
        ledger.known_before(issue_day),
        record,
        CoverageTarget(config.alpha),
        min_days=config.min_days,
        fallback_width=config.fallback_width,
    )
    record = dataclasses.replace(
        record,
        interval=tuple(zip(intervals.lower, intervals.upper)),
        calibrated=intervals.calibrated,
    )
    store.store_forecast(record)
    return record


def issue_daily_forecasts(
    store: FileStore,
    registry: BackendRegistry,
    config: ApiConfig,
    issue_day: date,
    grids: list[str] | None = None,
) -> list[IssuanceResult]:
    """Issue for every catalog grid (or a subset); failures are per-grid."""
    catalog = store.catalog()
    grid_ids = grids if grids is not None else catalog.grid_ids()
    results = []
    for grid_id in grid_ids:
        try:
            issue_for_grid(store, registry, config, grid_id, issue_day)
            results.append(IssuanceResult(grid_id, issue_day, stored=True))
        except GridcastError as exc:
            log.warning("issuance skipped for %s on %s: %s", grid_id, issue_day, exc)
            results.append(
                IssuanceResult(grid_id, issue_day, stored=False,
                               error=f"{type(exc).__name__}: {exc}")
            )
    return results
