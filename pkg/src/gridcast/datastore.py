"""File-backed persistence: actuals, forecasts, residual ledgers, catalog.

The store is a plain directory tree, one file per addressable unit:

    catalog.json                      grid inventory
    data/{grid}/{year}.csv            actuals, one file per grid-year
    forecasts/{grid}/{date}.csv       one issuance per file
    forecasts/{grid}/{date}.json      issuance metadata (backend identity)
    ledgers/{grid}.json               conformal residual ledger

Actuals CSV: header ``timestamp_utc,carbon_intensity_gco2eq_kwh``, RFC 3339
UTC timestamps, empty value field for missing, LF endings, UTF-8, values at
up to 6 significant digits. Forecast CSV: header
``target_timestamp_utc,yhat,lower,upper,calibrated`` with the last three
empty when no interval was stored. All writes go through a temp file and
an atomic rename, so readers never observe partial content.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable

import requests

from .backends import BackendDescriptor, ForecastRecord
from .conformal import MAX_HORIZON_HOURS, ResidualLedger
from .errors import (
    ConflictingValue,
    NoData,
    NoForecast,
    SchemaViolation,
    UnknownGrid,
)
from .series import CarbonSeries, Resolution, day_start

ACTUALS_HEADER = "timestamp_utc,carbon_intensity_gco2eq_kwh"
FORECAST_HEADER = "target_timestamp_utc,yhat,lower,upper,calibrated"


def format_value(v: float) -> str:
    """Serialize at up to 6 significant digits (the store's precision)."""
    return f"{v:.6g}"


def stored_precision(v: float) -> float:
    return float(format_value(v))


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise SchemaViolation(f"timestamp {text!r} lacks a timezone")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class GridEntry:
    grid_id: str
    display_name: str
    region: str
    resolution: Resolution
    first_day: date | None = None
    last_day: date | None = None


@dataclass
class GridCatalog:
    entries: dict[str, GridEntry] = field(default_factory=dict)

    def __contains__(self, grid_id: str) -> bool:
        return grid_id in self.entries

    def get(self, grid_id: str) -> GridEntry:
        try:
            return self.entries[grid_id]
        except KeyError:
            raise UnknownGrid(f"grid {grid_id!r} not in catalog") from None

    def grid_ids(self) -> list[str]:
        return sorted(self.entries)


@dataclass(frozen=True)
class FetchJobConfig:
    """Where and how often to pull upstream carbon-intensity data."""

    source_url_template: str  # with {grid} and {date} placeholders
    period_hours: int = 24
    retry_count: int = 2
    backoff_s: float = 1.0
    parser: str = "csv"
    auth_token: str | None = None

    def __post_init__(self) -> None:
        if self.period_hours < 1:
            raise ValueError("fetch period must be at least 1 hour")


@dataclass(frozen=True)
class FetchResult:
    grid_id: str
    rows_added: int
    error: str | None = None


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8", newline="\n")
    tmp.replace(path)


class FileStore:
    """Single-writer-per-grid file store rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        # year-file parse cache; single-writer-per-grid keeps it coherent
        self._year_cache: dict[tuple[str, int], dict[datetime, float | None]] = {}

    def _grid_lock(self, grid_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(grid_id, threading.Lock())

    # -- catalog ------------------------------------------------------------

    @property
    def _catalog_path(self) -> Path:
        return self.root / "catalog.json"

    def catalog(self) -> GridCatalog:
        if not self._catalog_path.exists():
            return GridCatalog()
        raw = json.loads(self._catalog_path.read_text(encoding="utf-8"))
        entries = {}
        for grid_id, e in raw.get("grids", {}).items():
            entries[grid_id] = GridEntry(
                grid_id=grid_id,
                display_name=e["display_name"],
                region=e["region"],
                resolution=Resolution(e["resolution"]),
                first_day=date.fromisoformat(e["first_day"]) if e.get("first_day") else None,
                last_day=date.fromisoformat(e["last_day"]) if e.get("last_day") else None,
            )
        return GridCatalog(entries)

    def _save_catalog(self, catalog: GridCatalog) -> None:
        payload = {
            "grids": {
                grid_id: {
                    "display_name": e.display_name,
                    "region": e.region,
                    "resolution": e.resolution.value,
                    "first_day": e.first_day.isoformat() if e.first_day else None,
                    "last_day": e.last_day.isoformat() if e.last_day else None,
                }
                for grid_id, e in sorted(catalog.entries.items())
            }
        }
        _atomic_write(self._catalog_path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def register_grid(
        self,
        grid_id: str,
        display_name: str | None = None,
        region: str = "unknown",
        resolution: Resolution = Resolution.HOURLY,
    ) -> GridEntry:
        catalog = self.catalog()
        if grid_id in catalog:
            return catalog.get(grid_id)
        entry = GridEntry(grid_id, display_name or grid_id, region, resolution)
        catalog.entries[grid_id] = entry
        self._save_catalog(catalog)
        return entry

    # -- actuals ------------------------------------------------------------

    def _actuals_path(self, grid_id: str, year: int) -> Path:
        return self.root / "data" / grid_id / f"{year}.csv"

    def _read_year(self, grid_id: str, year: int) -> dict[datetime, float | None]:
        cached = self._year_cache.get((grid_id, year))
        if cached is not None:
            return dict(cached)
        path = self._actuals_path(grid_id, year)
        if not path.exists():
            return {}
        rows: dict[datetime, float | None] = {}
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ACTUALS_HEADER.split(","):
                raise SchemaViolation(f"{path}: unexpected header {header!r}")
            for row in reader:
                if len(row) != 2:
                    raise SchemaViolation(f"{path}: malformed row {row!r}")
                ts = parse_ts(row[0])
                rows[ts] = float(row[1]) if row[1] != "" else None
        self._year_cache[(grid_id, year)] = dict(rows)
        return rows

    def _write_year(self, grid_id: str, year: int, rows: dict[datetime, float | None]) -> None:
        buf = io.StringIO()
        buf.write(ACTUALS_HEADER + "\n")
        for ts in sorted(rows):
            v = rows[ts]
            buf.write(f"{format_ts(ts)},{'' if v is None else format_value(v)}\n")
        _atomic_write(self._actuals_path(grid_id, year), buf.getvalue())
        # cache what a reader would parse back, not the pre-rounding floats
        self._year_cache[(grid_id, year)] = {
            ts: None if v is None else float(format_value(v)) for ts, v in rows.items()
        }

    def store_actuals(
        self, grid_id: str, series: CarbonSeries, overwrite: bool = False
    ) -> int:
        """Merge a series into the per-year files; returns newly filled steps.

        Idempotent: identical re-ingestion changes nothing. A present value
        that disagrees (at stored precision) with an already-stored one
        raises ConflictingValue unless ``overwrite`` is set.
        """
        if series.grid_id != grid_id:
            raise SchemaViolation("series grid_id does not match store key")
        entry = self.register_grid(grid_id, resolution=series.resolution)
        if entry.resolution is not series.resolution:
            raise SchemaViolation(
                f"grid {grid_id!r} stores {entry.resolution.value} data"
            )
        with self._grid_lock(grid_id):
            added = 0
            by_year: dict[int, dict[datetime, float | None]] = {}
            data = series.to_array()
            for i in range(len(series)):
                ts = series.timestamp(i)
                v = data[i]
                year_rows = by_year.setdefault(ts.year, self._read_year(grid_id, ts.year))
                new = None if math.isnan(v) else float(v)
                old = year_rows.get(ts)
                if new is None:
                    if ts not in year_rows:
                        year_rows[ts] = None
                    continue
                if old is not None:
                    if format_value(old) != format_value(new):
                        if not overwrite:
                            raise ConflictingValue(
                                f"{grid_id} {format_ts(ts)}: stored {old!r} != new {new!r}"
                            )
                        year_rows[ts] = new
                        added += 1
                    continue
                year_rows[ts] = new
                added += 1
            for year, rows in sorted(by_year.items()):
                self._write_year(grid_id, year, rows)
            self._update_catalog_range(grid_id)
            return added

    def _update_catalog_range(self, grid_id: str) -> None:
        catalog = self.catalog()
        entry = catalog.get(grid_id)
        grid_dir = self.root / "data" / grid_id
        first: date | None = None
        last: date | None = None
        for path in sorted(grid_dir.glob("*.csv")):
            for ts, v in self._read_year(grid_id, int(path.stem)).items():
                if v is None:
                    continue
                d = ts.date()
                first = d if first is None or d < first else first
                last = d if last is None or d > last else last
        catalog.entries[grid_id] = replace(entry, first_day=first, last_day=last)
        self._save_catalog(catalog)

    def load_actuals(self, grid_id: str, from_day: date, to_day: date) -> CarbonSeries:
        """Inclusive day range, explicit missingness for absent steps."""
        entry = self.catalog().get(grid_id)
        resolution = entry.resolution
        start = day_start(from_day)
        n = (to_day - from_day).days * resolution.steps_per_day + resolution.steps_per_day
        if n <= 0:
            raise ValueError("to_day must not precede from_day")
        values: list[float | None] = [None] * n
        for year in range(from_day.year, to_day.year + 1):
            for ts, v in self._read_year(grid_id, year).items():
                steps, rem = divmod(ts - start, resolution.step)
                idx = int(steps)
                if rem == timedelta(0) and 0 <= idx < n:
                    values[idx] = v
        return CarbonSeries(grid_id, start, resolution, values)

    # -- forecasts ------------------------------------------------------------

    def _forecast_paths(self, grid_id: str, issue_day: date) -> tuple[Path, Path]:
        base = self.root / "forecasts" / grid_id
        return base / f"{issue_day.isoformat()}.csv", base / f"{issue_day.isoformat()}.json"

    def store_forecast(self, record: ForecastRecord) -> None:
        """One record per (grid, issue day); re-issuing overwrites atomically."""
        csv_path, meta_path = self._forecast_paths(record.grid_id, record.issue_day)
        start = day_start(record.issue_day)
        buf = io.StringIO()
        buf.write(FORECAST_HEADER + "\n")
        for h, yhat in enumerate(record.horizon):
            ts = format_ts(start + timedelta(hours=h))
            if record.interval is not None:
                lo, hi = record.interval[h]
                flag = "true" if record.calibrated[h // 24] else "false"
                buf.write(f"{ts},{format_value(yhat)},{format_value(lo)},{format_value(hi)},{flag}\n")
            else:
                buf.write(f"{ts},{format_value(yhat)},,,\n")
        meta = {
            "backend": record.backend.name,
            "mode": record.backend.mode,
        }
        with self._grid_lock(record.grid_id):
            _atomic_write(csv_path, buf.getvalue())
            _atomic_write(meta_path, json.dumps(meta, sort_keys=True) + "\n")

    def load_forecast(self, grid_id: str, issue_day: date) -> ForecastRecord:
        csv_path, meta_path = self._forecast_paths(grid_id, issue_day)
        if not csv_path.exists():
            raise NoForecast(f"no stored forecast for {grid_id} on {issue_day.isoformat()}")
        horizon: list[float] = []
        interval: list[tuple[float, float]] = []
        flags: list[bool] = []
        has_interval = False
        with csv_path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != FORECAST_HEADER.split(","):
                raise SchemaViolation(f"{csv_path}: unexpected header {header!r}")
            for h, row in enumerate(reader):
                if len(row) != 5:
                    raise SchemaViolation(f"{csv_path}: malformed row {row!r}")
                horizon.append(float(row[1]))
                if row[2] != "":
                    has_interval = True
                    interval.append((float(row[2]), float(row[3])))
                    if h % 24 == 0:
                        flags.append(row[4] == "true")
        backend = BackendDescriptor(name="unknown")
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            backend = BackendDescriptor(name=meta["backend"], mode=meta.get("mode", "ZS"))
        return ForecastRecord(
            grid_id=grid_id,
            issue_day=issue_day,
            horizon=tuple(horizon),
            backend=backend,
            interval=tuple(interval) if has_interval else None,
            calibrated=tuple(flags) if has_interval else None,
        )

    def has_forecast(self, grid_id: str, issue_day: date) -> bool:
        return self._forecast_paths(grid_id, issue_day)[0].exists()

    # -- ledgers -----------------------------------------------------------

    def _ledger_path(self, grid_id: str) -> Path:
        return self.root / "ledgers" / f"{grid_id}.json"

    def load_ledger(self, grid_id: str, window_days: int) -> ResidualLedger:
        ledger = ResidualLedger(grid_id, window_days=window_days)
        path = self._ledger_path(grid_id)
        if not path.exists():
            return ledger
        raw = json.loads(path.read_text(encoding="utf-8"))
        if raw.get("grid_id") != grid_id:
            raise SchemaViolation(f"{path}: grid_id mismatch")
        for hour_key, entries in raw.get("per_hour", {}).items():
            hour = int(hour_key)
            if not 1 <= hour <= MAX_HORIZON_HOURS:
                raise SchemaViolation(f"{path}: hour {hour} out of range")
            for day_text, residual in entries:
                ledger.insert(hour, date.fromisoformat(day_text), float(residual))
        return ledger

    def store_ledger(self, ledger: ResidualLedger) -> None:
        payload = {
            "grid_id": ledger.grid_id,
            "window_days": ledger.window_days,
            "per_hour": {
                str(h + 1): [[d.isoformat(), r] for d, r in queue]
                for h, queue in enumerate(ledger.per_hour)
                if queue
            },
        }
        with self._grid_lock(ledger.grid_id):
            _atomic_write(
                self._ledger_path(ledger.grid_id),
                json.dumps(payload, sort_keys=True) + "\n",
            )

    # -- service state -------------------------------------------------------

    @property
    def _state_path(self) -> Path:
        return self.root / "state.json"

    def load_state(self) -> dict:
        if not self._state_path.exists():
            return {}
        return json.loads(self._state_path.read_text(encoding="utf-8"))

    def save_state(self, state: dict) -> None:
        _atomic_write(self._state_path, json.dumps(state, sort_keys=True) + "\n")


# -- fetcher ----------------------------------------------------------------

Parser = Callable[[str, str, Resolution], CarbonSeries]


def parse_actuals_csv(text: str, grid_id: str, resolution: Resolution) -> CarbonSeries:
    """Default payload parser: the actuals CSV schema."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ACTUALS_HEADER.split(","):
        raise SchemaViolation(f"payload header {header!r} != {ACTUALS_HEADER!r}")
    rows: dict[datetime, float | None] = {}
    for row in reader:
        if len(row) != 2:
            raise SchemaViolation(f"malformed payload row {row!r}")
        rows[parse_ts(row[0])] = float(row[1]) if row[1] != "" else None
    if not rows:
        raise SchemaViolation("payload has no rows")
    first = min(rows)
    last = max(rows)
    steps, rem = divmod(last - first, resolution.step)
    if rem != timedelta(0):
        raise SchemaViolation("payload timestamps are not on the resolution grid")
    values: list[float | None] = [None] * (int(steps) + 1)
    for ts, v in rows.items():
        s, r = divmod(ts - first, resolution.step)
        if r != timedelta(0):
            raise SchemaViolation(f"timestamp {format_ts(ts)} off the resolution grid")
        values[int(s)] = v
    return CarbonSeries(grid_id, first, resolution, values)


_PARSERS: dict[str, Parser] = {"csv": parse_actuals_csv}


def register_parser(name: str, parser: Parser) -> None:
    _PARSERS[name] = parser


def run_fetch_cycle(
    config: FetchJobConfig,
    store: FileStore,
    for_day: date | None = None,
    grids: Iterable[str] | None = None,
    fetch_fn: Callable[[str], str] | None = None,
) -> list[FetchResult]:
    """One fetch pass over the catalog; per-grid failures never abort the cycle."""
    if for_day is None:
        for_day = datetime.now(timezone.utc).date() - timedelta(days=1)
    parser = _PARSERS.get(config.parser)
    if parser is None:
        raise SchemaViolation(f"no parser registered under {config.parser!r}")
    catalog = store.catalog()
    grid_ids = list(grids) if grids is not None else catalog.grid_ids()
    results: list[FetchResult] = []
    for grid_id in grid_ids:
        try:
            entry = catalog.get(grid_id)
            url = config.source_url_template.format(grid=grid_id, date=for_day.isoformat())
            payload = (fetch_fn or _http_fetch_fn(config))(url)
            series = parser(payload, grid_id, entry.resolution)
            added = store.store_actuals(grid_id, series)
            results.append(FetchResult(grid_id, added))
        except Exception as exc:  # isolation contract: report, keep going
            results.append(FetchResult(grid_id, 0, error=f"{type(exc).__name__}: {exc}"))
    return results


def _http_fetch_fn(config: FetchJobConfig) -> Callable[[str], str]:
    headers = {}
    if config.auth_token:
        headers["Authorization"] = f"Bearer {config.auth_token}"

    def fetch(url: str) -> str:
        last_exc: Exception | None = None
        for attempt in range(config.retry_count + 1):
            try:
                resp = requests.get(url, headers=headers, timeout=30)
                resp.raise_for_status()
                return resp.text
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < config.retry_count:
                    time.sleep(config.backoff_s * (2**attempt))
        raise NoData(f"fetch failed after {config.retry_count + 1} attempts: {last_exc}")

    return fetch
