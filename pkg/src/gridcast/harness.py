"""Rolling-origin evaluation protocols.

``run_forecast_protocol`` replays daily issuance over a test range: for
each test day the lookback ends the previous day at 23:00 UTC, gaps are
imputed, the backend forecasts ``horizon_days * 24`` hours from midnight,
the conformal layer calibrates (first 96 hours at most), and outcomes are
recorded into the ledger only once their ground truth day has passed,
the same no-future-reads discipline as live serving. Interval metrics skip
a warm-up prefix of ``max(window_days, min_days) + 3`` issuances so
cold-start fallback intervals do not distort coverage and width numbers.

``run_imputation_protocol`` sweeps seeded patch masks over a fully
observed range and scores each imputer's normalized RMSE.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from . import imputation
from .backends import BackendRegistry, ForecastRequest, forecast as dispatch_forecast
from .conformal import (
    MAX_HORIZON_HOURS,
    CoverageTarget,
    IntervalSet,
    ResidualLedger,
    calibrate,
    coverage_probe,
    record_outcome,
)
from .datastore import FileStore
from .errors import InsufficientHistory
from .metrics import EvalReport, mape, niw, percentile_rank
from .pipeline import fill_gaps
from .series import CarbonSeries, Window, day_start, missing_mask, slice_series

PROTOCOLS = ("forecast_4d", "forecast_extended", "uncertainty", "imputation")


@dataclass(frozen=True)
class ProtocolSpec:
    """One batch evaluation run, fully determined (seed included)."""

    protocol: str
    grids: tuple[str, ...]
    test_start: date
    test_days: int
    backend: str = "seasonal-naive"
    lookback_days: tuple[int, ...] = (30,)
    horizon_days: int = 4
    alpha: float = 0.95
    window_days: int = 75
    min_days: int = 10
    fallback_width: float = 0.5
    imputer: str = "linear"
    mask_fractions: tuple[float, ...] = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75)
    patch_length: int | None = None
    methods: tuple[str, ...] = ("naive", "linear", "cubic-spline")
    seed: int = 0

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if not 1 <= self.horizon_days <= 21:
            raise ValueError("horizon_days must be in 1..21")
        if self.test_days < 1:
            raise ValueError("test_days must be positive")

    @property
    def warmup_days(self) -> int:
        return max(self.window_days, self.min_days) + 3

    @classmethod
    def from_json(cls, path: str | Path) -> "ProtocolSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        raw["test_start"] = date.fromisoformat(raw["test_start"])
        for key in ("grids", "lookback_days", "mask_fractions", "methods"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def config_snapshot(self, **extra) -> dict:
        snap = {
            "backend": self.backend,
            "horizon_days": self.horizon_days,
            "alpha": self.alpha,
            "window_days": self.window_days,
            "min_days": self.min_days,
            "imputer": self.imputer,
            "seed": self.seed,
            "test_start": self.test_start.isoformat(),
            "test_days": self.test_days,
        }
        snap.update(extra)
        return snap


@dataclass
class ForecastRunResult:
    """Per (grid, lookback) outcome: the report plus per-horizon-day MAPEs."""

    grid_id: str
    lookback_days: int
    report: EvalReport
    per_day_mape: tuple[float, ...] = ()


def _series_day_index(series: CarbonSeries, day: date) -> int:
    return int((day_start(day) - series.start) / series.resolution.step)


def _run_one_grid(
    spec: ProtocolSpec,
    grid_id: str,
    lookback_days: int,
    history: CarbonSeries,
    registry: BackendRegistry,
) -> ForecastRunResult:
    horizon_hours = spec.horizon_days * 24
    calib_hours = min(horizon_hours, MAX_HORIZON_HOURS)
    target = CoverageTarget(spec.alpha)
    ledger = ResidualLedger(grid_id, window_days=spec.window_days)

    first_needed = spec.test_start - timedelta(days=lookback_days)
    if _series_day_index(history, first_needed) < 0:
        raise InsufficientHistory(
            f"{grid_id}: history starts after {first_needed.isoformat()}"
        )
    last_test_day = spec.test_start + timedelta(days=spec.test_days - 1)
    if _series_day_index(history, last_test_day) > len(history):
        raise InsufficientHistory(
            f"{grid_id}: history ends before the last test day "
            f"{last_test_day.isoformat()}"
        )
    data = history.to_array()

    pending: list[list] = []  # [record, recorded_hours]
    issuance_windows: list[tuple[list[float], list[float]]] = []
    per_day_acc: list[list[float]] = [[] for _ in range(spec.horizon_days)]
    scored_intervals: list[IntervalSet] = []
    scored_actuals: list[CarbonSeries] = []
    niw_y: list[float] = []
    niw_lo: list[float] = []
    niw_hi: list[float] = []
    excluded = 0

    for i in range(spec.test_days):
        d = spec.test_start + timedelta(days=i)
        d0 = _series_day_index(history, d)

        # 1. fold newly completed truth into the ledger (never day d or later)
        still_pending = []
        for item in pending:
            rec, recorded = item
            known_hours = min(
                (d - rec.issue_day).days * 24, len(rec.horizon), MAX_HORIZON_HOURS
            )
            if known_hours > recorded:
                j0 = _series_day_index(history, rec.issue_day)
                truth = slice_series(history, Window(j0 + recorded, known_hours - recorded))
                assert truth.timestamp(len(truth) - 1) < day_start(d)
                record_outcome(ledger, rec, truth)
                item[1] = known_hours
            if item[1] < min(len(rec.horizon), MAX_HORIZON_HOURS):
                still_pending.append(item)
        pending = still_pending

        # 2. lookback ending yesterday 23:00, imputed if needed
        lb = slice_series(history, Window(d0 - lookback_days * 24, lookback_days * 24))
        if not lb.is_complete:
            lb = fill_gaps(missing_mask(lb), spec.imputer, registry)

        # 3. forecast + calibrate
        record = dispatch_forecast(
            registry, spec.backend, ForecastRequest(grid_id, lb, horizon_hours), d
        )
        intervals = calibrate(
            ledger,
            dataclasses.replace(
                record, horizon=record.horizon[:calib_hours], interval=None, calibrated=None
            ),
            target,
            min_days=spec.min_days,
            fallback_width=spec.fallback_width,
        )
        pending.append([record, 0])

        # 4. score against truth (known in backtest, unseen by the ledger)
        avail = min(horizon_hours, len(history) - d0)
        truth_win = data[d0 : d0 + avail]
        fc_win = np.asarray(record.horizon[:avail])
        known = ~np.isnan(truth_win)
        if not np.any(known & (truth_win >= 1.0)):
            continue
        issuance_windows.append(
            (truth_win[known].tolist(), fc_win[known].tolist())
        )
        excluded += int(np.sum(truth_win[known] < 1.0))
        for k in range(spec.horizon_days):
            lo, hi = 24 * k, min(24 * (k + 1), avail)
            if hi <= lo:
                continue
            seg_t, seg_f = truth_win[lo:hi], fc_win[lo:hi]
            seg_known = ~np.isnan(seg_t) & (seg_t >= 1.0)
            if np.any(seg_known):
                per_day_acc[k].append(
                    float(100.0 * np.mean(np.abs(seg_t[seg_known] - seg_f[seg_known]) / seg_t[seg_known]))
                )
        if i >= spec.warmup_days:
            n = min(calib_hours, avail)
            scored_intervals.append(
                IntervalSet(intervals.lower[:n], intervals.upper[:n],
                            intervals.calibrated[: (n + 23) // 24])
            )
            scored_actuals.append(slice_series(history, Window(d0, n)))
            seg_t = truth_win[:n]
            seg_known = ~np.isnan(seg_t)
            niw_y.extend(seg_t[seg_known].tolist())
            niw_lo.extend(np.asarray(intervals.lower[:n])[seg_known].tolist())
            niw_hi.extend(np.asarray(intervals.upper[:n])[seg_known].tolist())

    if not issuance_windows:
        raise InsufficientHistory(f"{grid_id}: no scorable issuances")

    per_window = [mape(a, f) for a, f in issuance_windows]
    mean_mape = float(np.mean(per_window))
    p90 = percentile_rank(per_window, 0.9)
    cov_overall = None
    cov_by_day = None
    mean_niw = None
    if scored_intervals:
        cov_overall, by_day = coverage_probe(scored_intervals, scored_actuals)
        cov_by_day = tuple(v for v in by_day if v is not None)
        if any(y >= 1.0 for y in niw_y):
            mean_niw = niw(niw_y, niw_lo, niw_hi)

    report = EvalReport(
        grid_id=grid_id,
        protocol=spec.protocol,
        n_issuances=len(issuance_windows),
        mean_mape=mean_mape,
        p90_mape=p90,
        coverage_overall=cov_overall,
        coverage_by_day=cov_by_day,
        mean_niw=mean_niw,
        excluded_hours=excluded,
        config=spec.config_snapshot(lookback_days=lookback_days, grid=grid_id),
    )
    per_day = tuple(
        float(np.mean(day)) if day else float("nan") for day in per_day_acc
    )
    return ForecastRunResult(grid_id, lookback_days, report, per_day)


def load_history(
    store: FileStore, spec: ProtocolSpec, grid_id: str, lookback_days: int
) -> CarbonSeries:
    first = spec.test_start - timedelta(days=lookback_days)
    last = spec.test_start + timedelta(days=spec.test_days + spec.horizon_days - 1)
    return store.load_actuals(grid_id, first, last)


def run_forecast_protocol(
    spec: ProtocolSpec,
    registry: BackendRegistry,
    store: FileStore | None = None,
    histories: dict[str, CarbonSeries] | None = None,
) -> list[ForecastRunResult]:
    """Rolling-origin run per grid and lookback; failures reported, not fatal.

    Histories can be supplied directly (synthetic runs) or loaded from a
    store. Results are a deterministic function of the arguments.
    """
    results: list[ForecastRunResult] = []
    max_lb = max(spec.lookback_days)
    for grid_id in spec.grids:
        if histories is not None and grid_id in histories:
            history = histories[grid_id]
        elif store is not None:
            history = load_history(store, spec, grid_id, max_lb)
        else:
            raise ValueError("either histories or a store is required")
        for lb in spec.lookback_days:
            try:
                results.append(_run_one_grid(spec, grid_id, lb, history, registry))
            except InsufficientHistory as exc:
                report = EvalReport(
                    grid_id=grid_id,
                    protocol=spec.protocol,
                    config=spec.config_snapshot(
                        lookback_days=lb, grid=grid_id, error=str(exc)
                    ),
                )
                results.append(ForecastRunResult(grid_id, lb, report))
    return results


def run_imputation_protocol(
    spec: ProtocolSpec,
    store: FileStore | None = None,
    truths: dict[str, CarbonSeries] | None = None,
) -> list[EvalReport]:
    """Seeded mask sweep: one report per (grid, fraction, method)."""
    reports: list[EvalReport] = []
    for gi, grid_id in enumerate(spec.grids):
        if truths is not None and grid_id in truths:
            truth = truths[grid_id]
        elif store is not None:
            truth = store.load_actuals(
                grid_id,
                spec.test_start,
                spec.test_start + timedelta(days=spec.test_days - 1),
            )
        else:
            raise ValueError("either truths or a store is required")
        if not truth.is_complete:
            raise InsufficientHistory(
                f"{grid_id}: imputation protocol needs fully observed truth"
            )
        patch = spec.patch_length or imputation.DEFAULT_PATCH_STEPS[truth.resolution]
        for fi, fraction in enumerate(spec.mask_fractions):
            seed = int(np.random.SeedSequence([spec.seed, gi, fi]).generate_state(1)[0])
            plan = imputation.MaskPlan(fraction, patch, seed)
            masked = imputation.mask_for_evaluation(truth, plan)
            for method in spec.methods:
                nrmse = imputation.evaluate_imputation(truth, masked, method)
                reports.append(
                    EvalReport(
                        grid_id=grid_id,
                        protocol="imputation",
                        n_issuances=1,
                        nrmse=nrmse,
                        config=spec.config_snapshot(
                            grid=grid_id,
                            fraction=fraction,
                            method=method,
                            patch_length=patch,
                            mask_seed=seed,
                            achieved_fraction=imputation.achieved_fraction(
                                tuple(masked.mask)
                            ),
                        ),
                    )
                )
    return reports


def degradation_table(results: Sequence[ForecastRunResult]) -> dict:
    """Per-grid {lookback: {D1..Dk MAPEs, drops vs D1}} from extended runs."""
    table: dict[str, dict[int, dict]] = {}
    for r in results:
        if not r.per_day_mape:
            continue
        d1 = r.per_day_mape[0]
        drops = tuple(dk - d1 for dk in r.per_day_mape)
        table.setdefault(r.grid_id, {})[r.lookback_days] = {
            "mape_by_day": r.per_day_mape,
            "drop_by_day": drops,
        }
    return table


def format_degradation_table(table: dict) -> str:
    """Appendix-style layout: rows = lookback, columns = D1..Dk."""
    lines = []
    for grid_id in sorted(table):
        rows = table[grid_id]
        n_days = max(len(v["mape_by_day"]) for v in rows.values())
        header = ["lookback"] + [f"D{k}" for k in range(1, n_days + 1)]
        lines.append(f"== {grid_id} ==")
        lines.append("  ".join(h.rjust(8) for h in header))
        for lb in sorted(rows):
            cells = [f"{lb}*24".rjust(8)]
            cells += [
                f"{v:8.2f}" if not np.isnan(v) else "       -"
                for v in rows[lb]["mape_by_day"]
            ]
            lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def emit_report(
    reports: Sequence[EvalReport],
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "csv", "table"),
) -> list[Path]:
    """Write reports under ``out_dir`` in the requested formats."""
    from .metrics import report_table

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "reports.json"
        payload = [r.to_dict() for r in reports]
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        path = out / "reports.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["grid_id", "protocol", "n_issuances", "mean_mape", "p90_mape",
             "coverage_overall", "mean_niw", "nrmse"]
        )
        for r in reports:
            writer.writerow([
                r.grid_id, r.protocol, r.n_issuances,
                _cell(r.mean_mape), _cell(r.p90_mape),
                _cell(r.coverage_overall), _cell(r.mean_niw), _cell(r.nrmse),
            ])
        path.write_text(buf.getvalue(), encoding="utf-8")
        written.append(path)
    if "table" in formats:
        path = out / "reports.txt"
        path.write_text(report_table(list(reports)), encoding="utf-8")
        written.append(path)
    return written


def _cell(v: float | None) -> str:
    return "" if v is None else repr(float(v))
