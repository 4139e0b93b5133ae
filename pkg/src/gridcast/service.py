"""HTTP frontend: carbon-intensity data, forecasts, accuracy, imputation.

Endpoints (all JSON; dates are ``YYYY-MM-DD``, timestamps RFC 3339 UTC,
errors are ``{"code": ..., "message": ...}``):

    GET  /v1/grids                                   supported grids
    GET  /v1/ci/{grid}/{date}                        one day of actuals
    GET  /v1/forecasts/{grid}/{date}?horizon=&pi=    stored (or on-demand) forecast
    GET  /v1/accuracy/{grid}/{date}?horizon=         realized MAPE
    POST /v1/impute                                  fill a masked series
    GET  /v1/model   POST /v1/model                  default backend selection

``date`` on the forecast endpoints is the issue day (forecasts start at its
midnight UTC). On-demand forecasting is disabled by default in the service;
precomputed records come from the daily issuance job.
"""

from __future__ import annotations

from datetime import date, timedelta

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import backends as backends_mod
from . import pipeline
from .backends import BackendRegistry, default_registry
from .config import ApiConfig
from .datastore import FileStore, format_ts
from .errors import (
    AllBelowEpsilon,
    AllMissing,
    BackendUnavailable,
    GridcastError,
    HorizonTooLong,
    InfeasibleTarget,
    InsufficientHistory,
    InvalidEndpoint,
    InvalidMode,
    LengthMismatch,
    NoData,
    NoForecast,
    SchemaViolation,
    TruthUnavailable,
    UnknownGrid,
    UnknownModel,
)
from .metrics import mape
from .series import Resolution, day_start

STATUS_BY_ERROR: dict[type[GridcastError], int] = {
    UnknownGrid: 404,
    NoData: 404,
    NoForecast: 404,
    UnknownModel: 404,
    HorizonTooLong: 400,
    LengthMismatch: 400,
    AllMissing: 400,
    SchemaViolation: 400,
    InvalidMode: 400,
    InvalidEndpoint: 400,
    InfeasibleTarget: 400,
    TruthUnavailable: 409,
    AllBelowEpsilon: 409,
    InsufficientHistory: 409,
    BackendUnavailable: 503,
}


def _status_for(exc: GridcastError) -> int:
    for cls, status in STATUS_BY_ERROR.items():
        if isinstance(exc, cls):
            return status
    return 500


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise SchemaViolation(f"bad date {text!r}; expected YYYY-MM-DD") from None


def create_app(
    config: ApiConfig,
    store: FileStore | None = None,
    registry: BackendRegistry | None = None,
) -> FastAPI:
    store = store if store is not None else FileStore(config.store_root)
    if registry is None:
        registry = default_registry(
            ewma_alpha=config.ewma_alpha,
            remote_endpoints=config.remote_endpoints,
            timeout_s=config.timeout_s,
        )
    state = store.load_state()
    default_name = state.get("default_backend", config.default_backend)
    try:
        registry.set_default(default_name)
    except UnknownModel:
        pass  # config may name a remote that is not registered in this process

    app = FastAPI(title="gridcast", version="0.1.0")

    @app.exception_handler(GridcastError)
    async def _gridcast_error(_req: Request, exc: GridcastError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": str(exc)},
        )

    @app.get("/v1/grids")
    def get_supported_grids():
        catalog = store.catalog()
        return {
            "grids": [
                {
                    "grid_id": e.grid_id,
                    "display_name": e.display_name,
                    "region": e.region,
                    "resolution": e.resolution.value,
                    "first_day": e.first_day.isoformat() if e.first_day else None,
                    "last_day": e.last_day.isoformat() if e.last_day else None,
                }
                for _, e in sorted(catalog.entries.items())
            ]
        }

    @app.get("/v1/ci/{grid_id}/{day}")
    def get_ci_historical(grid_id: str, day: str):
        d = _parse_date(day)
        series = store.load_actuals(grid_id, d, d)
        if series.present_count() == 0:
            raise NoData(f"no stored data for {grid_id} on {d.isoformat()}")
        return {
            "grid_id": grid_id,
            "date": d.isoformat(),
            "resolution": series.resolution.value,
            "values": [
                {"timestamp": format_ts(series.timestamp(i)), "value": series.values[i]}
                for i in range(len(series))
            ],
        }

    @app.get("/v1/forecasts/{grid_id}/{day}")
    def get_ci_forecasts(grid_id: str, day: str, horizon: int = 96, pi: bool = False):
        d = _parse_date(day)
        if not 1 <= horizon <= config.max_horizon:
            raise HorizonTooLong(f"horizon must be in 1..{config.max_horizon}")
        store.catalog().get(grid_id)
        try:
            record = store.load_forecast(grid_id, d)
        except NoForecast:
            if not config.on_demand:
                raise
            record = pipeline.issue_for_grid(store, registry, config, grid_id, d)
        n = min(horizon, len(record.horizon))
        body = {
            "grid_id": grid_id,
            "issue_day": d.isoformat(),
            "backend": record.backend.name,
            "mode": record.backend.mode,
            "horizon_hours": n,
            "timestamps": [
                format_ts(day_start(d) + i * Resolution.HOURLY.step) for i in range(n)
            ],
            "values": list(record.horizon[:n]),
        }
        if pi:
            if record.interval is None:
                raise NoForecast(
                    f"stored forecast for {grid_id} on {d.isoformat()} has no intervals"
                )
            body["interval"] = {
                "lower": [lo for lo, _ in record.interval[:n]],
                "upper": [hi for _, hi in record.interval[:n]],
                "calibrated": list(record.calibrated[: (n + 23) // 24]),
            }
        return body

    @app.get("/v1/accuracy/{grid_id}/{day}")
    def get_forecast_accuracy(grid_id: str, day: str, horizon: int = 96):
        d = _parse_date(day)
        if not 1 <= horizon <= config.max_horizon:
            raise HorizonTooLong(f"horizon must be in 1..{config.max_horizon}")
        store.catalog().get(grid_id)
        record = store.load_forecast(grid_id, d)
        n = min(horizon, len(record.horizon))
        horizon_days = (n + 23) // 24
        actual = store.load_actuals(grid_id, d, d + timedelta(days=horizon_days - 1))
        truth = actual.to_array()[:n]
        fc = list(record.horizon[:n])
        pairs = [(y, f) for y, f in zip(truth.tolist(), fc) if y == y]  # drop NaN
        if not pairs:
            raise TruthUnavailable(
                f"no ground truth inside the first {n} hours for {grid_id} {d.isoformat()}"
            )
        value = mape([y for y, _ in pairs], [f for _, f in pairs])
        return {
            "grid_id": grid_id,
            "issue_day": d.isoformat(),
            "horizon_hours": n,
            "mape_percent": value,
            "hours_scored": len(pairs),
        }

    @app.post("/v1/impute")
    def get_missing_ci_data(payload: dict):
        if "mask" not in payload:
            raise SchemaViolation("payload needs a 'mask' list")
        masked = pipeline.masked_from_payload(payload, max_length=config.max_impute_length)
        method = payload.get("method", config.imputer)
        filled = pipeline.fill_gaps(masked, method, registry)
        return {
            "grid_id": masked.series.grid_id,
            "resolution": masked.series.resolution.value,
            "method": method,
            "values": [float(v) for v in filled.to_array().tolist()],
        }

    @app.get("/v1/model")
    def get_model():
        name = registry.default_name
        mode = registry.get(name)[0].mode if name else None
        return {"default_backend": name, "mode": mode}

    @app.post("/v1/model")
    def set_model(payload: dict):
        name = payload.get("model_name")
        mode = payload.get("mode")
        if not isinstance(name, str):
            raise SchemaViolation("model_name required")
        if mode is not None and mode not in backends_mod.MODES:
            raise InvalidMode(f"mode must be one of {backends_mod.MODES}")
        descriptor = registry.set_default(name, mode)
        state = store.load_state()
        state["default_backend"] = descriptor.name
        state["mode"] = descriptor.mode
        store.save_state(state)
        return {"default_backend": descriptor.name, "mode": descriptor.mode}

    return app
