"""Forecaster/imputer backends: native statistical baselines plus a remote
HTTP client, dispatched uniformly through a runtime registry.

Native baselines:

* ``seasonal-naive``: repeat the most recent observed day.
* ``ewma``: per hour-of-day exponential smoothing
  ``s(d,h) = alpha * y(d,h) + (1-alpha) * s(d-1,h)``, state initialized to
  the first observed day; every future day repeats ``s(., h)``.

Remote backends speak the JSON protocol in :mod:`gridcast.wire` and are
registered under ``remote:<endpoint-id>`` names. Dispatch clamps backend
outputs at 0 from below (with a warning) so physical non-negativity holds
downstream; the raw HTTP client itself never transforms values.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from datetime import date
from typing import Protocol

import numpy as np
import requests

from .errors import (
    AllMissing,
    BackendUnavailable,
    DuplicateName,
    HorizonTooLong,
    InvalidEndpoint,
    InvalidMode,
    LookbackTooShort,
    UnknownModel,
)
from .series import CarbonSeries, MaskedSeries
from . import wire

log = logging.getLogger(__name__)

MODES = ("ZS", "FT")
DEFAULT_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity and capabilities of one backend."""

    name: str
    mode: str = "ZS"
    capabilities: frozenset[str] = frozenset({"forecast"})
    max_horizon: int | None = None  # hours; None = unbounded

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.capabilities <= {"forecast", "impute"}:
            raise ValueError("capabilities limited to forecast/impute")
        if self.mode == "FT" and not self.name.startswith("remote:"):
            raise ValueError("FT mode is only valid for remote backends")

    @property
    def is_remote(self) -> bool:
        return self.name.startswith("remote:")


@dataclass(frozen=True)
class ForecastRequest:
    grid_id: str
    lookback: CarbonSeries
    horizon_hours: int

    def __post_init__(self) -> None:
        if self.horizon_hours <= 0:
            raise ValueError("horizon_hours must be positive")
        if not self.lookback.is_complete:
            raise ValueError("lookback must be gap-free; impute before forecasting")


@dataclass(frozen=True)
class ForecastRecord:
    """One issuance: point forecast plus optional conformal interval."""

    grid_id: str
    issue_day: date
    horizon: tuple[float, ...]
    backend: BackendDescriptor
    interval: tuple[tuple[float, float], ...] | None = None
    calibrated: tuple[bool, ...] | None = None  # one flag per horizon-day block

    def __post_init__(self) -> None:
        for v in self.horizon:
            if not math.isfinite(v) or v < 0:
                raise ValueError("forecast values must be finite and >= 0")
        if self.interval is not None:
            if len(self.interval) != len(self.horizon):
                raise ValueError("interval length must match horizon length")
            for lo, hi in self.interval:
                if not (0.0 <= lo <= hi):
                    raise ValueError("intervals need 0 <= lower <= upper")
            n_blocks = (len(self.horizon) + 23) // 24
            if self.calibrated is None or len(self.calibrated) != n_blocks:
                raise ValueError("calibrated flags must cover every horizon-day block")


class ForecastBackend(Protocol):
    def forecast_values(self, req: ForecastRequest) -> np.ndarray: ...


def _hour_of_day_columns(series: CarbonSeries) -> dict[int, list[float]]:
    """Values grouped by UTC hour-of-day, oldest first."""
    start_hour = series.start.hour
    columns: dict[int, list[float]] = {}
    for i, v in enumerate(series.to_array().tolist()):
        columns.setdefault((start_hour + i) % 24, []).append(v)
    return columns


class SeasonalNaiveBackend:
    """Repeat the most recent 24 observed hours for every future day."""

    min_lookback_hours = 24

    def forecast_values(self, req: ForecastRequest) -> np.ndarray:
        series = req.lookback
        if len(series) < self.min_lookback_hours:
            raise LookbackTooShort("seasonal-naive needs at least 24 hours of lookback")
        last_day = series.to_array()[-24:]
        # hour h of the forecast continues the clock right after the lookback
        reps = int(np.ceil(req.horizon_hours / 24))
        return np.tile(last_day, reps)[: req.horizon_hours]


class EwmaBackend:
    """Hour-of-day conditioned exponential smoothing."""

    min_lookback_hours = 24

    def __init__(self, alpha: float = 0.5):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = alpha

    def forecast_values(self, req: ForecastRequest) -> np.ndarray:
        series = req.lookback
        if len(series) < self.min_lookback_hours:
            raise LookbackTooShort("ewma needs at least 24 hours of lookback")
        columns = _hour_of_day_columns(series)
        state: dict[int, float] = {}
        for hour, history in columns.items():
            s = history[0]
            for y in history[1:]:
                s = self.alpha * y + (1.0 - self.alpha) * s
            state[hour] = s
        first_hour = (series.start.hour + len(series)) % 24
        return np.array(
            [state[(first_hour + i) % 24] for i in range(req.horizon_hours)],
            dtype=np.float64,
        )


class RemoteBackend:
    """HTTP client for the :mod:`gridcast.wire` protocol.

    Pass-through by contract: the decoded ``values`` list is returned
    unmodified. A session per client keeps connection pooling; requests
    are independent, so concurrent calls are safe.
    """

    def __init__(self, endpoint: str, timeout_s: float = DEFAULT_TIMEOUT_S):
        if not endpoint.startswith(("http://", "https://")):
            raise InvalidEndpoint(f"endpoint must be an http(s) URL: {endpoint!r}")
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def _post(self, path: str, body: dict, expected: int) -> list[float]:
        try:
            resp = self._session.post(
                f"{self.endpoint}{path}", json=body, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"{self.endpoint}{path}: {exc}") from exc
        if resp.status_code >= 500:
            raise BackendUnavailable(f"{self.endpoint}{path}: HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendUnavailable(
                f"{self.endpoint}{path}: HTTP {resp.status_code} {resp.text[:200]}"
            )
        try:
            body = resp.json()
        except ValueError as exc:
            raise BackendUnavailable(f"{self.endpoint}{path}: non-JSON response") from exc
        return wire.validate_response(body, expected_length=expected)

    def forecast_values(self, req: ForecastRequest) -> np.ndarray:
        body = {
            "grid_id": req.grid_id,
            "resolution": req.lookback.resolution.value,
            "lookback": req.lookback.to_array().tolist(),
            "horizon_hours": req.horizon_hours,
        }
        wire.validate_forecast_request(body)
        values = self._post("/v1/forecast", body, expected=req.horizon_hours)
        return np.asarray(values, dtype=np.float64)

    def impute_values(self, masked: MaskedSeries) -> np.ndarray:
        data = masked.series.to_array()
        filled = np.where(np.isnan(data), 0.0, data)
        body = {
            "grid_id": masked.series.grid_id,
            "resolution": masked.series.resolution.value,
            "lookback": filled.tolist(),
            "mask": list(masked.mask),
        }
        wire.validate_impute_request(body)
        values = self._post("/v1/impute", body, expected=len(masked.series))
        return np.asarray(values, dtype=np.float64)


@dataclass
class _Entry:
    descriptor: BackendDescriptor
    impl: object


class BackendRegistry:
    """Name -> backend map with a configurable default. Reads are lock-free."""

    def __init__(self) -> None:
        self._entries: dict[str, _Entry] = {}
        self._default: str | None = None
        self._lock = threading.Lock()

    def register(
        self,
        descriptor: BackendDescriptor,
        endpoint: str | None = None,
        impl: object | None = None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
    ) -> BackendDescriptor:
        with self._lock:
            if descriptor.name in self._entries:
                raise DuplicateName(f"backend {descriptor.name!r} already registered")
            if impl is None:
                if descriptor.is_remote:
                    if endpoint is None:
                        raise InvalidEndpoint("remote backend needs an endpoint URL")
                    impl = RemoteBackend(endpoint, timeout_s=timeout_s)
                else:
                    raise ValueError("native backends must supply an implementation")
            self._entries[descriptor.name] = _Entry(descriptor, impl)
            if self._default is None:
                self._default = descriptor.name
        return descriptor

    def get(self, name: str) -> tuple[BackendDescriptor, object]:
        entry = self._entries.get(name)
        if entry is None:
            raise UnknownModel(f"no backend named {name!r}")
        return entry.descriptor, entry.impl

    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    @property
    def default_name(self) -> str | None:
        return self._default

    def set_default(self, name: str, mode: str | None = None) -> BackendDescriptor:
        descriptor, _ = self.get(name)
        if mode is not None:
            if mode not in MODES:
                raise InvalidMode(f"mode must be one of {MODES}")
            if mode != descriptor.mode:
                raise InvalidMode(
                    f"backend {name!r} runs in mode {descriptor.mode}, not {mode}"
                )
        with self._lock:
            self._default = name
        return descriptor


def default_registry(
    ewma_alpha: float = 0.5,
    remote_endpoints: dict[str, str] | None = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> BackendRegistry:
    """Registry with the native baselines, plus any configured remotes."""
    registry = BackendRegistry()
    registry.register(
        BackendDescriptor("seasonal-naive", capabilities=frozenset({"forecast"})),
        impl=SeasonalNaiveBackend(),
    )
    registry.register(
        BackendDescriptor("ewma", capabilities=frozenset({"forecast"})),
        impl=EwmaBackend(alpha=ewma_alpha),
    )
    for endpoint_id, url in (remote_endpoints or {}).items():
        name = endpoint_id if endpoint_id.startswith("remote:") else f"remote:{endpoint_id}"
        registry.register(
            BackendDescriptor(
                name, capabilities=frozenset({"forecast", "impute"})
            ),
            endpoint=url,
            timeout_s=timeout_s,
        )
    return registry


def forecast(
    registry: BackendRegistry,
    backend_name: str,
    req: ForecastRequest,
    issue_day: date,
) -> ForecastRecord:
    """Dispatch a forecast; output clamped at 0 from below."""
    descriptor, impl = registry.get(backend_name)
    if "forecast" not in descriptor.capabilities:
        raise InvalidMode(f"backend {backend_name!r} cannot forecast")
    if descriptor.max_horizon is not None and req.horizon_hours > descriptor.max_horizon:
        raise HorizonTooLong(
            f"{req.horizon_hours} h exceeds {backend_name!r} max of {descriptor.max_horizon} h"
        )
    values = impl.forecast_values(req)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (req.horizon_hours,):
        raise BackendUnavailable(
            f"{backend_name!r} returned {values.shape} values, wanted {req.horizon_hours}"
        )
    if not np.all(np.isfinite(values)):
        raise BackendUnavailable(f"{backend_name!r} returned non-finite values")
    if np.any(values < 0.0):
        log.warning(
            "backend %s produced %d negative values; clamping to 0",
            backend_name, int(np.sum(values < 0.0)),
        )
        values = np.maximum(values, 0.0)
    return ForecastRecord(
        grid_id=req.grid_id,
        issue_day=issue_day,
        horizon=tuple(values.tolist()),
        backend=descriptor,
    )


def impute(
    registry: BackendRegistry, backend_name: str, masked: MaskedSeries
) -> CarbonSeries:
    """Dispatch imputation to a remote backend; observed values pass through."""
    descriptor, impl = registry.get(backend_name)
    if "impute" not in descriptor.capabilities:
        raise InvalidMode(f"backend {backend_name!r} cannot impute")
    if masked.observed_count() == 0:
        raise AllMissing("cannot impute a fully missing series")
    values = np.asarray(impl.impute_values(masked), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise BackendUnavailable(f"{backend_name!r} returned non-finite values")
    if np.any(values < 0.0):
        log.warning(
            "backend %s produced %d negative values; clamping to 0",
            backend_name, int(np.sum(values < 0.0)),
        )
        values = np.maximum(values, 0.0)
    data = masked.series.to_array()
    observed = ~np.isnan(data)
    values[observed] = data[observed]  # pass-through invariant, enforced client-side
    return masked.series.with_values(values)
