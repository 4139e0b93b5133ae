"""Runtime configuration: JSON file plus environment overrides.

Everything has a usable default so tests and the CLI can run against a
bare datastore directory. Recognized environment variables:

    GRIDCAST_CONFIG              path to the config file
    GRIDCAST_STORE_ROOT          datastore root directory
    GRIDCAST_FETCH_PERIOD_HOURS  fetch schedule override
    GRIDCAST_REMOTE_ENDPOINTS    JSON object {endpoint-id: url}
    GRIDCAST_TIMEOUT_S           remote request timeout
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .datastore import FetchJobConfig


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store_root: str = "./store"
    default_backend: str = "seasonal-naive"
    alpha: float = 0.95
    window_days: int = 75
    min_days: int = 10
    fallback_width: float = 0.5
    max_horizon: int = 96
    max_impute_length: int = 200_000
    on_demand: bool = False
    lookback_days: int = 30
    imputer: str = "linear"
    ewma_alpha: float = 0.5
    remote_endpoints: dict[str, str] = field(default_factory=dict)
    timeout_s: float = 30.0
    fetch: FetchJobConfig | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.max_horizon > 96:
            raise ValueError("forecast endpoint horizon is capped at 96")


def load_config(path: str | Path | None = None) -> ApiConfig:
    """Config file (if any) merged with environment overrides."""
    if path is None:
        path = os.environ.get("GRIDCAST_CONFIG")
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))

    fetch_raw = raw.pop("fetch", None)
    config = ApiConfig(**raw)
    if fetch_raw is not None:
        config.fetch = FetchJobConfig(**fetch_raw)

    if "GRIDCAST_STORE_ROOT" in os.environ:
        config.store_root = os.environ["GRIDCAST_STORE_ROOT"]
    if "GRIDCAST_REMOTE_ENDPOINTS" in os.environ:
        config.remote_endpoints = json.loads(os.environ["GRIDCAST_REMOTE_ENDPOINTS"])
    if "GRIDCAST_TIMEOUT_S" in os.environ:
        config.timeout_s = float(os.environ["GRIDCAST_TIMEOUT_S"])
    if "GRIDCAST_FETCH_PERIOD_HOURS" in os.environ and config.fetch is not None:
        period = int(os.environ["GRIDCAST_FETCH_PERIOD_HOURS"])
        config.fetch = FetchJobConfig(
            source_url_template=config.fetch.source_url_template,
            period_hours=period,
            retry_count=config.fetch.retry_count,
            backoff_s=config.fetch.backoff_s,
            parser=config.fetch.parser,
            auth_token=config.fetch.auth_token,
        )
    return config
