"""Model slots and the built-in deterministic stub.

A slot wraps one loaded model behind a uniform interface:

    forecast(lookback, horizon_steps, period) -> values
    impute(values, mask, period) -> values

Real foundation-model adapters register a loader under their model key;
loading weights is their business. The bridge ships with two stubs so the
wire contract is testable without any downloads:

* ``stub``: seasonal-naive; repeats the trailing period for forecasting
  and fills gaps from the nearest same-slot observation for imputation.
* ``stub-sampling``: the same point forecast plus seeded noise, collapsed
  to the median of a fixed number of samples; exercises the metadata path
  that probabilistic heads use.

One inference runs per slot at a time (a lock per slot); separate slots
are independent.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

DEFAULT_MAX_CONTEXT = 8760  # one year of hourly input


class ModelAdapter(Protocol):
    deterministic: bool

    def forecast(self, lookback: list[float], horizon_steps: int, period: int) -> list[float]: ...

    def impute(self, values: list[float], mask: list[int], period: int) -> list[float]: ...

    def sampling_info(self) -> tuple[int | None, int | None]: ...


class SeasonalNaiveStub:
    """Deterministic reference model; no weights, no state."""

    deterministic = True

    def forecast(self, lookback, horizon_steps, period):
        window = lookback[-period:] if len(lookback) >= period else lookback
        reps = -(-horizon_steps // len(window))
        return (window * reps)[:horizon_steps]

    def impute(self, values, mask, period):
        observed = [i for i, m in enumerate(mask) if m == 1]
        out = list(values)
        for t in range(len(values)):
            if mask[t] == 1:
                continue
            same_slot = [i for i in observed if i % period == t % period]
            pool = same_slot or observed
            src = min(pool, key=lambda s: (abs(s - t), s > t))
            out[t] = values[src]
        return out

    def sampling_info(self):
        return None, None


class SamplingStub:
    """Probabilistic-head stand-in: median of seeded noisy samples."""

    deterministic = False

    def __init__(self, num_samples: int = 9, seed: int = 1234, sigma: float = 2.0):
        self.num_samples = num_samples
        self.seed = seed
        self.sigma = sigma
        self._point = SeasonalNaiveStub()

    def forecast(self, lookback, horizon_steps, period):
        base = np.asarray(self._point.forecast(lookback, horizon_steps, period))
        rng = np.random.default_rng(self.seed)
        samples = base + rng.normal(0.0, self.sigma, size=(self.num_samples, base.size))
        return np.median(samples, axis=0).tolist()

    def impute(self, values, mask, period):
        return self._point.impute(values, mask, period)

    def sampling_info(self):
        return self.num_samples, self.seed


LOADERS: dict[str, Callable[[], ModelAdapter]] = {
    "stub": SeasonalNaiveStub,
    "stub-sampling": SamplingStub,
}


def register_loader(model_key: str, loader: Callable[[], ModelAdapter]) -> None:
    LOADERS[model_key] = loader


@dataclass
class ModelSlot:
    model_key: str
    mode: str = "ZS"  # ZS or FT; FT slots point at fine-tuned weights
    device: str = "cpu"
    max_context: int = DEFAULT_MAX_CONTEXT
    capabilities: frozenset[str] = frozenset({"forecast", "impute"})
    adapter: ModelAdapter | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def load(self) -> None:
        loader = LOADERS.get(self.model_key)
        if loader is None:
            raise KeyError(f"no loader for model key {self.model_key!r}")
        self.adapter = loader()

    @property
    def loaded(self) -> bool:
        return self.adapter is not None

    def run(self, fn: Callable[[ModelAdapter], list[float]]) -> list[float]:
        """Serialize inference on this slot; other slots stay independent."""
        if self.adapter is None:
            raise RuntimeError(f"model {self.model_key!r} not loaded")
        with self._lock:
            return fn(self.adapter)
