"""Seeded synthetic grids for tests and desk-scale evaluation runs.

Generators return hourly (or 5-minute) series shaped like real carbon
intensity: a positive base load, a diurnal cycle, optional trend/weekly
structure, Gaussian noise, and a regime-switching "volatile renewables"
variant. Everything is deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from datetime import date

import numpy as np

from .series import CarbonSeries, Resolution, day_start


def periodic_grid(
    grid_id: str,
    start_day: date,
    n_days: int,
    base: float = 400.0,
    amplitude: float = 120.0,
) -> CarbonSeries:
    """Exactly daily-periodic hourly series (no noise): the trivial anchor."""
    hours = np.arange(n_days * 24)
    values = base + amplitude * np.sin(2.0 * math.pi * (hours % 24) / 24.0)
    return CarbonSeries(grid_id, day_start(start_day), Resolution.HOURLY, values)


def sinusoid_grid(
    grid_id: str,
    start_day: date,
    n_days: int,
    base: float = 400.0,
    amplitude: float = 120.0,
    noise_sigma: float | None = None,
    noise_frac: float = 0.10,
    trend_per_day: float = 0.0,
    seed: int = 0,
) -> CarbonSeries:
    """Daily sinusoid plus Gaussian noise (sigma defaults to 10% of base)."""
    rng = np.random.default_rng(seed)
    sigma = noise_sigma if noise_sigma is not None else noise_frac * base
    hours = np.arange(n_days * 24)
    signal = (
        base
        + amplitude * np.sin(2.0 * math.pi * (hours % 24) / 24.0)
        + trend_per_day * (hours / 24.0)
    )
    values = np.maximum(signal + rng.normal(0.0, sigma, size=hours.size), 0.0)
    return CarbonSeries(grid_id, day_start(start_day), Resolution.HOURLY, values)


def volatile_grid(
    grid_id: str,
    start_day: date,
    n_days: int,
    base: float = 420.0,
    amplitude: float = 100.0,
    renewable_dip: float = 240.0,
    switch_prob: float = 0.08,
    noise_sigma: float = 35.0,
    seed: int = 0,
) -> CarbonSeries:
    """Regime-switching grid: high-renewable days slash the carbon intensity."""
    rng = np.random.default_rng(seed)
    hours = np.arange(n_days * 24)
    regime = np.zeros(n_days, dtype=bool)
    state = False
    for d in range(n_days):
        if rng.random() < switch_prob:
            state = not state
        regime[d] = state
    dip = np.where(regime[hours // 24], renewable_dip, 0.0)
    signal = base - dip + amplitude * np.sin(2.0 * math.pi * (hours % 24) / 24.0)
    values = np.maximum(signal + rng.normal(0.0, noise_sigma, size=hours.size), 0.0)
    return CarbonSeries(grid_id, day_start(start_day), Resolution.HOURLY, values)


def smooth_two_tone(
    grid_id: str,
    start_day: date,
    n_days: int,
    resolution: Resolution = Resolution.HOURLY,
    base: float = 400.0,
    seed: int = 0,
) -> CarbonSeries:
    """Smooth sum of two incommensurate sinusoids (imputation test truth)."""
    steps = n_days * resolution.steps_per_day
    t = np.arange(steps, dtype=np.float64)
    day = float(resolution.steps_per_day)
    values = (
        base
        + 120.0 * np.sin(2.0 * math.pi * t / day)
        + 60.0 * np.sin(2.0 * math.pi * t / (day * math.sqrt(2.0)) + 0.7)
    )
    # seeded phase jitter keeps distinct grids distinct without adding noise
    if seed:
        rng = np.random.default_rng(seed)
        values = values + 15.0 * np.sin(2.0 * math.pi * t / day * 2.0 + rng.uniform(0, 2 * math.pi))
    return CarbonSeries(grid_id, day_start(start_day), resolution, np.maximum(values, 0.0))
