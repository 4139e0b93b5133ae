"""Missing-data estimation: statistical interpolators and patch masking.

Three native imputers fill the gaps of a :class:`~gridcast.series.MaskedSeries`:

* ``naive``: copy the same time-of-day value from the nearest day that has
  one (equidistant ties resolve to the past); positions with no same-hour
  observation anywhere fall back to the nearest observed value in time.
* ``linear``: straight line between the bracketing observations; leading
  and trailing gaps extend the nearest observation as a constant.
* ``cubic-spline``: natural cubic spline through the observed knots
  (zero second derivative at the end knots), constant extension outside
  them, output clamped at 0 from below.

All imputers leave observed positions bit-identical (pass-through).
``generate_mask`` produces the seeded fixed-length-patch masks used by the
imputation evaluation protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import AllMissing, InfeasibleTarget, NoMaskedPositions
from .series import CarbonSeries, MaskedSeries, Resolution, apply_mask

DEFAULT_PATCH_STEPS = {Resolution.HOURLY: 4, Resolution.FIVE_MINUTE: 12}


@dataclass(frozen=True)
class MaskPlan:
    """Seeded plan for hiding a target fraction of a series in fixed patches."""

    target_fraction: float
    patch_length: int
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.target_fraction < 1.0:
            raise ValueError("target_fraction must be in (0, 1)")
        if self.patch_length <= 0:
            raise ValueError("patch_length must be positive")


def generate_mask(length: int, plan: MaskPlan) -> tuple[int, ...]:
    """Binary mask (1 = keep) with non-overlapping masked patches.

    Patches of ``plan.patch_length`` are placed uniformly at random (seeded,
    deterministic) until the masked count reaches
    ``floor(target_fraction * length)``. At least one position always stays
    observed; raises InfeasibleTarget when placement cannot reach the target.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    patch = plan.patch_length
    if patch >= length:
        raise InfeasibleTarget("patch length leaves no room for an observation")
    target = math.floor(plan.target_fraction * length)
    if target >= length:
        raise InfeasibleTarget("target would mask the whole series")

    rng = np.random.default_rng(plan.seed)
    mask = np.ones(length, dtype=np.int8)
    masked = 0
    while masked < target:
        # candidate starts where the whole patch is still unmasked
        window = np.lib.stride_tricks.sliding_window_view(mask, patch)
        candidates = np.nonzero(window.min(axis=1) == 1)[0]
        if candidates.size == 0:
            raise InfeasibleTarget(
                f"cannot place another {patch}-step patch (masked {masked}/{target})"
            )
        if masked + patch >= length:
            raise InfeasibleTarget("placing another patch would mask everything")
        start = int(rng.choice(candidates))
        mask[start : start + patch] = 0
        masked += patch
    return tuple(int(m) for m in mask)


def achieved_fraction(mask: tuple[int, ...]) -> float:
    return (len(mask) - sum(mask)) / len(mask)


def _observed(masked: MaskedSeries) -> tuple[np.ndarray, np.ndarray]:
    data = masked.series.to_array()
    idx = np.nonzero(~np.isnan(data))[0]
    if idx.size == 0:
        raise AllMissing("no observed values to impute from")
    return idx, data[idx]


def impute_naive(masked: MaskedSeries) -> CarbonSeries:
    """Same time-of-day from the nearest day with an observation."""
    idx, _ = _observed(masked)
    data = masked.series.to_array()
    spd = masked.series.resolution.steps_per_day
    observed_set = set(idx.tolist())
    out = data.copy()

    # observed positions grouped by time-of-day slot, kept sorted
    by_slot: dict[int, list[int]] = {}
    for i in idx.tolist():
        by_slot.setdefault(i % spd, []).append(i)

    for t in range(out.size):
        if t in observed_set:
            continue
        candidates = by_slot.get(t % spd)
        if candidates:
            src = min(candidates, key=lambda s: (abs(s - t), s > t))
        else:
            src = min(idx.tolist(), key=lambda s: (abs(s - t), s > t))
        out[t] = data[src]
    return masked.series.with_values(out)


def impute_linear(masked: MaskedSeries) -> CarbonSeries:
    """Linear interpolation between observations, constant end extension."""
    idx, vals = _observed(masked)
    n = len(masked.series)
    out = np.interp(np.arange(n, dtype=np.float64), idx.astype(np.float64), vals)
    data = masked.series.to_array()
    out[idx] = data[idx]  # exact pass-through, no float drift
    return masked.series.with_values(out)


def natural_cubic_spline(
    xs: np.ndarray, ys: np.ndarray
) -> Callable[[np.ndarray], np.ndarray]:
    """Natural cubic spline through ``(xs, ys)``: S'' = 0 at the end knots.

    Returns an evaluator valid on [xs[0], xs[-1]]; queries outside are
    clamped to the end knots (constant extension). Needs >= 3 knots.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.size
    if n < 3:
        raise ValueError("natural spline needs at least 3 knots")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("knots must be strictly increasing")

    h = np.diff(xs)
    # tridiagonal system for interior second derivatives M[1..n-2]
    rhs = 6.0 * ((ys[2:] - ys[1:-1]) / h[1:] - (ys[1:-1] - ys[:-2]) / h[:-1])
    diag = 2.0 * (h[:-1] + h[1:])
    lower = h[1:-1]
    upper = h[1:-1]
    m = n - 2
    ab = np.zeros((3, m))
    ab[1, :] = diag
    if m > 1:
        ab[0, 1:] = upper
        ab[2, :-1] = lower
    interior = solve_banded((1, 1), ab, rhs)
    second = np.zeros(n)
    second[1:-1] = interior

    def evaluate(q: np.ndarray) -> np.ndarray:
        q = np.clip(np.asarray(q, dtype=np.float64), xs[0], xs[-1])
        k = np.clip(np.searchsorted(xs, q, side="right") - 1, 0, n - 2)
        hk = h[k]
        a = (xs[k + 1] - q) / hk
        b = (q - xs[k]) / hk
        return (
            a * ys[k]
            + b * ys[k + 1]
            + ((a**3 - a) * second[k] + (b**3 - b) * second[k + 1]) * hk**2 / 6.0
        )

    return evaluate


def impute_cubic_spline(masked: MaskedSeries) -> CarbonSeries:
    """Natural-spline fill; falls back to linear below 3 observations."""
    idx, vals = _observed(masked)
    if idx.size < 3:
        return impute_linear(masked)
    n = len(masked.series)
    spline = natural_cubic_spline(idx.astype(np.float64), vals)
    out = spline(np.arange(n, dtype=np.float64))
    out = np.maximum(out, 0.0)
    data = masked.series.to_array()
    out[idx] = data[idx]
    return masked.series.with_values(out)


_IMPUTERS: dict[str, Callable[[MaskedSeries], CarbonSeries]] = {
    "naive": impute_naive,
    "linear": impute_linear,
    "cubic-spline": impute_cubic_spline,
}


def native_imputer_names() -> tuple[str, ...]:
    return tuple(_IMPUTERS)


def impute_with(method: str, masked: MaskedSeries) -> CarbonSeries:
    """Dispatch to a native imputer by name."""
    try:
        fn = _IMPUTERS[method]
    except KeyError:
        raise ValueError(f"unknown imputation method {method!r}") from None
    return fn(masked)


def evaluate_imputation(
    truth: CarbonSeries, masked: MaskedSeries, method: str
) -> float:
    """Normalized RMSE of one imputer over the masked positions.

    Values are z-scored with mean/std taken from the observed (unmasked)
    portion; the error is evaluated at masked positions only.
    """
    from .metrics import normalized_rmse

    if not truth.is_complete:
        raise ValueError("truth series must be fully observed")
    if len(truth) != len(masked.series):
        raise ValueError("truth and masked series lengths differ")
    positions = masked.masked_indices()
    if not positions:
        raise NoMaskedPositions("mask hides nothing; nothing to evaluate")
    filled = impute_with(method, masked)
    observed = [i for i in range(len(truth)) if masked.mask[i] == 1]
    obs_vals = truth.to_array()[observed]
    stats = (float(np.mean(obs_vals)), float(np.std(obs_vals)))
    return normalized_rmse(truth.to_array(), filled.to_array(), positions, stats)


def mask_for_evaluation(truth: CarbonSeries, plan: MaskPlan) -> MaskedSeries:
    """Hide a seeded patch mask of a fully observed series."""
    if not truth.is_complete:
        raise ValueError("evaluation masking requires a fully observed series")
    mask = generate_mask(len(truth), plan)
    return apply_mask(truth, mask)
