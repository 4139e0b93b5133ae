"""Canonical carbon-intensity time-series types and arithmetic.

A :class:`CarbonSeries` is a UTC-aligned, fixed-resolution sequence of
non-negative gCO2eq/kWh values with first-class missingness: values are
stored as a float64 array where NaN encodes "absent", and the public
``values`` view exposes ``float | None`` per step. Present values are
always finite and >= 0; instances are immutable and safe to share across
threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import OutOfBounds, TooShort, ZeroGeneration


class Resolution(enum.Enum):
    """Supported sampling resolutions."""

    HOURLY = "hourly"
    FIVE_MINUTE = "five_minute"

    @property
    def step(self) -> timedelta:
        if self is Resolution.HOURLY:
            return timedelta(hours=1)
        return timedelta(minutes=5)

    @property
    def steps_per_day(self) -> int:
        if self is Resolution.HOURLY:
            return 24
        return 288


def _check_start_alignment(start: datetime, resolution: Resolution) -> datetime:
    if start.tzinfo is None:
        raise ValueError("series start must be timezone-aware UTC")
    if start.utcoffset() != timedelta(0):
        raise ValueError("series start must be in UTC")
    start = start.astimezone(timezone.utc)
    if start.second != 0 or start.microsecond != 0:
        raise ValueError("series start must be aligned to the resolution grid")
    if resolution is Resolution.HOURLY and start.minute != 0:
        raise ValueError("hourly series must start on the hour")
    if resolution is Resolution.FIVE_MINUTE and start.minute % 5 != 0:
        raise ValueError("five-minute series must start on a 5-minute boundary")
    return start


def _coerce_values(values: Iterable[float | None]) -> np.ndarray:
    arr = np.array([math.nan if v is None else float(v) for v in values], dtype=np.float64)
    present = ~np.isnan(arr)
    if np.any(~np.isfinite(arr[present])):
        raise ValueError("present values must be finite")
    if np.any(arr[present] < 0.0):
        raise ValueError("carbon intensity cannot be negative")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CarbonSeries:
    """One grid's carbon-intensity sequence at a fixed resolution.

    ``values`` accepts ``None`` (or NaN) for missing steps. Timestamps are
    implied: step ``i`` is at ``start + i * resolution.step``.
    """

    grid_id: str
    start: datetime
    resolution: Resolution
    values: tuple[float | None, ...] = field(init=False, repr=False)
    _data: np.ndarray = field(repr=False)

    def __init__(
        self,
        grid_id: str,
        start: datetime,
        resolution: Resolution,
        values: Iterable[float | None],
    ) -> None:
        object.__setattr__(self, "grid_id", str(grid_id))
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "start", _check_start_alignment(start, resolution))
        data = _coerce_values(values)
        object.__setattr__(self, "_data", data)
        object.__setattr__(
            self, "values", tuple(None if math.isnan(v) else v for v in data.tolist())
        )

    def __len__(self) -> int:
        return int(self._data.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CarbonSeries):
            return NotImplemented
        return (
            self.grid_id == other.grid_id
            and self.start == other.start
            and self.resolution == other.resolution
            and len(self) == len(other)
            and bool(np.all((self._data == other._data) | (np.isnan(self._data) & np.isnan(other._data))))
        )

    def to_array(self) -> np.ndarray:
        """Read-only float64 view; NaN encodes missing."""
        return self._data

    def timestamp(self, index: int) -> datetime:
        if not 0 <= index < len(self):
            raise OutOfBounds(f"index {index} outside series of length {len(self)}")
        return self.start + index * self.resolution.step

    def timestamps(self) -> list[datetime]:
        step = self.resolution.step
        return [self.start + i * step for i in range(len(self))]

    def index_of(self, ts: datetime) -> int:
        """Index of an exact grid timestamp; OutOfBounds if outside the series."""
        delta = ts - self.start
        step = self.resolution.step
        steps, rem = divmod(delta, step)
        if rem != timedelta(0):
            raise ValueError(f"{ts.isoformat()} is not on the series grid")
        idx = int(steps)
        if not 0 <= idx < len(self):
            raise OutOfBounds(f"{ts.isoformat()} outside series range")
        return idx

    @property
    def is_complete(self) -> bool:
        return not bool(np.any(np.isnan(self._data)))

    def present_count(self) -> int:
        return int(np.sum(~np.isnan(self._data)))

    def with_values(self, values: Iterable[float | None]) -> CarbonSeries:
        """Same identity/axis, new values (must keep the length)."""
        out = CarbonSeries(self.grid_id, self.start, self.resolution, values)
        if len(out) != len(self):
            raise ValueError("with_values must preserve length")
        return out


@dataclass(frozen=True)
class SourceMix:
    """Per-source generation (kWh) and emission factors (gCO2eq/kWh)."""

    entries: tuple[tuple[str, float, float], ...]

    def __init__(self, entries: Iterable[tuple[str, float, float]]) -> None:
        normalized = []
        for name, generation, factor in entries:
            generation = float(generation)
            factor = float(factor)
            if generation < 0:
                raise ValueError(f"negative generation for source {name!r}")
            if factor < 0:
                raise ValueError(f"negative emission factor for source {name!r}")
            normalized.append((str(name), generation, factor))
        object.__setattr__(self, "entries", tuple(normalized))


@dataclass(frozen=True)
class Window:
    """Half-open index window ``[offset, offset + length)`` into a series."""

    offset: int
    length: int

    def __post_init__(self) -> None:
        if self.offset < 0:
            raise ValueError("window offset must be >= 0")
        if self.length <= 0:
            raise ValueError("window length must be positive")


@dataclass(frozen=True)
class MaskedSeries:
    """A series paired with its binary observation mask.

    ``mask[i] == 1`` iff the value at ``i`` is present; masked (missing)
    positions carry no value. Construct via :func:`missing_mask` or
    :func:`apply_mask`.
    """

    series: CarbonSeries
    mask: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.mask) != len(self.series):
            raise ValueError("mask length must equal series length")
        data = self.series.to_array()
        for i, m in enumerate(self.mask):
            if m not in (0, 1):
                raise ValueError("mask entries must be 0 or 1")
            if (m == 1) != (not math.isnan(data[i])):
                raise ValueError(f"mask[{i}] inconsistent with series missingness")

    def observed_count(self) -> int:
        return sum(self.mask)

    def masked_indices(self) -> list[int]:
        return [i for i, m in enumerate(self.mask) if m == 0]


def compute_carbon_intensity(mix: SourceMix) -> float:
    """Generation-weighted average emission factor, in gCO2eq/kWh."""
    total = math.fsum(generation for _, generation, _ in mix.entries)
    if total <= 0.0:
        raise ZeroGeneration("no generation in source mix")
    weighted = math.fsum(generation * factor for _, generation, factor in mix.entries)
    return weighted / total


def slice_series(series: CarbonSeries, window: Window) -> CarbonSeries:
    """Sub-series for ``window``; start shifts, resolution and missingness copy over."""
    if window.offset + window.length > len(series):
        raise OutOfBounds(
            f"window [{window.offset}, {window.offset + window.length}) "
            f"exceeds series length {len(series)}"
        )
    new_start = series.start + window.offset * series.resolution.step
    data = series.to_array()[window.offset : window.offset + window.length]
    return CarbonSeries(series.grid_id, new_start, series.resolution, data)


def missing_mask(series: CarbonSeries) -> MaskedSeries:
    """Mask derived from the series' own missingness (1 = present)."""
    data = series.to_array()
    mask = tuple(0 if math.isnan(v) else 1 for v in data.tolist())
    return MaskedSeries(series=series, mask=mask)


def apply_mask(series: CarbonSeries, mask: Sequence[int]) -> MaskedSeries:
    """Hide ``mask == 0`` positions of a series (used by imputation evaluation)."""
    if len(mask) != len(series):
        raise ValueError("mask length must equal series length")
    data = series.to_array()
    hidden = [None if mask[i] == 0 else data[i] for i in range(len(series))]
    masked = CarbonSeries(series.grid_id, series.start, series.resolution, hidden)
    return MaskedSeries(series=masked, mask=tuple(int(m) for m in mask))


def align_to_day_boundary(series: CarbonSeries) -> CarbonSeries:
    """Trim partial leading/trailing days so the series spans whole UTC days."""
    if series.resolution is not Resolution.HOURLY:
        raise ValueError("day alignment requires hourly resolution")
    lead = (-series.start.hour) % 24
    usable = len(series) - lead
    if usable < 24:
        raise TooShort("fewer than 24 hourly values remain after alignment")
    length = usable - (usable % 24)
    return slice_series(series, Window(offset=lead, length=length))


def day_start(day: date) -> datetime:
    """Midnight UTC for a calendar day."""
    return datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
