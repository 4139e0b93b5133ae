"""Exception hierarchy shared across the pipeline.

Every error raised by the library derives from :class:`GridcastError` so
callers can catch at whatever granularity they need. Service handlers map
these onto HTTP status codes (see ``service.py``).
"""

from __future__ import annotations


class GridcastError(Exception):
    """Base class for all library errors."""

    code = "error"


# --- series ---------------------------------------------------------------

class ZeroGeneration(GridcastError):
    """Source mix has no generation; carbon intensity is undefined."""

    code = "zero_generation"


class OutOfBounds(GridcastError):
    """Window does not fit inside the series."""

    code = "out_of_bounds"


class TooShort(GridcastError):
    """Not enough data after alignment/trimming."""

    code = "too_short"


# --- backends -------------------------------------------------------------

class BackendUnavailable(GridcastError):
    """Remote backend unreachable or returned a server-side failure."""

    code = "backend_unavailable"


class HorizonTooLong(GridcastError):
    """Requested horizon exceeds the backend's or endpoint's maximum."""

    code = "horizon_too_long"


class LookbackTooShort(GridcastError):
    """Lookback shorter than the backend's minimum."""

    code = "lookback_too_short"


class DuplicateName(GridcastError):
    """Backend name already registered."""

    code = "duplicate_name"


class InvalidEndpoint(GridcastError):
    """Remote backend registered without a usable endpoint URL."""

    code = "invalid_endpoint"


class UnknownModel(GridcastError):
    """Backend name not present in the registry."""

    code = "unknown_model"


class InvalidMode(GridcastError):
    """Requested mode is not valid for the selected backend."""

    code = "invalid_mode"


# --- imputation -----------------------------------------------------------

class AllMissing(GridcastError):
    """Series has no observed values to impute from."""

    code = "all_missing"


class InfeasibleTarget(GridcastError):
    """Non-overlapping patch placement cannot reach the masking target."""

    code = "infeasible_target"


class NoMaskedPositions(GridcastError):
    """Imputation evaluation called with nothing masked."""

    code = "no_masked_positions"


# --- conformal ------------------------------------------------------------

class GridMismatch(GridcastError):
    """Record and series belong to different grids."""

    code = "grid_mismatch"


class ResolutionMismatch(GridcastError):
    """Series resolution differs from what the operation requires."""

    code = "resolution_mismatch"


class LengthMismatch(GridcastError):
    """Paired sequences have different lengths."""

    code = "length_mismatch"


# --- metrics --------------------------------------------------------------

class AllBelowEpsilon(GridcastError):
    """Every ground-truth hour is below the relative-error threshold."""

    code = "all_below_epsilon"


class DegenerateSeries(GridcastError):
    """Zero-variance series cannot be z-scored."""

    code = "degenerate_series"


# --- datastore / service --------------------------------------------------

class UnknownGrid(GridcastError):
    """Grid id not present in the catalog."""

    code = "unknown_grid"


class NoData(GridcastError):
    """No stored carbon-intensity data for the requested range."""

    code = "no_data"


class NoForecast(GridcastError):
    """No stored forecast for the requested grid/issue day."""

    code = "no_forecast"


class TruthUnavailable(GridcastError):
    """Ground truth covers none of the requested window."""

    code = "truth_unavailable"


class ConflictingValue(GridcastError):
    """Ingested value disagrees with an already-stored one."""

    code = "conflicting_value"


class SchemaViolation(GridcastError):
    """Payload does not match the expected file or wire schema."""

    code = "schema_violation"


class InsufficientHistory(GridcastError):
    """Grid lacks the history a protocol run requires."""

    code = "insufficient_history"
