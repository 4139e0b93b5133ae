"""Remote-backend wire protocol: JSON shapes shared with inference sidecars.

One POST body shape serves both tasks; the populated field picks the task:

* forecast: ``{grid_id, resolution, lookback: [float], horizon_hours: int}``
* impute  : ``{grid_id, resolution, lookback: [float], mask: [0|1]}``
  (lookback carries 0.0 at masked positions; the mask is authoritative)

Responses are ``{"values": [float], ...}``; extra keys such as ``metadata``
are allowed and ignored by the client. Validators below are used by the
client, by contract tests, and mirrored by any conforming sidecar.
"""

from __future__ import annotations

from typing import Any

from .errors import SchemaViolation

RESOLUTIONS = ("hourly", "five_minute")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaViolation(message)


def _check_float_list(obj: Any, name: str) -> None:
    _require(isinstance(obj, list) and len(obj) > 0, f"{name} must be a non-empty list")
    _require(
        all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj),
        f"{name} entries must be numbers",
    )


def validate_forecast_request(body: Any) -> None:
    _require(isinstance(body, dict), "request body must be an object")
    _require(isinstance(body.get("grid_id"), str) and body["grid_id"], "grid_id required")
    _require(body.get("resolution") in RESOLUTIONS, "resolution must be hourly|five_minute")
    _check_float_list(body.get("lookback"), "lookback")
    h = body.get("horizon_hours")
    _require(isinstance(h, int) and not isinstance(h, bool) and h > 0,
             "horizon_hours must be a positive integer")
    _require("mask" not in body, "forecast request must not carry a mask")


def validate_impute_request(body: Any) -> None:
    _require(isinstance(body, dict), "request body must be an object")
    _require(isinstance(body.get("grid_id"), str) and body["grid_id"], "grid_id required")
    _require(body.get("resolution") in RESOLUTIONS, "resolution must be hourly|five_minute")
    _check_float_list(body.get("lookback"), "lookback")
    mask = body.get("mask")
    _require(isinstance(mask, list) and len(mask) == len(body["lookback"]),
             "mask must be a list matching lookback length")
    _require(all(m in (0, 1) for m in mask), "mask entries must be 0 or 1")
    _require(any(m == 1 for m in mask), "mask must keep at least one observation")
    _require("horizon_hours" not in body, "impute request must not carry horizon_hours")


def validate_response(body: Any, expected_length: int | None = None) -> list[float]:
    _require(isinstance(body, dict), "response body must be an object")
    values = body.get("values")
    _check_float_list(values, "values")
    if expected_length is not None:
        _require(len(values) == expected_length,
                 f"expected {expected_length} values, got {len(values)}")
    return [float(v) for v in values]
