"""HTTP surface of the inference sidecar.

    POST /v1/forecast   {grid_id, resolution, lookback, horizon_hours}
    POST /v1/impute     {grid_id, resolution, lookback, mask}
    GET  /healthz       model inventory and readiness

Responses carry {"values": [...], "metadata": {...}}. Imputation enforces
the pass-through invariant bridge-side: observed positions are returned
bit-identical no matter what the model emits. Context limits yield 400;
unloaded or unknown model slots yield 503.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from . import schema
from .models import ModelSlot

STEPS_PER_DAY = {"hourly": 24, "five_minute": 288}


def build_slots(config: dict | None = None) -> dict[str, ModelSlot]:
    """Slots from a config mapping; the deterministic stub is always present."""
    slots: dict[str, ModelSlot] = {}
    entries = (config or {}).get("models", [{"model_key": "stub"}])
    for entry in entries:
        slot = ModelSlot(
            model_key=entry["model_key"],
            mode=entry.get("mode", "ZS"),
            device=entry.get("device", "cpu"),
            max_context=entry.get("max_context", ModelSlot.max_context),
            capabilities=frozenset(entry.get("capabilities", ("forecast", "impute"))),
        )
        try:
            slot.load()
        except KeyError:
            pass  # stays unloaded; /healthz reports it, requests get 503
        slots[slot.model_key] = slot
    if "stub" not in slots:
        stub = ModelSlot(model_key="stub")
        stub.load()
        slots["stub"] = stub
    return slots


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(config: dict | None = None) -> FastAPI:
    app = FastAPI(title="tsfm-bridge", version="0.1.0")
    slots = build_slots(config)
    default_model = (config or {}).get("default_model", "stub")
    app.state.slots = slots

    def pick_slot(model_key: str | None):
        key = model_key or default_model
        slot = slots.get(key)
        if slot is None or not slot.loaded:
            return None, _error(503, "model_not_loaded", f"model {key!r} is not loaded")
        return slot, None

    def metadata_for(slot: ModelSlot) -> dict:
        num_samples, seed = slot.adapter.sampling_info()
        return {
            "model": slot.model_key,
            "mode": slot.mode,
            "deterministic": slot.adapter.deterministic,
            "num_samples": num_samples,
            "sampling_seed": seed,
        }

    @app.post("/v1/forecast")
    async def serve_forecast(request: Request, model: str | None = Query(default=None)):
        body = await request.json()
        try:
            schema.validate_forecast_request(body)
        except schema.SchemaError as exc:
            return _error(400, "schema_violation", str(exc))
        slot, err = pick_slot(model)
        if err is not None:
            return err
        if len(body["lookback"]) > slot.max_context:
            return _error(
                400, "context_too_long",
                f"lookback of {len(body['lookback'])} exceeds max context {slot.max_context}",
            )
        if "forecast" not in slot.capabilities:
            return _error(400, "capability_missing", f"{slot.model_key!r} cannot forecast")
        period = STEPS_PER_DAY[body["resolution"]]
        lookback = [float(v) for v in body["lookback"]]
        horizon = body["horizon_hours"]
        values = slot.run(lambda adapter: adapter.forecast(lookback, horizon, period))
        response = {"values": [float(v) for v in values], "metadata": metadata_for(slot)}
        schema.validate_response(response, expected_length=horizon)
        return response

    @app.post("/v1/impute")
    async def serve_impute(request: Request, model: str | None = Query(default=None)):
        body = await request.json()
        try:
            schema.validate_impute_request(body)
        except schema.SchemaError as exc:
            return _error(400, "schema_violation", str(exc))
        slot, err = pick_slot(model)
        if err is not None:
            return err
        if len(body["lookback"]) > slot.max_context:
            return _error(
                400, "context_too_long",
                f"series of {len(body['lookback'])} exceeds max context {slot.max_context}",
            )
        if "impute" not in slot.capabilities:
            return _error(400, "capability_missing", f"{slot.model_key!r} cannot impute")
        period = STEPS_PER_DAY[body["resolution"]]
        values = [float(v) for v in body["lookback"]]
        mask = [int(m) for m in body["mask"]]
        out = slot.run(lambda adapter: adapter.impute(list(values), list(mask), period))
        # pass-through enforced here, regardless of model behavior
        out = [values[i] if mask[i] == 1 else float(out[i]) for i in range(len(values))]
        response = {"values": out, "metadata": metadata_for(slot)}
        schema.validate_response(response, expected_length=len(values))
        return response

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "models": [
                {
                    "model_key": slot.model_key,
                    "mode": slot.mode,
                    "device": slot.device,
                    "max_context": slot.max_context,
                    "capabilities": sorted(slot.capabilities),
                    "loaded": slot.loaded,
                }
                for slot in slots.values()
            ],
        }

    return app


def main(argv: list[str] | None = None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="tsfm-bridge")
    parser.add_argument("--config", default=None, help="JSON config with model slots")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    args = parser.parse_args(argv)
    config = json.loads(Path(args.config).read_text()) if args.config else None
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
