"""Command-line entry points.

Subcommands: serve, fetch, issue, impute, eval, plus thin query wrappers
(grids, history, forecast, accuracy, model) over the same operations the
HTTP API exposes. Unlike the service, the CLI forecast path computes on
demand by default.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from . import pipeline
from .backends import default_registry
from .config import ApiConfig, load_config
from .datastore import FileStore, run_fetch_cycle
from .errors import GridcastError, NoForecast
from .harness import (
    ProtocolSpec,
    degradation_table,
    emit_report,
    format_degradation_table,
    run_forecast_protocol,
    run_imputation_protocol,
)


def _setup(args) -> tuple[ApiConfig, FileStore]:
    config = load_config(args.config)
    if getattr(args, "store", None):
        config.store_root = args.store
    return config, FileStore(config.store_root)


def _registry(config: ApiConfig):
    return default_registry(
        ewma_alpha=config.ewma_alpha,
        remote_endpoints=config.remote_endpoints,
        timeout_s=config.timeout_s,
    )


def _today() -> date:
    return datetime.now(timezone.utc).date()


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config, store = _setup(args)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    app = create_app(config, store=store, registry=_registry(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_fetch(args) -> int:
    config, store = _setup(args)
    if config.fetch is None:
        print("no fetch job configured (config key 'fetch')", file=sys.stderr)
        return 2
    for_day = date.fromisoformat(args.date) if args.date else None
    while True:
        results = run_fetch_cycle(config.fetch, store, for_day=for_day)
        for r in results:
            status = f"+{r.rows_added} rows" if r.error is None else f"ERROR {r.error}"
            print(f"{r.grid_id}: {status}")
        if not args.loop:
            return 0 if all(r.error is None for r in results) else 1
        time.sleep(config.fetch.period_hours * 3600)


def cmd_issue(args) -> int:
    config, store = _setup(args)
    registry = _registry(config)
    if args.backend:
        registry.set_default(args.backend)
    issue_day = date.fromisoformat(args.date) if args.date else _today()
    grids = args.grids.split(",") if args.grids else None
    results = pipeline.issue_daily_forecasts(store, registry, config, issue_day, grids)
    for r in results:
        status = "stored" if r.stored else f"skipped ({r.error})"
        print(f"{r.grid_id} {r.issue_day.isoformat()}: {status}")
    return 0 if any(r.stored for r in results) else 1


def cmd_impute(args) -> int:
    config, _ = _setup(args) if args.config else (ApiConfig(), None)
    payload = json.loads(Path(args.input).read_text(encoding="utf-8")
                         if args.input != "-" else sys.stdin.read())
    masked = pipeline.masked_from_payload(payload)
    method = args.method or payload.get("method", config.imputer)
    filled = pipeline.fill_gaps(masked, method, _registry(config))
    out = {
        "grid_id": masked.series.grid_id,
        "resolution": masked.series.resolution.value,
        "method": method,
        "values": [float(v) for v in filled.to_array().tolist()],
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    config, store = _setup(args)
    spec = ProtocolSpec.from_json(args.spec)
    out_dir = Path(args.out)
    if spec.protocol == "imputation":
        reports = run_imputation_protocol(spec, store=store)
    else:
        registry = _registry(config)
        results = run_forecast_protocol(spec, registry, store=store)
        reports = [r.report for r in results]
        if spec.protocol == "forecast_extended":
            table = degradation_table(results)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "degradation.txt").write_text(
                format_degradation_table(table), encoding="utf-8"
            )
            (out_dir / "degradation.json").write_text(
                json.dumps(table, indent=2, sort_keys=True, default=list) + "\n",
                encoding="utf-8",
            )
    paths = emit_report(reports, out_dir)
    for p in paths:
        print(p)
    return 0


def cmd_grids(args) -> int:
    _, store = _setup(args)
    catalog = store.catalog()
    out = [dataclasses.asdict(catalog.get(g)) for g in catalog.grid_ids()]
    print(json.dumps(out, indent=2, default=str))
    return 0


def cmd_history(args) -> int:
    _, store = _setup(args)
    d = date.fromisoformat(args.date)
    series = store.load_actuals(args.grid, d, d)
    out = {
        "grid_id": args.grid,
        "date": args.date,
        "values": list(series.values),
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_forecast(args) -> int:
    config, store = _setup(args)
    registry = _registry(config)
    d = date.fromisoformat(args.date) if args.date else _today()
    try:
        record = store.load_forecast(args.grid, d)
    except NoForecast:
        if args.stored_only:
            raise
        record = pipeline.issue_for_grid(store, registry, config, args.grid, d)
    n = min(args.horizon, len(record.horizon))
    out = {
        "grid_id": args.grid,
        "issue_day": d.isoformat(),
        "backend": record.backend.name,
        "values": list(record.horizon[:n]),
    }
    if args.pi and record.interval is not None:
        out["lower"] = [lo for lo, _ in record.interval[:n]]
        out["upper"] = [hi for _, hi in record.interval[:n]]
        out["calibrated"] = list(record.calibrated[: (n + 23) // 24])
    print(json.dumps(out, indent=2))
    return 0


def cmd_accuracy(args) -> int:
    from .metrics import mape

    _, store = _setup(args)
    d = date.fromisoformat(args.date)
    record = store.load_forecast(args.grid, d)
    n = min(args.horizon, len(record.horizon))
    actual = store.load_actuals(args.grid, d, d + timedelta(days=(n + 23) // 24 - 1))
    pairs = [
        (y, f)
        for y, f in zip(actual.to_array()[:n].tolist(), record.horizon[:n])
        if y == y
    ]
    if not pairs:
        print("no ground truth inside the window", file=sys.stderr)
        return 1
    print(json.dumps({
        "grid_id": args.grid,
        "issue_day": d.isoformat(),
        "horizon_hours": n,
        "mape_percent": mape([y for y, _ in pairs], [f for _, f in pairs]),
    }, indent=2))
    return 0


def cmd_model(args) -> int:
    config, store = _setup(args)
    registry = _registry(config)
    state = store.load_state()
    if args.name:
        descriptor = registry.set_default(args.name, args.mode)
        state["default_backend"] = descriptor.name
        state["mode"] = descriptor.mode
        store.save_state(state)
    print(json.dumps({
        "default_backend": state.get("default_backend", registry.default_name),
        "mode": state.get("mode", "ZS"),
    }, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcast")
    parser.add_argument("--config", help="path to config JSON", default=None)
    parser.add_argument("--store", help="datastore root (overrides config)", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("fetch", help="run one data-fetch cycle")
    p.add_argument("--date", default=None, help="day to fetch (default: yesterday UTC)")
    p.add_argument("--loop", action="store_true", help="repeat on the configured period")
    p.set_defaults(fn=cmd_fetch)

    p = sub.add_parser("issue", help="issue daily forecasts for catalog grids")
    p.add_argument("--date", default=None, help="issue day (default: today UTC)")
    p.add_argument("--grids", default=None, help="comma-separated subset")
    p.add_argument("--backend", default=None, help="override the default backend")
    p.set_defaults(fn=cmd_issue)

    p = sub.add_parser("impute", help="fill a masked series from a JSON payload")
    p.add_argument("--input", default="-", help="payload path or - for stdin")
    p.add_argument("--method", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_impute)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("--spec", required=True, help="ProtocolSpec JSON file")
    p.add_argument("--out", default="reports", help="output directory")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("grids", help="list supported grids")
    p.set_defaults(fn=cmd_grids)

    p = sub.add_parser("history", help="one day of stored carbon intensity")
    p.add_argument("grid")
    p.add_argument("date")
    p.set_defaults(fn=cmd_history)

    p = sub.add_parser("forecast", help="stored or on-demand forecast")
    p.add_argument("grid")
    p.add_argument("--date", default=None)
    p.add_argument("--horizon", type=int, default=96)
    p.add_argument("--pi", action="store_true")
    p.add_argument("--stored-only", action="store_true")
    p.set_defaults(fn=cmd_forecast)

    p = sub.add_parser("accuracy", help="realized MAPE of a stored forecast")
    p.add_argument("grid")
    p.add_argument("date")
    p.add_argument("--horizon", type=int, default=96)
    p.set_defaults(fn=cmd_accuracy)

    p = sub.add_parser("model", help="show or set the default backend")
    p.add_argument("--name", default=None)
    p.add_argument("--mode", default=None)
    p.set_defaults(fn=cmd_model)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except GridcastError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
