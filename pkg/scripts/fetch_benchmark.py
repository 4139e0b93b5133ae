#!/usr/bin/env python3
"""Download the public CISO 2020-2021 hourly benchmark series and convert it
to the actuals CSV schema at tests/data/ciso_2020_2021.csv, enabling the
optional A8 acceptance check.

Needs network access to raw.githubusercontent.com. The upstream files carry
one year each with a UTC timestamp column and a carbon-intensity column
(avg emission factor, gCO2eq/kWh); column names are matched loosely since
the upstream layout has shifted between revisions.
"""

from __future__ import annotations

import csv
import io
import sys
from datetime import datetime, timezone
from pathlib import Path

import requests

SOURCES = [
    "https://raw.githubusercontent.com/carbonfirst/CarbonCast/master/data/CISO/CISO_2020_clean.csv",
    "https://raw.githubusercontent.com/carbonfirst/CarbonCast/master/data/CISO/CISO_2021_clean.csv",
]
OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "ciso_2020_2021.csv"

TS_CANDIDATES = ("utc time", "utc_time", "datetime", "timestamp", "date")
CI_CANDIDATES = (
    "carbon_intensity",
    "carbon intensity",
    "avg_carbon_intensity",
    "carbon_intensity_avg_lifecycle",
)


def pick_column(header: list[str], candidates: tuple[str, ...]) -> int:
    lowered = [h.strip().lower() for h in header]
    for cand in candidates:
        for i, h in enumerate(lowered):
            if cand in h:
                return i
    raise SystemExit(f"no column matching {candidates} in header {header}")


def parse_upstream(text: str) -> dict[datetime, float]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    ts_col = pick_column(header, TS_CANDIDATES)
    ci_col = pick_column(header, CI_CANDIDATES)
    rows: dict[datetime, float] = {}
    for row in reader:
        if not row or not row[ts_col].strip():
            continue
        raw_ts = row[ts_col].strip().replace("Z", "+00:00")
        ts = datetime.fromisoformat(raw_ts)
        ts = ts.replace(tzinfo=timezone.utc) if ts.tzinfo is None else ts.astimezone(timezone.utc)
        value = row[ci_col].strip()
        if value:
            rows[ts] = float(value)
    return rows


def main() -> int:
    merged: dict[datetime, float] = {}
    for url in SOURCES:
        print(f"fetching {url}")
        resp = requests.get(url, timeout=60)
        resp.raise_for_status()
        merged.update(parse_upstream(resp.text))
    if not merged:
        print("no rows parsed; aborting", file=sys.stderr)
        return 1
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp_utc,carbon_intensity_gco2eq_kwh\n")
        for ts in sorted(merged):
            fh.write(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{merged[ts]:.6g}\n")
    print(f"wrote {len(merged)} rows to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
