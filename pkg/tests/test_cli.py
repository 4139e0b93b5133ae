from __future__ import annotations

import json
from datetime import date

import pytest

from gridcast.cli import main
from gridcast.datastore import FileStore
from gridcast.synthetic import periodic_grid, sinusoid_grid

D0 = date(2021, 1, 1)


@pytest.fixture
def env(tmp_path):
    store_root = tmp_path / "store"
    store = FileStore(store_root)
    store.store_actuals("syn", sinusoid_grid("syn", D0, 50, seed=8))
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "store_root": str(store_root),
        "window_days": 8,
        "min_days": 3,
        "lookback_days": 7,
    }))
    return store, str(config_path), tmp_path


def run(args):
    return main(args)


class TestIssueAndQuery:
    def test_issue_then_forecast_and_accuracy(self, env, capsys):
        store, config, _ = env
        assert run(["--config", config, "issue", "--date", "2021-02-10", "--grids", "syn"]) == 0
        out = capsys.readouterr().out
        assert "syn 2021-02-10: stored" in out

        assert run(["--config", config, "forecast", "syn", "--date", "2021-02-10",
                    "--horizon", "24", "--pi", "--stored-only"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert len(body["values"]) == 24
        assert len(body["lower"]) == 24

        assert run(["--config", config, "accuracy", "syn", "2021-02-10",
                    "--horizon", "24"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["mape_percent"] >= 0

    def test_on_demand_forecast_computes(self, env, capsys):
        _, config, _ = env
        assert run(["--config", config, "forecast", "syn", "--date", "2021-02-12"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert len(body["values"]) == 96

    def test_grids_and_history(self, env, capsys):
        _, config, _ = env
        assert run(["--config", config, "grids"]) == 0
        grids = json.loads(capsys.readouterr().out)
        assert grids[0]["grid_id"] == "syn"
        assert run(["--config", config, "history", "syn", "2021-01-10"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert len(body["values"]) == 24

    def test_model_set_and_show(self, env, capsys):
        _, config, _ = env
        assert run(["--config", config, "model", "--name", "ewma"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["default_backend"] == "ewma"


class TestImputeCommand:
    def test_payload_file(self, env, capsys):
        _, config, tmp_path = env
        payload = tmp_path / "payload.json"
        payload.write_text(json.dumps({
            "resolution": "hourly",
            "values": [10.0, None, 30.0],
            "mask": [1, 0, 1],
        }))
        assert run(["impute", "--input", str(payload), "--method", "linear"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["values"] == [10.0, 20.0, 30.0]

    def test_output_file(self, env, capsys):
        _, _, tmp_path = env
        payload = tmp_path / "payload.json"
        payload.write_text(json.dumps({"values": [5.0, None], "mask": [1, 0]}))
        out_path = tmp_path / "filled.json"
        assert run(["impute", "--input", str(payload), "--output", str(out_path)]) == 0
        assert json.loads(out_path.read_text())["values"] == [5.0, 5.0]


class TestEvalCommand:
    def test_forecast_protocol_emits_reports(self, env, capsys, tmp_path):
        store, config, base = env
        store.store_actuals("per", periodic_grid("per", D0, 50))
        spec = base / "spec.json"
        spec.write_text(json.dumps({
            "protocol": "forecast_4d",
            "grids": ["per"],
            "test_start": "2021-01-20",
            "test_days": 10,
            "lookback_days": [2],
            "window_days": 5,
            "min_days": 3,
        }))
        out_dir = tmp_path / "reports"
        assert run(["--config", config, "eval", "--spec", str(spec),
                    "--out", str(out_dir)]) == 0
        reports = json.loads((out_dir / "reports.json").read_text())
        assert reports[0]["mean_mape"] == pytest.approx(0.0, abs=1e-12)

    def test_extended_protocol_writes_degradation(self, env, capsys, tmp_path):
        store, config, base = env
        store.store_actuals("per", periodic_grid("per", D0, 80))
        spec = base / "spec.json"
        spec.write_text(json.dumps({
            "protocol": "forecast_extended",
            "grids": ["per"],
            "test_start": "2021-02-10",
            "test_days": 5,
            "horizon_days": 21,
            "lookback_days": [1, 2],
            "window_days": 5,
            "min_days": 3,
        }))
        out_dir = tmp_path / "reports"
        assert run(["--config", config, "eval", "--spec", str(spec),
                    "--out", str(out_dir)]) == 0
        assert (out_dir / "degradation.txt").exists()
        table = json.loads((out_dir / "degradation.json").read_text())
        assert set(table["per"]) == {"1", "2"}

    def test_error_exit_code(self, env, capsys):
        _, config, _ = env
        assert run(["--config", config, "history", "nope", "2021-01-01"]) == 1
        assert "unknown_grid" in capsys.readouterr().err
