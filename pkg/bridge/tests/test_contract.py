"""Golden-fixture contract tests for the wire protocol (criterion A10).

The fixtures are recorded once against the deterministic stub and pinned;
any drift in the schema or in stub behavior fails here first.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from tsfm_bridge import schema
from tsfm_bridge.app import create_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def load(name):
    return json.loads((FIXTURES / name).read_text())


class TestGoldenFixtures:
    def test_forecast_request_validates(self):
        schema.validate_forecast_request(load("forecast_request.json"))

    def test_impute_request_validates(self):
        schema.validate_impute_request(load("impute_request.json"))

    def test_forecast_response_validates(self):
        body = load("forecast_response.json")
        schema.validate_response(body, expected_length=24)
        assert body["metadata"]["model"] == "stub"
        assert body["metadata"]["deterministic"] is True

    def test_impute_response_validates(self):
        request = load("impute_request.json")
        body = load("impute_response.json")
        schema.validate_response(body, expected_length=len(request["lookback"]))

    def test_forecast_reproduces_golden(self, client):
        resp = client.post("/v1/forecast", json=load("forecast_request.json"))
        assert resp.status_code == 200
        assert resp.json() == load("forecast_response.json")

    def test_impute_reproduces_golden(self, client):
        resp = client.post("/v1/impute", json=load("impute_request.json"))
        assert resp.status_code == 200
        assert resp.json() == load("impute_response.json")

    def test_golden_impute_passes_observed_through(self):
        request = load("impute_request.json")
        response = load("impute_response.json")
        for v, m, out in zip(request["lookback"], request["mask"], response["values"]):
            if m == 1:
                assert out == v


class TestSchemaRejections:
    def test_missing_horizon(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_forecast_request(
                {"grid_id": "g", "resolution": "hourly", "lookback": [1.0]}
            )

    def test_mask_on_forecast(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_forecast_request({
                "grid_id": "g", "resolution": "hourly", "lookback": [1.0],
                "horizon_hours": 4, "mask": [1],
            })

    def test_mask_length_mismatch(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_impute_request({
                "grid_id": "g", "resolution": "hourly",
                "lookback": [1.0, 2.0], "mask": [1],
            })

    def test_all_masked_rejected(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_impute_request({
                "grid_id": "g", "resolution": "hourly",
                "lookback": [1.0], "mask": [0],
            })

    def test_bad_resolution(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_forecast_request({
                "grid_id": "g", "resolution": "daily",
                "lookback": [1.0], "horizon_hours": 1,
            })

    def test_response_requires_values(self):
        with pytest.raises(schema.SchemaError):
            schema.validate_response({"metadata": {}})
