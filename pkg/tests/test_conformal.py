from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcast.backends import BackendDescriptor, ForecastRecord
from gridcast.conformal import (
    CoverageTarget,
    IntervalSet,
    ResidualLedger,
    available_residuals,
    calibrate,
    coverage_probe,
    empirical_quantile,
    horizon_day,
    record_outcome,
    residual_quantiles,
)
from gridcast.errors import GridMismatch, ResolutionMismatch
from gridcast.series import Resolution, day_start

from conftest import make_series

D = date(2021, 6, 1)
BACKEND = BackendDescriptor("seasonal-naive")


def record_for(grid_id, issue_day, horizon):
    return ForecastRecord(grid_id, issue_day, tuple(horizon), BACKEND)


def brute_force_quantiles(residuals, alpha):
    """Independent sort-and-index oracle."""
    ordered = sorted(residuals)
    m = len(ordered)
    lo_idx = math.ceil((m + 1) * (1 - alpha) / 2)
    hi_idx = math.ceil((m + 1) * (1 + alpha) / 2)
    lo_idx = min(max(lo_idx, 1), m)
    hi_idx = min(max(hi_idx, 1), m)
    return ordered[lo_idx - 1], ordered[hi_idx - 1]


class TestHorizonDay:
    def test_block_boundaries(self):
        assert horizon_day(1) == 1
        assert horizon_day(24) == 1
        assert horizon_day(25) == 2
        assert horizon_day(96) == 4

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            horizon_day(0)
        with pytest.raises(ValueError):
            horizon_day(97)


class TestRecordOutcome:
    def test_perfect_forecast_gives_zero_residuals(self):
        ledger = ResidualLedger("g")
        horizon = [300.0] * 96
        actual = make_series([300.0] * 96, grid_id="g", start=day_start(D))
        record_outcome(ledger, record_for("g", D, horizon), actual)
        for h in range(1, 97):
            assert ledger.per_hour[h - 1] == [(D, 0.0)]

    def test_partial_truth_only_prefix_queues(self):
        ledger = ResidualLedger("g")
        actual = make_series([250.0] * 24, grid_id="g", start=day_start(D))
        record_outcome(ledger, record_for("g", D, [200.0] * 96), actual)
        for h in range(1, 25):
            assert ledger.per_hour[h - 1] == [(D, 50.0)]
        for h in range(25, 97):
            assert ledger.per_hour[h - 1] == []

    def test_grid_mismatch(self):
        ledger = ResidualLedger("a")
        actual = make_series([1.0] * 24, grid_id="b", start=day_start(D))
        with pytest.raises(GridMismatch):
            record_outcome(ledger, record_for("a", D, [1.0] * 24), actual)

    def test_resolution_mismatch(self):
        ledger = ResidualLedger("g")
        actual = make_series(
            [1.0] * 288, grid_id="g", start=day_start(D), resolution=Resolution.FIVE_MINUTE
        )
        with pytest.raises(ResolutionMismatch):
            record_outcome(ledger, record_for("g", D, [1.0] * 24), actual)

    def test_upsert_keeps_one_entry_per_day(self):
        ledger = ResidualLedger("g")
        actual = make_series([10.0] * 24, grid_id="g", start=day_start(D))
        rec = record_for("g", D, [7.0] * 24)
        record_outcome(ledger, rec, actual)
        record_outcome(ledger, rec, actual)
        assert ledger.per_hour[0] == [(D, 3.0)]

    def test_missing_truth_hours_skipped(self):
        ledger = ResidualLedger("g")
        actual = make_series([10.0, None, 12.0], grid_id="g", start=day_start(D))
        record_outcome(ledger, record_for("g", D, [10.0] * 24), actual)
        assert ledger.per_hour[0] == [(D, 0.0)]
        assert ledger.per_hour[1] == []
        assert ledger.per_hour[2] == [(D, 2.0)]


class TestAvailableResiduals:
    def test_day_two_block_available_from_d_minus_one(self):
        # hour 30 (k=2): entries issued d-1 and d-2 both qualify
        ledger = ResidualLedger("g")
        ledger.insert(30, D - timedelta(days=1), 1.0)
        ledger.insert(30, D - timedelta(days=2), 2.0)
        assert sorted(available_residuals(ledger, 30, D)) == [1.0, 2.0]

    def test_day_four_block_lags_three_days(self):
        # hour 80 (k=4): of entries issued d-1, d-2, d-3 only d-3 qualifies
        ledger = ResidualLedger("g")
        for back, r in ((1, 1.0), (2, 2.0), (3, 3.0)):
            ledger.insert(80, D - timedelta(days=back), r)
        assert available_residuals(ledger, 80, D) == [3.0]

    def test_empty_ledger(self):
        assert available_residuals(ResidualLedger("g"), 50, D) == []

    def test_window_caps_distinct_issue_days(self):
        ledger = ResidualLedger("g", window_days=5)
        for back in range(1, 20):
            ledger.insert(3, D - timedelta(days=back), float(back))
        out = available_residuals(ledger, 3, D)
        # newest five issue days, ascending by issue day
        assert out == [5.0, 4.0, 3.0, 2.0, 1.0]


class TestCalibrate:
    def ledger_with(self, residuals, hours=range(1, 97), window_days=75):
        ledger = ResidualLedger("g", window_days=window_days)
        for h in hours:
            lag = h // 24 + 2  # comfortably beyond the availability lag
            for i, r in enumerate(residuals):
                ledger.insert(h, D - timedelta(days=lag + i), float(r))
        return ledger

    def test_five_residual_hand_example(self):
        ledger = self.ledger_with([-2, -1, 0, 1, 2], hours=range(1, 25))
        record = record_for("g", D, [100.0] * 24)
        out = calibrate(ledger, record, CoverageTarget(0.95), min_days=5)
        assert out.lower == (98.0,) * 24
        assert out.upper == (102.0,) * 24
        assert out.calibrated == (True,)

    def test_all_zero_residuals_collapse(self):
        ledger = self.ledger_with([0.0] * 12, hours=range(1, 25))
        record = record_for("g", D, [77.0] * 24)
        out = calibrate(ledger, record, CoverageTarget(0.95), min_days=5)
        assert out.lower == (77.0,) * 24
        assert out.upper == (77.0,) * 24

    def test_lower_clamped_at_zero(self):
        ledger = self.ledger_with([-10, -10, -10, -10, -10], hours=range(1, 25))
        record = record_for("g", D, [5.0] * 24)
        out = calibrate(ledger, record, CoverageTarget(0.95), min_days=5)
        assert out.lower == (0.0,) * 24

    def test_cold_start_fallback(self):
        ledger = ResidualLedger("g")
        record = record_for("g", D, [100.0] * 96)
        out = calibrate(ledger, record, CoverageTarget(0.95))
        assert out.calibrated == (False, False, False, False)
        assert out.lower == (50.0,) * 96
        assert out.upper == (150.0,) * 96

    def test_fallback_width_configurable(self):
        ledger = ResidualLedger("g")
        record = record_for("g", D, [100.0] * 24)
        out = calibrate(ledger, record, fallback_width=0.2)
        assert out.lower == (80.0,) * 24
        assert out.upper == pytest.approx((120.0,) * 24)

    def test_mixed_blocks(self):
        # day-1 block calibrated, later blocks cold
        ledger = self.ledger_with(range(-6, 7), hours=range(1, 25))
        record = record_for("g", D, [100.0] * 96)
        out = calibrate(ledger, record, min_days=10)
        assert out.calibrated == (True, False, False, False)


class TestQuantileOracle:
    @given(
        st.lists(st.floats(min_value=-1e4, max_value=1e4), min_size=1, max_size=40),
        st.sampled_from([0.8, 0.9, 0.95]),
    )
    @settings(max_examples=200)
    def test_matches_brute_force(self, residuals, alpha):
        target = CoverageTarget(alpha)
        q_lo, q_hi = residual_quantiles(residuals, target)
        expected = brute_force_quantiles(residuals, alpha)
        assert (q_lo, q_hi) == expected

    @given(st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=30))
    def test_empirical_quantile_is_element(self, residuals):
        q = empirical_quantile(residuals, 0.37)
        assert q in residuals


class TestProperties:
    @given(
        st.lists(st.floats(min_value=-500, max_value=500), min_size=1, max_size=50),
        st.floats(min_value=0.5, max_value=0.99),
        st.floats(min_value=0.05, max_value=0.45),
    )
    @settings(max_examples=100)
    def test_monotone_in_coverage_level(self, residuals, alpha_hi, shrink):
        alpha_lo = alpha_hi - shrink
        if alpha_lo <= 0:
            return
        lo1, hi1 = residual_quantiles(residuals, CoverageTarget(alpha_hi))
        lo2, hi2 = residual_quantiles(residuals, CoverageTarget(alpha_lo))
        assert lo1 <= lo2 and hi1 >= hi2  # higher coverage contains lower

    @given(
        st.lists(st.integers(min_value=-1000, max_value=1000), min_size=1, max_size=40),
        st.integers(min_value=-500, max_value=500),
        st.sampled_from([0.8, 0.9, 0.95]),
    )
    @settings(max_examples=100)
    def test_translation_equivariance(self, residuals, shift, alpha):
        target = CoverageTarget(alpha)
        base = residual_quantiles([float(r) for r in residuals], target)
        shifted = residual_quantiles([float(r + shift) for r in residuals], target)
        assert shifted == (base[0] + shift, base[1] + shift)

    def test_no_leakage_poison_ignored(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            clean = ResidualLedger("g", window_days=20)
            n_days = int(rng.integers(12, 40))
            for h in range(1, 97):
                k = (h + 23) // 24
                for back in range(k - 1, k - 1 + n_days):
                    clean.insert(h, D - timedelta(days=back), float(rng.normal(0, 5)))
            poisoned = clean.copy()
            for h in range(1, 97):
                k = (h + 23) // 24
                cutoff_excl = k - 2  # first non-qualifying day: issued after d - lag(k)
                for back in range(cutoff_excl, cutoff_excl - 4, -1):
                    poisoned.insert(h, D - timedelta(days=back), 1e6)
            record = record_for("g", D, [200.0] * 96)
            a = calibrate(clean, record, CoverageTarget(0.95))
            b = calibrate(poisoned, record, CoverageTarget(0.95))
            assert a == b


class TestCoverageProbe:
    def test_overall_and_per_day(self):
        iset = IntervalSet(
            lower=(90.0,) * 96, upper=(110.0,) * 96, calibrated=(True,) * 4
        )
        inside = make_series([100.0] * 96, grid_id="g", start=day_start(D))
        outside_day4 = make_series(
            [100.0] * 72 + [500.0] * 24, grid_id="g", start=day_start(D)
        )
        overall, by_day = coverage_probe([iset, iset], [inside, outside_day4])
        assert overall == pytest.approx(100 * (96 + 72) / 192)
        assert by_day[0] == by_day[1] == by_day[2] == 100.0
        assert by_day[3] == pytest.approx(50.0)

    def test_length_mismatch(self):
        iset = IntervalSet((0.0,), (1.0,), (True,))
        with pytest.raises(Exception):
            coverage_probe([iset], [])

    def test_missing_truth_skipped(self):
        iset = IntervalSet(
            lower=(90.0,) * 24, upper=(110.0,) * 24, calibrated=(True,)
        )
        actual = make_series(
            [100.0] * 12 + [None] * 12, grid_id="g", start=day_start(D)
        )
        overall, by_day = coverage_probe([iset], [actual])
        assert overall == 100.0
        assert by_day[1] is None


def test_statistical_coverage_concentrates_near_alpha():
    # i.i.d. residuals in the ledger, fresh draws from the same distribution:
    # empirical coverage over many trials sits near the target level
    rng = np.random.default_rng(123)
    hits = 0
    trials = 4000
    for _ in range(trials):
        m = 40
        ledger = ResidualLedger("g", window_days=m)
        for i in range(m):
            ledger.insert(1, D - timedelta(days=i + 1), float(rng.normal(0, 25)))
        out = calibrate(
            ledger, record_for("g", D, [500.0]), CoverageTarget(0.9), min_days=5
        )
        y = 500.0 + rng.normal(0, 25)
        hits += out.lower[0] <= y <= out.upper[0]
    achieved = hits / trials
    # order statistics at m=40, p=.05/.95: expected coverage (39-2)/41 ~ 0.902
    assert 0.87 <= achieved <= 0.93


def test_known_before_view_filters_by_truth_day():
    ledger = ResidualLedger("g")
    for h in (1, 30, 80):
        k = (h + 23) // 24
        for back in range(-2, 6):
            ledger.insert(h, D - timedelta(days=back), float(back))
    view = ledger.known_before(D)
    # entry (j, hour h) is knowable iff its truth day j + (k-1) is <= D - 1
    for h in (1, 30, 80):
        k = (h + 23) // 24
        days = [d for d, _ in view.per_hour[h - 1]]
        assert days and max(days) == D - timedelta(days=k)
        assert all(d + timedelta(days=k - 1) <= D - timedelta(days=1) for d in days)


def test_ledger_retention_trims_old_days():
    ledger = ResidualLedger("g", window_days=10)
    for back in range(100):
        ledger.insert(1, D - timedelta(days=back), float(back))
    assert len(ledger.per_hour[0]) == 18  # window + slack
    newest = [d for d, _ in ledger.per_hour[0]][-1]
    assert newest == D
