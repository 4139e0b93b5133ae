from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridcast.errors import OutOfBounds, TooShort, ZeroGeneration
from gridcast.series import (
    CarbonSeries,
    Resolution,
    SourceMix,
    Window,
    align_to_day_boundary,
    apply_mask,
    compute_carbon_intensity,
    missing_mask,
    slice_series,
)

from conftest import make_series, utc


class TestComputeCarbonIntensity:
    def test_single_zero_emission_source(self):
        assert compute_carbon_intensity(SourceMix([("solar", 100, 0)])) == 0

    def test_single_source_identity(self):
        assert compute_carbon_intensity(SourceMix([("gas", 100, 500)])) == 500

    def test_equal_weight_midpoint(self):
        mix = SourceMix([("solar", 50, 0), ("coal", 50, 820)])
        assert compute_carbon_intensity(mix) == 410

    def test_zero_generation_raises(self):
        with pytest.raises(ZeroGeneration):
            compute_carbon_intensity(SourceMix([("solar", 0, 0), ("wind", 0, 11)]))
        with pytest.raises(ZeroGeneration):
            compute_carbon_intensity(SourceMix([]))

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            SourceMix([("gas", -1, 500)])
        with pytest.raises(ValueError):
            SourceMix([("gas", 1, -500)])

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1e6),
                st.floats(min_value=0, max_value=2000),
            ),
            min_size=1,
            max_size=8,
        ).filter(lambda entries: sum(g for g, _ in entries) > 0)
    )
    def test_weighted_mean_bounds(self, entries):
        mix = SourceMix([(f"s{i}", g, f) for i, (g, f) in enumerate(entries)])
        ci = compute_carbon_intensity(mix)
        factors = [f for _, f in entries]
        assert min(factors) - 1e-9 <= ci <= max(factors) + 1e-9

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0.001, max_value=1e5),
                st.floats(min_value=0, max_value=2000),
            ),
            min_size=1,
            max_size=6,
        ),
        st.floats(min_value=0.01, max_value=100),
    )
    def test_generation_scale_invariance(self, entries, scale):
        base = SourceMix([(f"s{i}", g, f) for i, (g, f) in enumerate(entries)])
        scaled = SourceMix([(f"s{i}", g * scale, f) for i, (g, f) in enumerate(entries)])
        assert compute_carbon_intensity(base) == pytest.approx(
            compute_carbon_intensity(scaled), rel=1e-12
        )


class TestCarbonSeries:
    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            make_series([100, -1, 200])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            make_series([100, math.inf])

    def test_nan_means_missing(self):
        s = make_series([100, math.nan, 200])
        assert s.values == (100, None, 200)
        assert s.present_count() == 2

    def test_requires_utc(self):
        with pytest.raises(ValueError):
            CarbonSeries("g", utc(2021, 1, 1).replace(tzinfo=None), Resolution.HOURLY, [1])

    def test_requires_aligned_start(self):
        with pytest.raises(ValueError):
            make_series([1, 2], start=utc(2021, 1, 1, 0, 30))

    def test_five_minute_alignment(self):
        s = make_series([1, 2], start=utc(2021, 1, 1, 0, 55), resolution=Resolution.FIVE_MINUTE)
        assert s.timestamp(1) == utc(2021, 1, 1, 1, 0)

    def test_immutable_array(self):
        s = make_series([1, 2, 3])
        with pytest.raises(ValueError):
            s.to_array()[0] = 9


class TestSlice:
    def test_identity_slice(self):
        s = make_series(list(range(96)))
        assert slice_series(s, Window(0, 96)) == s

    def test_offset_shifts_start(self):
        s = make_series(list(range(48)))
        out = slice_series(s, Window(24, 24))
        assert out.start == utc(2021, 1, 2)
        assert out.values == tuple(float(v) for v in range(24, 48))

    def test_out_of_bounds(self):
        s = make_series(list(range(48)))
        with pytest.raises(OutOfBounds):
            slice_series(s, Window(40, 24))

    def test_missingness_copied(self):
        s = make_series([1, None, 3, None])
        out = slice_series(s, Window(1, 3))
        assert out.values == (None, 3, None)

    @given(st.data())
    def test_slice_composition(self, data):
        n = data.draw(st.integers(min_value=2, max_value=60))
        s = make_series(list(range(n)))
        a = data.draw(st.integers(min_value=0, max_value=n - 1))
        b = data.draw(st.integers(min_value=1, max_value=n - a))
        c = data.draw(st.integers(min_value=0, max_value=b - 1))
        d = data.draw(st.integers(min_value=1, max_value=b - c))
        two_step = slice_series(slice_series(s, Window(a, b)), Window(c, d))
        one_step = slice_series(s, Window(a + c, d))
        assert two_step == one_step


class TestMissingMask:
    def test_fully_observed(self):
        assert missing_mask(make_series([1.0] * 10)).mask == (1,) * 10

    def test_absent_positions(self):
        s = make_series([1, 1, None, None, 1])
        assert missing_mask(s).mask == (1, 1, 0, 0, 1)

    def test_empty_series(self):
        assert missing_mask(make_series([])).mask == ()

    @given(st.lists(st.one_of(st.none(), st.floats(min_value=0, max_value=1e4)), max_size=50))
    def test_mask_sum_equals_present_count(self, values):
        s = make_series(values)
        assert sum(missing_mask(s).mask) == s.present_count()

    def test_apply_mask_hides(self):
        s = make_series([1, 2, 3, 4])
        masked = apply_mask(s, [1, 0, 0, 1])
        assert masked.series.values == (1, None, None, 4)
        assert masked.masked_indices() == [1, 2]


class TestAlignToDayBoundary:
    def test_trims_partial_days(self):
        s = make_series(list(range(60)), start=utc(2021, 1, 1, 20))
        out = align_to_day_boundary(s)
        assert out.start == utc(2021, 1, 2)
        assert len(out) == 48

    def test_already_aligned(self):
        s = make_series(list(range(48)))
        out = align_to_day_boundary(s)
        assert out == s

    def test_too_short(self):
        # 40 hours starting 01:00: 23 trimmed leading, 17 usable < 24
        with pytest.raises(TooShort):
            align_to_day_boundary(make_series(list(range(40)), start=utc(2021, 1, 1, 1)))

    def test_requires_hourly(self):
        s = make_series([1] * 300, resolution=Resolution.FIVE_MINUTE)
        with pytest.raises(ValueError):
            align_to_day_boundary(s)


def test_index_of_round_trip():
    s = make_series(list(range(30)))
    for i in (0, 7, 29):
        assert s.index_of(s.timestamp(i)) == i
    with pytest.raises(OutOfBounds):
        s.index_of(utc(2021, 2, 1))


def test_equality_respects_missing():
    a = make_series([1, None, 3])
    b = make_series([1, None, 3])
    c = make_series([1, 2, 3])
    assert a == b
    assert a != c
    assert not np.array_equal(a.to_array(), c.to_array(), equal_nan=True)
