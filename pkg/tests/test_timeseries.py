"""Tests for the power time-series container."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from gridshed.timeseries import AlignmentError, PowerSeries, Resolution

T0 = datetime(2020, 7, 15)


def series(values, step=15, start=T0):
    return PowerSeries(start, Resolution(step), np.asarray(values, dtype=float))


class TestResolution:
    def test_valid_steps(self):
        for step in (1, 5, 15, 30, 60, 120, 1440):
            assert Resolution(step).step_minutes == step

    @pytest.mark.parametrize("step", [0, -5, 7, 13, 1441])
    def test_invalid_steps(self, step):
        with pytest.raises(ValueError):
            Resolution(step)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            Resolution(15.0)
        with pytest.raises(ValueError):
            Resolution(True)

    def test_hours(self):
        assert Resolution(30).hours == 0.5
        assert Resolution(1).hours == pytest.approx(1 / 60)

    def test_divides(self):
        assert Resolution(15).divides(Resolution(60))
        assert not Resolution(30).divides(Resolution(15))


class TestConstruction:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            series([])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            series([1.0, np.nan])
        with pytest.raises(ValueError):
            series([np.inf])

    def test_rejects_sub_minute_start(self):
        with pytest.raises(AlignmentError):
            series([1.0], start=datetime(2020, 7, 15, 0, 0, 30))

    def test_values_immutable(self):
        s = series([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_end(self):
        s = series([1.0, 2.0], step=30)
        assert s.end == T0 + timedelta(minutes=60)


class TestAverageTo:
    def test_mean_of_two(self):
        s = series([2.0, 4.0], step=30)
        out = s.average_to(Resolution(60))
        assert out.resolution == Resolution(60)
        assert out.values.tolist() == [3.0]

    def test_identity_resolution(self):
        s = series([5.0], step=15)
        assert s.average_to(Resolution(15)) == s

    def test_hand_computed_windows(self):
        s = series([1.0, -1.0, 3.0, 5.0], step=15)
        assert s.average_to(Resolution(30)).values.tolist() == [0.0, 4.0]

    def test_non_divisible_resolution(self):
        with pytest.raises(AlignmentError):
            series([1.0, 2.0, 3.0], step=15).average_to(Resolution(40))

    def test_partial_trailing_window(self):
        with pytest.raises(AlignmentError):
            series([1.0, 2.0, 3.0], step=15).average_to(Resolution(30))

    def test_energy_conserved(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(1, 20)) * 4
            s = series(rng.normal(0, 3, n), step=15)
            out = s.average_to(Resolution(60))
            assert np.sum(s.values) * 15 == pytest.approx(np.sum(out.values) * 60, abs=1e-9)

    def test_composition(self):
        rng = np.random.default_rng(2)
        s = series(rng.normal(0, 3, 96), step=15)
        via_30 = s.average_to(Resolution(30)).average_to(Resolution(60))
        direct = s.average_to(Resolution(60))
        assert np.allclose(via_30.values, direct.values, rtol=0, atol=1e-12)
        assert via_30.start == direct.start


class TestSlice:
    def test_day_from_long_series(self):
        s = series(np.zeros(150 * 1440), step=1)
        out = s.slice(T0 + timedelta(days=3), 1440)
        assert len(out) == 1440
        assert out.start == T0 + timedelta(days=3)

    def test_full_length_identity(self):
        s = series([1.0, 2.0, 3.0, 4.0], step=15)
        assert s.slice(T0, 4) == s

    def test_misaligned_start(self):
        s = series([1.0, 2.0, 3.0, 4.0], step=15)
        with pytest.raises(AlignmentError):
            s.slice(T0 + timedelta(minutes=1), 2)

    def test_out_of_range(self):
        s = series([1.0, 2.0], step=15)
        with pytest.raises(AlignmentError):
            s.slice(T0, 3)
        with pytest.raises(AlignmentError):
            s.slice(T0 - timedelta(minutes=15), 1)

    def test_index_of_sub_minute(self):
        s = series([1.0, 2.0], step=15)
        with pytest.raises(AlignmentError):
            s.index_of(T0 + timedelta(seconds=30))


def test_equality_semantics():
    a = series([1.0, 2.0])
    assert a == series([1.0, 2.0])
    assert a != series([1.0, 2.1])
    assert a != series([1.0, 2.0], step=30)
    assert a != series([1.0, 2.0], start=T0 + timedelta(minutes=15))
