"""Tests for the battery model."""

from datetime import datetime

import numpy as np
import pytest

from gridshed.battery import (
    BatterySpec,
    BatteryState,
    default_spec,
    degradation_cost,
    degradation_price,
    feasible_power_bounds,
    step_soe,
)
from gridshed.timeseries import PowerSeries, Resolution

T0 = datetime(2020, 7, 15)


class TestSpec:
    def test_default_values(self):
        spec = default_spec()
        assert spec.e_min == 0.0
        assert spec.e_max == 13.8
        assert spec.p_min == -5.0
        assert spec.p_max == 5.0
        assert spec.eta_ch == spec.eta_dis == 0.98
        assert spec.c_deg == 0.084

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            BatterySpec(5.0, 5.0, -5.0, 5.0, 0.98, 0.98, 0.084)
        with pytest.raises(ValueError):
            BatterySpec(0.0, 13.8, 1.0, 5.0, 0.98, 0.98, 0.084)
        with pytest.raises(ValueError):
            BatterySpec(0.0, 13.8, -5.0, 5.0, 1.2, 0.98, 0.084)
        with pytest.raises(ValueError):
            BatterySpec(0.0, 13.8, -5.0, 5.0, 0.98, 0.98, -0.01)


class TestDegradationPrice:
    def test_warranty_figures(self):
        assert degradation_price(4000.0, 400.0, 42690.0) == pytest.approx(0.084, abs=5e-4)

    def test_zero_numerator(self):
        assert degradation_price(1234.0, 1234.0, 10000.0) == 0.0

    def test_direct_division(self):
        assert degradation_price(1000.0, 0.0, 500.0) == 2.0

    def test_errors(self):
        with pytest.raises(ValueError):
            degradation_price(1000.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            degradation_price(1000.0, 2000.0, 500.0)


class TestStepSoe:
    def test_charging_gains_scaled_energy(self):
        spec = default_spec()
        out = step_soe(spec, BatteryState(5.0), -2.0, 0.5)
        assert out.e == pytest.approx(5.98)

    def test_zero_power_identity(self):
        spec = default_spec()
        assert step_soe(spec, BatteryState(5.0), 0.0, 2.0).e == 5.0

    def test_discharging_drains_extra(self):
        spec = default_spec()
        out = step_soe(spec, BatteryState(5.0), 2.0, 1.0)
        assert out.e == pytest.approx(5.0 - 2.0 / 0.98)

    def test_requires_positive_dt(self):
        with pytest.raises(ValueError):
            step_soe(default_spec(), BatteryState(5.0), 1.0, 0.0)


class TestFeasiblePowerBounds:
    def test_full_battery(self):
        spec = default_spec()
        lo, hi = feasible_power_bounds(spec, BatteryState(13.8), 1.0)
        assert lo == 0.0
        assert hi == 5.0

    def test_empty_battery(self):
        spec = default_spec()
        lo, hi = feasible_power_bounds(spec, BatteryState(0.0), 1.0)
        assert lo == -5.0
        assert hi == 0.0

    def test_energy_limited_discharge(self):
        spec = default_spec()
        _, hi = feasible_power_bounds(spec, BatteryState(1.0), 1.0)
        assert hi == pytest.approx(0.98)

    def test_bounds_keep_soe_feasible(self):
        spec = default_spec()
        rng = np.random.default_rng(7)
        for _ in range(300):
            state = BatteryState(rng.uniform(spec.e_min, spec.e_max))
            dt = float(rng.uniform(1 / 60, 1.0))
            lo, hi = feasible_power_bounds(spec, state, dt)
            assert lo <= 0.0 <= hi
            p = float(rng.uniform(lo, hi))
            out = step_soe(spec, state, p, dt)
            assert spec.e_min - 1e-9 <= out.e <= spec.e_max + 1e-9

    def test_interval_never_inverts_on_drifted_state(self):
        spec = default_spec()
        lo, hi = feasible_power_bounds(spec, BatteryState(13.8 + 5e-10), 1.0)
        assert lo <= 0.0 <= hi


def test_round_trip_loses_efficiency_product():
    spec = default_spec()
    state = BatteryState(5.0)
    terminal_in = 2.0  # kWh pushed in at the terminals
    charged = step_soe(spec, state, -2.0, 1.0)
    stored = charged.e - state.e
    assert stored == pytest.approx(terminal_in * spec.eta_ch)
    # discharge until SoE returns to the start
    terminal_out = stored * spec.eta_dis
    discharged = step_soe(spec, charged, terminal_out, 1.0)
    assert discharged.e == pytest.approx(state.e)
    assert terminal_out == pytest.approx(terminal_in * spec.eta_ch * spec.eta_dis)


class TestDegradationCost:
    def test_all_charging_costs_nothing(self):
        spec = default_spec()
        s = PowerSeries(T0, Resolution(60), [-1.0, -2.0, -0.5])
        assert degradation_cost(s, spec) == (0.0, 0.0)

    def test_single_discharge_step(self):
        spec = default_spec()
        s = PowerSeries(T0, Resolution(60), [9.8])
        discharged, cost = degradation_cost(s, spec)
        assert discharged == pytest.approx(9.8)
        assert cost == pytest.approx(0.84)

    def test_mixed_half_hour_steps(self):
        spec = default_spec()
        s = PowerSeries(T0, Resolution(30), [2.0, -2.0])
        discharged, cost = degradation_cost(s, spec)
        assert discharged == pytest.approx(1.0)
        assert cost == pytest.approx(0.084 / 0.98)

    def test_additive_over_concatenation(self):
        spec = default_spec()
        rng = np.random.default_rng(11)
        a = rng.normal(0, 3, 8)
        b = rng.normal(0, 3, 8)
        whole = PowerSeries(T0, Resolution(15), np.concatenate([a, b]))
        part_a = PowerSeries(T0, Resolution(15), a)
        part_b = PowerSeries(T0, Resolution(15), b)
        d_w, c_w = degradation_cost(whole, spec)
        d_a, c_a = degradation_cost(part_a, spec)
        d_b, c_b = degradation_cost(part_b, spec)
        assert d_w == pytest.approx(d_a + d_b)
        assert c_w == pytest.approx(c_a + c_b)

    def test_invariant_under_refinement(self):
        spec = default_spec()
        coarse = PowerSeries(T0, Resolution(60), [3.0, -1.0])
        fine = PowerSeries(T0, Resolution(15), np.repeat(coarse.values, 4))
        assert degradation_cost(coarse, spec) == pytest.approx(degradation_cost(fine, spec))
