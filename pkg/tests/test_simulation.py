"""Tests for the receding-horizon simulation engine."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from helpers import verify_physics
from gridshed.battery import default_spec
from gridshed.errors import DataError, SolverError
from gridshed.forecast import ForecastRequest, ideal_forecast
from gridshed.ingest import generate_synthetic
from gridshed.simulation import (
    Controller,
    EvaluationMode,
    ForecastSource,
    SimulationConfig,
    run_experiment,
    run_simulation,
)
from gridshed.tariff import Tariff, default_tariff
from gridshed.timeseries import PowerSeries, Resolution

T0 = datetime(2020, 7, 15)


def make_cfg(
    controller=Controller.RBC,
    source=ForecastSource.IDEAL,
    delta_s=60,
    mode=EvaluationMode.FINE_RESOLUTION,
    **kwargs,
):
    delta_gt = 1 if mode is EvaluationMode.FINE_RESOLUTION else delta_s
    defaults = dict(spec=default_spec(), tariff=default_tariff())
    defaults.update(kwargs)
    return SimulationConfig(
        controller=controller,
        forecast_source=source,
        delta_s=Resolution(delta_s),
        delta_gt=Resolution(delta_gt),
        mode=mode,
        **defaults,
    )


@pytest.fixture(scope="module")
def building():
    return generate_synthetic(17, days=3, panel_count=24)


class TestConfigValidation:
    def test_fully_averaged_requires_matching_gt(self):
        with pytest.raises(ValueError, match="delta_gt"):
            SimulationConfig(
                controller=Controller.RBC,
                forecast_source=ForecastSource.IDEAL,
                delta_s=Resolution(60),
                delta_gt=Resolution(30),
                mode=EvaluationMode.FULLY_AVERAGED,
                spec=default_spec(),
                tariff=default_tariff(),
            )

    def test_fine_requires_one_minute(self):
        with pytest.raises(ValueError, match="1 min"):
            SimulationConfig(
                controller=Controller.RBC,
                forecast_source=ForecastSource.IDEAL,
                delta_s=Resolution(60),
                delta_gt=Resolution(5),
                mode=EvaluationMode.FINE_RESOLUTION,
                spec=default_spec(),
                tariff=default_tariff(),
            )

    def test_delta_s_restricted(self):
        with pytest.raises(ValueError, match="delta_s"):
            make_cfg(delta_s=5)

    def test_initial_soe_bounds(self):
        with pytest.raises(ValueError, match="initial_soe"):
            make_cfg(initial_soe=-0.5)

    def test_file_source_needs_path(self):
        with pytest.raises(ValueError, match="forecast_file"):
            make_cfg(controller=Controller.MPC_CONST_GRID, source=ForecastSource.FILE)

    def test_model_labels(self):
        assert make_cfg().model_label() == "rbc"
        assert (
            make_cfg(controller=Controller.MPC_CONST_GRID).model_label()
            == "mpc_ideal_const_grid"
        )
        assert (
            make_cfg(
                controller=Controller.MPC_CONST_BAT, source=ForecastSource.PERSISTENCE
            ).model_label()
            == "mpc_persistence_const_bat"
        )


class TestRbcRuns:
    def test_zero_net_load_costs_nothing(self):
        net = PowerSeries(T0, Resolution(1), np.zeros(2 * 1440))
        result = run_simulation(make_cfg(), net, sim_days=1)
        assert np.all(result.p_b.values == 0.0)
        assert np.all(result.p_g.values == 0.0)
        assert result.report.total_eur == 0.0
        verify_physics(result)

    def test_delta_s_invariance_in_fine_mode(self, building):
        reports = [
            run_simulation(make_cfg(delta_s=ds), building.net_load, sim_days=2).report
            for ds in (60, 30, 15)
        ]
        assert reports[0] == reports[1] == reports[2]

    def test_physics(self, building):
        for mode in EvaluationMode:
            result = run_simulation(make_cfg(delta_s=30, mode=mode), building.net_load, sim_days=2)
            verify_physics(result)


class TestMpcRuns:
    def test_fully_averaged_fast_rules_agree(self, building):
        results = {}
        for ctl in (Controller.MPC_CONST_GRID, Controller.MPC_CONST_BAT):
            cfg = make_cfg(controller=ctl, delta_s=60, mode=EvaluationMode.FULLY_AVERAGED)
            results[ctl] = run_simulation(cfg, building.net_load, sim_days=2)
        a, b = results.values()
        assert np.max(np.abs(a.p_b.values - b.p_b.values)) <= 1e-9
        assert np.max(np.abs(a.p_g.values - b.p_g.values)) <= 1e-9

    def test_fine_mode_physics_and_plans(self, building):
        cfg = make_cfg(controller=Controller.MPC_CONST_GRID, delta_s=30)
        result = run_simulation(cfg, building.net_load, sim_days=1, collect_plans=True)
        verify_physics(result)
        assert result.max_split_product <= 1e-6
        assert len(result.plans) == 48  # one per scheduling step
        assert result.truncated_plan_origins == ()
        # measured state feeds back into each plan
        steps_per_plan = 30
        for i, plan in enumerate(result.plans):
            assert plan.e[0] == pytest.approx(result.soe[i * steps_per_plan], abs=1e-12)

    def test_persistence_source(self, building):
        cfg = make_cfg(
            controller=Controller.MPC_CONST_GRID, source=ForecastSource.PERSISTENCE
        )
        result = run_simulation(cfg, building.net_load)
        # lookback day reserved, no lookahead needed: two days remain
        assert len(result.p_b) == 2 * 1440
        assert result.p_b.start == building.net_load.start + timedelta(days=1)
        verify_physics(result)

    def test_file_source_reproduces_ideal(self, building, tmp_path):
        # dump exact interval averages, then feed them back through the file path
        lines = ["origin_timestamp,step_index,p_hat_kw"]
        for hour in range(24):
            origin = T0 + timedelta(hours=hour)
            fc = ideal_forecast(building.net_load, ForecastRequest(origin, Resolution(60)))
            for k, v in enumerate(fc.values):
                lines.append(f"{origin.isoformat()},{k},{float(v)!r}")
        path = tmp_path / "fc.csv"
        path.write_text("\n".join(lines) + "\n")

        via_file = run_simulation(
            make_cfg(
                controller=Controller.MPC_CONST_GRID,
                source=ForecastSource.FILE,
                forecast_file=str(path),
            ),
            building.net_load,
            sim_days=1,
        )
        via_ideal = run_simulation(
            make_cfg(controller=Controller.MPC_CONST_GRID), building.net_load, sim_days=1
        )
        assert via_file.report == via_ideal.report

    def test_horizon_truncation_near_data_end(self, building):
        cfg = make_cfg(controller=Controller.MPC_CONST_GRID)
        result = run_simulation(cfg, building.net_load, sim_days=3)  # no lookahead left
        assert len(result.truncated_plan_origins) == 23  # all day-3 plans after 00:00
        verify_physics(result)

    def test_unbounded_tariff_raises_solver_error(self, building):
        arbitrage = Tariff(((0, 0.1),), ((0, 0.5),))
        cfg = make_cfg(controller=Controller.MPC_CONST_GRID, tariff=arbitrage)
        with pytest.raises(SolverError):
            run_simulation(cfg, building.net_load, sim_days=1)


class TestSpan:
    def test_requires_minute_data(self):
        coarse = PowerSeries(T0, Resolution(60), np.zeros(96))
        with pytest.raises(DataError):
            run_simulation(make_cfg(), coarse)

    def test_too_many_days_rejected(self, building):
        with pytest.raises(DataError, match="covers only"):
            run_simulation(make_cfg(), building.net_load, sim_days=4)

    def test_lookback_violation_rejected(self, building):
        cfg = make_cfg(controller=Controller.MPC_CONST_GRID, source=ForecastSource.PERSISTENCE)
        with pytest.raises(DataError, match="lookback"):
            run_simulation(cfg, building.net_load, sim_start=building.net_load.start, sim_days=1)


class TestExperiment:
    def test_grid_shape_and_determinism(self, building):
        matrix = [
            make_cfg(),
            make_cfg(controller=Controller.MPC_CONST_GRID),
            make_cfg(controller=Controller.MPC_CONST_GRID),  # duplicate on purpose
        ]
        buildings = [building, generate_synthetic(18, days=3, panel_count=20)]
        report = run_experiment(matrix, buildings, sim_days=1, max_workers=1)
        assert len(report.cells) == 6
        assert [c.building_id for c in report.cells[:3]] == [building.building_id] * 3
        # duplicate configs produce identical cells
        assert report.cells[1].result.report == report.cells[2].result.report
        again = run_experiment(matrix, buildings, sim_days=1, max_workers=1)
        for a, b in zip(report.cells, again.cells):
            assert a.result.report == b.result.report

    def test_parallel_matches_serial(self, building):
        matrix = [make_cfg(delta_s=ds) for ds in (60, 30)]
        serial = run_experiment(matrix, [building], sim_days=1, max_workers=1)
        parallel = run_experiment(matrix, [building], sim_days=1, max_workers=2)
        for a, b in zip(serial.cells, parallel.cells):
            assert a.result.report == b.result.report

    def test_failures_isolated(self, building):
        bad_tariff = Tariff(((0, 0.1),), ((0, 0.5),))
        matrix = [
            make_cfg(),
            make_cfg(controller=Controller.MPC_CONST_GRID, tariff=bad_tariff),
        ]
        report = run_experiment(matrix, [building], sim_days=1, max_workers=1)
        assert report.cells[0].ok
        assert not report.cells[1].ok
        assert "SolverError" in report.cells[1].error
        assert len(report.failures) == 1

    def test_empty_inputs(self, building):
        with pytest.raises(ValueError):
            run_experiment([], [building])
        with pytest.raises(ValueError):
            run_experiment([make_cfg()], [])
