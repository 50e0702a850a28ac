"""Receding-horizon simulation engine.

Runs a control policy against minute-level net-load data and settles the
realized grid exchange. Two evaluation modes: the fully averaged mode drives
the controller with data averaged to the scheduling step (ground truth equals
the plan resolution), the fine-resolution mode keeps 1-min ground truth so
the fast execution layer has to deal with intra-interval fluctuations.
Settlement always nets at the ground-truth resolution.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum

import numpy as np

from gridshed.battery import BatterySpec, BatteryState, degradation_cost
from gridshed.controllers import const_bat_step, const_grid_step, rbc_step
from gridshed.errors import DataError, SolverError
from gridshed.forecast import (
    ForecastRequest,
    file_forecast,
    ideal_forecast,
    load_forecast_file,
    persistence_forecast,
)
from gridshed.ingest import BuildingDataset
from gridshed.metrics import CostReport
from gridshed.mpc import DispatchPlan, check_complementarity, solve_schedule
from gridshed.tariff import Tariff, settle
from gridshed.timeseries import MINUTES_PER_DAY, PowerSeries, Resolution

ALLOWED_DELTA_S_MINUTES = (60, 30, 15)
DEFAULT_MAX_SIM_DAYS = 153  # roughly five months
FORECAST_WINDOW_HOURS = 24
THREADS_ENV_VAR = "GRIDSHED_THREADS"


class Controller(Enum):
    RBC = "rbc"
    MPC_CONST_GRID = "mpc_const_grid"
    MPC_CONST_BAT = "mpc_const_bat"


class ForecastSource(Enum):
    IDEAL = "ideal"
    PERSISTENCE = "persistence"
    FILE = "file"


class EvaluationMode(Enum):
    FULLY_AVERAGED = "fully_averaged"
    FINE_RESOLUTION = "fine_resolution"


@dataclass(frozen=True)
class SimulationConfig:
    controller: Controller
    forecast_source: ForecastSource
    delta_s: Resolution  # scheduling step
    delta_gt: Resolution  # ground-truth, control and netting resolution
    mode: EvaluationMode
    spec: BatterySpec
    tariff: Tariff
    horizon_hours: int = 24
    initial_soe: float = 0.0
    seed: int = 0
    forecast_file: str | None = None

    def __post_init__(self) -> None:
        if self.delta_s.step_minutes not in ALLOWED_DELTA_S_MINUTES:
            raise ValueError(
                f"delta_s must be one of {ALLOWED_DELTA_S_MINUTES} minutes, "
                f"got {self.delta_s.step_minutes}"
            )
        if self.mode is EvaluationMode.FULLY_AVERAGED and self.delta_gt != self.delta_s:
            raise ValueError(
                "fully averaged mode requires delta_gt == delta_s, got "
                f"{self.delta_gt.step_minutes} != {self.delta_s.step_minutes}"
            )
        if self.mode is EvaluationMode.FINE_RESOLUTION and self.delta_gt.step_minutes != 1:
            raise ValueError(
                f"fine-resolution mode requires delta_gt = 1 min, got {self.delta_gt.step_minutes}"
            )
        if self.horizon_hours <= 0 or (self.horizon_hours * 60) % self.delta_s.step_minutes != 0:
            raise ValueError(
                f"horizon_hours {self.horizon_hours} is not a whole number of delta_s steps"
            )
        if not self.spec.e_min <= self.initial_soe <= self.spec.e_max:
            raise ValueError(
                f"initial_soe {self.initial_soe} outside "
                f"[{self.spec.e_min}, {self.spec.e_max}] kWh"
            )
        if self.uses_forecast and self.forecast_source is ForecastSource.FILE and not self.forecast_file:
            raise ValueError("forecast_source 'file' requires forecast_file")

    @property
    def uses_forecast(self) -> bool:
        return self.controller is not Controller.RBC

    @property
    def needs_lookback(self) -> bool:
        return self.uses_forecast and self.forecast_source is ForecastSource.PERSISTENCE

    def model_label(self) -> str:
        if self.controller is Controller.RBC:
            return "rbc"
        layer = "const_grid" if self.controller is Controller.MPC_CONST_GRID else "const_bat"
        return f"mpc_{self.forecast_source.value}_{layer}"


@dataclass(frozen=True)
class SimulationResult:
    config: SimulationConfig
    p_b: PowerSeries  # realized battery power at delta_gt
    p_g: PowerSeries  # realized grid exchange at delta_gt
    net_load: PowerSeries  # the ground truth the run was driven against
    soe: np.ndarray  # kWh, length = steps + 1
    report: CostReport
    max_split_product: float  # worst simultaneous-flow residual over all plans
    truncated_plan_origins: tuple[datetime, ...]
    plans: tuple[DispatchPlan, ...] | None = None


def _default_span(
    cfg: SimulationConfig, net_load: PowerSeries, sim_start: datetime | None, sim_days: int | None
) -> tuple[datetime, int]:
    lookback = timedelta(hours=FORECAST_WINDOW_HOURS) if cfg.needs_lookback else timedelta(0)
    start = sim_start if sim_start is not None else net_load.start + lookback
    if start < net_load.start + lookback:
        raise DataError(
            f"simulation start {start} leaves no room for the 24 h forecast lookback"
        )
    # Spans run up to the data end; plan horizons near the end are truncated
    # to the remaining data. Planning past the evaluated span would let the
    # scheduler stockpile energy whose value the settlement never sees.
    hard_days = int((net_load.end - start).total_seconds() // 86400)
    if sim_days is not None:
        if sim_days > hard_days:
            raise DataError(
                f"requested {sim_days} simulation days but data covers only {hard_days}"
            )
        return start, sim_days
    days = min(DEFAULT_MAX_SIM_DAYS, hard_days)
    if days < 1:
        raise DataError(
            f"net load covers {net_load.start}..{net_load.end}: no whole simulation day "
            f"left after the forecast lookback (start {start})"
        )
    return start, days


def _make_forecaster(cfg: SimulationConfig, net_load: PowerSeries, driver_extended: PowerSeries):
    if cfg.forecast_source is ForecastSource.IDEAL:
        base = driver_extended if cfg.mode is EvaluationMode.FULLY_AVERAGED else net_load
        return lambda req: ideal_forecast(base, req)
    if cfg.forecast_source is ForecastSource.PERSISTENCE:
        return lambda req: persistence_forecast(net_load, req)
    table = load_forecast_file(cfg.forecast_file)
    return lambda req: file_forecast(table, req)


def run_simulation(
    cfg: SimulationConfig,
    net_load: PowerSeries,
    *,
    sim_start: datetime | None = None,
    sim_days: int | None = None,
    collect_plans: bool = False,
) -> SimulationResult:
    """Simulate one controller over whole days of 1-min net-load data.

    The span defaults to everything the data supports (capped at about five
    months), with a 24 h lookback reserved for persistence forecasts; ideal
    forecasts near the data end are truncated to the remaining data. Costs
    are settled with the netting interval equal to the ground-truth
    resolution, plus degradation on the realized battery discharge.
    """
    if net_load.step_minutes != 1:
        raise DataError(f"net load must be 1-min data, got {net_load.step_minutes} min")
    start, days = _default_span(cfg, net_load, sim_start, sim_days)

    gt_step = cfg.delta_gt.step_minutes
    n_steps = days * MINUTES_PER_DAY // gt_step
    sim_minutes = days * MINUTES_PER_DAY

    if cfg.mode is EvaluationMode.FULLY_AVERAGED:
        # Average the simulated window plus whatever lookahead exists, so the
        # driver and ideal forecasts come from one identical series.
        avail = int((net_load.end - start).total_seconds() // 60)
        avail -= avail % cfg.delta_s.step_minutes
        driver_extended = net_load.slice(start, avail).average_to(cfg.delta_s)
    else:
        driver_extended = net_load
    driver = driver_extended.slice(start, n_steps)

    if cfg.controller is Controller.RBC:
        return _run_rbc(cfg, driver)
    return _run_mpc(cfg, net_load, driver, driver_extended, collect_plans)


def _finalize(
    cfg: SimulationConfig,
    driver: PowerSeries,
    p_b: np.ndarray,
    p_g: np.ndarray,
    soe: np.ndarray,
    max_split: float,
    truncated: tuple[datetime, ...],
    plans: tuple[DispatchPlan, ...] | None,
) -> SimulationResult:
    p_b_series = PowerSeries(driver.start, cfg.delta_gt, p_b)
    p_g_series = PowerSeries(driver.start, cfg.delta_gt, p_g)
    settlement = settle(p_g_series, cfg.tariff, ni=cfg.delta_gt)
    discharged, degradation = degradation_cost(p_b_series, cfg.spec)
    report = CostReport.build(settlement, discharged, degradation)
    return SimulationResult(
        config=cfg,
        p_b=p_b_series,
        p_g=p_g_series,
        net_load=driver,
        soe=soe,
        report=report,
        max_split_product=max_split,
        truncated_plan_origins=truncated,
        plans=plans,
    )


def _run_rbc(cfg: SimulationConfig, driver: PowerSeries) -> SimulationResult:
    dt = cfg.delta_gt.hours
    n = len(driver)
    p_b = np.empty(n)
    p_g = np.empty(n)
    soe = np.empty(n + 1)
    state = BatteryState(cfg.initial_soe)
    soe[0] = state.e
    values = driver.values
    for i in range(n):
        step = rbc_step(cfg.spec, state, values[i], dt)
        p_b[i] = step.p_b
        p_g[i] = step.p_g
        state = step.new_state
        soe[i + 1] = state.e
    return _finalize(cfg, driver, p_b, p_g, soe, 0.0, (), None)


def _run_mpc(
    cfg: SimulationConfig,
    net_load: PowerSeries,
    driver: PowerSeries,
    driver_extended: PowerSeries,
    collect_plans: bool,
) -> SimulationResult:
    forecaster = _make_forecaster(cfg, net_load, driver_extended)
    fast_step = (
        const_grid_step if cfg.controller is Controller.MPC_CONST_GRID else const_bat_step
    )

    dt = cfg.delta_gt.hours
    n = len(driver)
    steps_per_plan = cfg.delta_s.step_minutes // cfg.delta_gt.step_minutes
    n_plans = n // steps_per_plan
    horizon_minutes = cfg.horizon_hours * 60
    forecast_data_end = (
        driver_extended.end if cfg.forecast_source is ForecastSource.IDEAL else None
    )

    p_b = np.empty(n)
    p_g = np.empty(n)
    soe = np.empty(n + 1)
    state = BatteryState(cfg.initial_soe)
    soe[0] = state.e
    values = driver.values
    plans: list[DispatchPlan] = []
    truncated: list[datetime] = []
    max_split = 0.0

    for plan_idx in range(n_plans):
        origin = driver.start + timedelta(minutes=plan_idx * cfg.delta_s.step_minutes)
        horizon = horizon_minutes
        if forecast_data_end is not None:
            avail = int((forecast_data_end - origin).total_seconds() // 60)
            avail -= avail % cfg.delta_s.step_minutes
            horizon = min(horizon, avail)
        if horizon < horizon_minutes:
            truncated.append(origin)
        request = ForecastRequest(origin, cfg.delta_s, horizon_hours=horizon / 60.0)
        try:
            forecast = forecaster(request)
            plan = solve_schedule(forecast, cfg.tariff, cfg.spec, state.e)
        except SolverError as exc:
            raise SolverError(f"planning step at {origin} failed: {exc}") from exc
        violations = check_complementarity(plan)
        if violations:
            raise SolverError(
                f"plan at {origin} violates complementarity at steps {violations} "
                f"(max product {plan.max_split_product():.3e})"
            )
        max_split = max(max_split, plan.max_split_product())
        if collect_plans:
            plans.append(plan)

        planned_p_g = plan.p_g[0]
        planned_p_b = plan.p_b[0]
        setpoint = (
            planned_p_g if cfg.controller is Controller.MPC_CONST_GRID else planned_p_b
        )
        base = plan_idx * steps_per_plan
        for j in range(steps_per_plan):
            idx = base + j
            step = fast_step(setpoint, cfg.spec, state, values[idx], dt)
            p_b[idx] = step.p_b
            p_g[idx] = step.p_g
            state = step.new_state
            soe[idx + 1] = state.e

    return _finalize(
        cfg, driver, p_b, p_g, soe, max_split, tuple(truncated),
        tuple(plans) if collect_plans else None,
    )


@dataclass(frozen=True)
class ExperimentCell:
    building_id: str
    config: SimulationConfig
    result: SimulationResult | None
    error: str | None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[ExperimentCell, ...]

    @property
    def failures(self) -> list[ExperimentCell]:
        return [c for c in self.cells if not c.ok]

    def results_for(self, config: SimulationConfig) -> list[ExperimentCell]:
        """Cells of one configuration in building order."""
        return [c for c in self.cells if c.config == config]


def _worker_count(max_workers: int | None, n_tasks: int) -> int:
    if max_workers is None:
        env = os.environ.get(THREADS_ENV_VAR)
        max_workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(max_workers, n_tasks))


def _run_cell(
    task: tuple[BuildingDataset, SimulationConfig, datetime | None, int | None, bool]
) -> ExperimentCell:
    building, cfg, sim_start, sim_days, collect_plans = task
    try:
        result = run_simulation(
            cfg, building.net_load,
            sim_start=sim_start, sim_days=sim_days, collect_plans=collect_plans,
        )
        return ExperimentCell(building.building_id, cfg, result, None)
    except Exception as exc:  # per-cell isolation: a bad cell must not kill the grid
        return ExperimentCell(
            building.building_id, cfg, None, f"{type(exc).__name__}: {exc}"
        )


def run_experiment(
    matrix: list[SimulationConfig],
    buildings: list[BuildingDataset],
    *,
    sim_days: int | None = None,
    max_workers: int | None = None,
    collect_plans: bool = False,
) -> ExperimentReport:
    """Run every configuration against every building.

    All configurations of one building share the same simulated span (the
    union of their forecast reserves is carved out), so results are
    comparable across controllers. Cells are independent; failures are
    recorded per cell. Output order is deterministic regardless of the
    number of workers.
    """
    if not matrix:
        raise ValueError("configuration matrix is empty")
    if not buildings:
        raise ValueError("building list is empty")

    lookback = timedelta(hours=FORECAST_WINDOW_HOURS) if any(
        c.needs_lookback for c in matrix
    ) else timedelta(0)

    tasks = []
    for building in buildings:
        start = building.net_load.start + lookback
        _, days = _default_span(matrix[0], building.net_load, start, sim_days)
        for cfg in matrix:
            tasks.append((building, cfg, start, days, collect_plans))

    workers = _worker_count(max_workers, len(tasks))
    if workers == 1:
        cells = [_run_cell(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, tasks, chunksize=1))
    return ExperimentReport(tuple(cells))
