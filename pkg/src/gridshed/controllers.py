"""Run-time control policies.

Three step functions cover the control layer: the reactive rule that zeroes
grid exchange when feasible, and the two fast layers that execute an MPC
setpoint at control resolution by holding either the planned grid exchange
(fluctuations absorbed by the battery) or the planned battery power
(fluctuations shifted to the grid).
"""

from __future__ import annotations

from dataclasses import dataclass

from gridshed.battery import BatterySpec, BatteryState, feasible_power_bounds, step_soe


@dataclass(frozen=True)
class ControlStepResult:
    p_b: float  # kW, battery power applied this step
    p_g: float  # kW, resulting grid exchange
    new_state: BatteryState


def _apply(spec: BatterySpec, state: BatteryState, desired_p_b: float,
           p_l_actual: float, dt_hours: float) -> ControlStepResult:
    lo, hi = feasible_power_bounds(spec, state, dt_hours)
    p_b = min(max(desired_p_b, lo), hi)
    return ControlStepResult(p_b, p_l_actual - p_b, step_soe(spec, state, p_b, dt_hours))


def rbc_step(spec: BatterySpec, state: BatteryState, p_l: float, dt_hours: float) -> ControlStepResult:
    """Charge on PV surplus, discharge on load surplus, zero grid exchange if feasible.

    Needs neither forecasts nor prices; the residual after clamping to the
    feasible power interval goes to the grid.
    """
    return _apply(spec, state, p_l, p_l, dt_hours)


def const_grid_step(planned_p_g: float, spec: BatterySpec, state: BatteryState,
                    p_l_actual: float, dt_hours: float) -> ControlStepResult:
    """Track the planned grid exchange; the battery compensates fluctuations."""
    return _apply(spec, state, p_l_actual - planned_p_g, p_l_actual, dt_hours)


def const_bat_step(planned_p_b: float, spec: BatterySpec, state: BatteryState,
                   p_l_actual: float, dt_hours: float) -> ControlStepResult:
    """Hold the planned battery power; fluctuations go to the grid."""
    return _apply(spec, state, planned_p_b, p_l_actual, dt_hours)
