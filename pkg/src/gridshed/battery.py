"""Battery plant model: limits, state-of-energy dynamics, degradation pricing.

Battery power is signed: p_B > 0 discharges, p_B < 0 charges. Charging
stores p_B * eta_ch, discharging drains p_B / eta_dis from the cells, so a
round trip returns eta_ch * eta_dis of the energy put in at the terminals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gridshed.timeseries import PowerSeries


@dataclass(frozen=True)
class BatterySpec:
    e_min: float  # kWh
    e_max: float  # kWh
    p_min: float  # kW, maximum charging power (negative)
    p_max: float  # kW, maximum discharging power (positive)
    eta_ch: float  # charging efficiency in (0, 1]
    eta_dis: float  # discharging efficiency in (0, 1]
    c_deg: float  # EUR per kWh drained from the cells

    def __post_init__(self) -> None:
        if not self.e_min < self.e_max:
            raise ValueError(f"need e_min < e_max, got {self.e_min} >= {self.e_max}")
        if not (self.p_min < 0.0 < self.p_max):
            raise ValueError(f"need p_min < 0 < p_max, got ({self.p_min}, {self.p_max})")
        for name, eta in (("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)):
            if not 0.0 < eta <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {eta}")
        if self.c_deg < 0.0:
            raise ValueError(f"c_deg must be non-negative, got {self.c_deg}")


@dataclass(frozen=True)
class BatteryState:
    e: float  # kWh, current state of energy


# Tolerance on state-of-energy bound checks; accumulated float error from
# stepping the dynamics stays well below this.
SOE_TOL_KWH = 1e-9


def default_spec() -> BatterySpec:
    """13.8 kWh / 5 kW unit with 98 % one-way efficiencies.

    The degradation price corresponds to a 4000 EUR investment, 400 EUR
    salvage value and 42.69 MWh of warranted discharged energy.
    """
    return BatterySpec(
        e_min=0.0,
        e_max=13.8,
        p_min=-5.0,
        p_max=5.0,
        eta_ch=0.98,
        eta_dis=0.98,
        c_deg=0.084,
    )


def degradation_price(
    investment_eur: float, salvage_eur: float, lifetime_discharged_kwh: float
) -> float:
    """Net capital cost spread over the warranted discharged energy, EUR/kWh."""
    if lifetime_discharged_kwh <= 0.0:
        raise ValueError(
            f"lifetime_discharged_kwh must be positive, got {lifetime_discharged_kwh}"
        )
    if salvage_eur > investment_eur:
        raise ValueError("salvage value exceeds investment cost")
    return (investment_eur - salvage_eur) / lifetime_discharged_kwh


def step_soe(spec: BatterySpec, state: BatteryState, p_b: float, dt_hours: float) -> BatteryState:
    """Advance the state of energy by one step of `dt_hours` at power `p_b`.

    Does not clamp: the caller is responsible for keeping the result inside
    the SoE bounds (see feasible_power_bounds).
    """
    if dt_hours <= 0.0:
        raise ValueError(f"dt_hours must be positive, got {dt_hours}")
    charge = min(p_b, 0.0)
    discharge = max(p_b, 0.0)
    return BatteryState(state.e - dt_hours * (charge * spec.eta_ch + discharge / spec.eta_dis))


def feasible_power_bounds(
    spec: BatterySpec, state: BatteryState, dt_hours: float
) -> tuple[float, float]:
    """Power interval (p_lo, p_hi) that keeps both power and SoE limits over one step.

    p_lo <= 0 <= p_hi always holds; zero power is feasible from any valid state.
    """
    if dt_hours <= 0.0:
        raise ValueError(f"dt_hours must be positive, got {dt_hours}")
    p_lo = max(spec.p_min, -(spec.e_max - state.e) / (spec.eta_ch * dt_hours))
    p_hi = min(spec.p_max, (state.e - spec.e_min) * spec.eta_dis / dt_hours)
    # States may drift past a bound by float round-off; never invert the interval.
    return min(p_lo, 0.0), max(p_hi, 0.0)


def degradation_cost(p_b_series: PowerSeries, spec: BatterySpec) -> tuple[float, float]:
    """(discharged terminal energy in kWh, degradation cost in EUR) of a dispatch.

    The cost is levied on energy drained from the cells, i.e. terminal
    discharge divided by eta_dis.
    """
    discharged = float(np.sum(np.maximum(p_b_series.values, 0.0)) * p_b_series.dt_hours)
    cost = spec.c_deg * discharged / spec.eta_dis
    return discharged, cost
