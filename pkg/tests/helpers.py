"""Shared test helpers: physics verification of simulation results."""

from __future__ import annotations

import numpy as np

from gridshed.battery import BatteryState, step_soe
from gridshed.simulation import SimulationResult


def verify_physics(result: SimulationResult) -> None:
    """Assert power balance, SoE replay consistency and SoE bounds."""
    cfg = result.config
    # Power balance: net load = battery + grid at every realized step.
    balance = result.net_load.values - (result.p_b.values + result.p_g.values)
    assert np.max(np.abs(balance)) <= 1e-9, f"power balance off by {np.max(np.abs(balance))}"

    # Replaying the dynamics over the realized battery power reproduces the
    # stored trajectory.
    dt = cfg.delta_gt.hours
    state = BatteryState(result.soe[0])
    for i, p_b in enumerate(result.p_b.values):
        state = step_soe(cfg.spec, state, p_b, dt)
        assert abs(state.e - result.soe[i + 1]) <= 1e-7, f"SoE replay diverges at step {i}"

    assert np.all(result.soe >= cfg.spec.e_min - 1e-9), "SoE below lower bound"
    assert np.all(result.soe <= cfg.spec.e_max + 1e-9), "SoE above upper bound"
