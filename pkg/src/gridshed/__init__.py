"""Residential PV-battery scheduling simulator.

Simulates rule-based and two-stage MPC battery control against minute-level
net-load data, settles electricity costs under configurable netting
intervals, and aggregates the metrics needed to compare controllers across
evaluation timescales.
"""

__version__ = "0.1.0"

from gridshed.battery import BatterySpec, BatteryState, default_spec
from gridshed.metrics import CostReport
from gridshed.tariff import Tariff, default_tariff
from gridshed.timeseries import PowerSeries, Resolution

__all__ = [
    "BatterySpec",
    "BatteryState",
    "CostReport",
    "PowerSeries",
    "Resolution",
    "Tariff",
    "default_spec",
    "default_tariff",
    "__version__",
]
