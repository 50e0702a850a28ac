"""Net-load forecasts over the planning horizon.

Two built-in sources share one interface: ideal forecasts (exact interval
averages of the ground truth, carrying no intra-interval information) and
day-ahead persistence (yesterday's window replayed). Precomputed external
forecasts can be injected from a CSV file instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from gridshed.errors import DataError
from gridshed.timeseries import PowerSeries, Resolution


@dataclass(frozen=True)
class ForecastRequest:
    origin: datetime
    resolution: Resolution
    horizon_hours: float = 24.0

    def __post_init__(self) -> None:
        minutes = self.horizon_hours * 60
        if minutes <= 0 or minutes != int(minutes):
            raise ValueError(f"horizon must be a positive whole number of minutes, got {self.horizon_hours} h")
        if int(minutes) % self.resolution.step_minutes != 0:
            raise ValueError(
                f"horizon of {self.horizon_hours} h is not a whole number of "
                f"{self.resolution.step_minutes}-min steps"
            )

    @property
    def horizon_steps(self) -> int:
        return int(self.horizon_hours * 60) // self.resolution.step_minutes


def ideal_forecast(ground_truth: PowerSeries, req: ForecastRequest) -> PowerSeries:
    """Exact interval averages of the ground truth over the horizon.

    Perfectly accurate at the requested resolution while containing no
    information about fluctuations within each interval.
    """
    if not ground_truth.resolution.divides(req.resolution):
        raise DataError(
            f"ground truth at {ground_truth.step_minutes} min cannot produce "
            f"{req.resolution.step_minutes}-min averages"
        )
    fine_steps = int(req.horizon_hours * 60) // ground_truth.step_minutes
    window = ground_truth.slice(req.origin, fine_steps)
    return window.average_to(req.resolution)


def persistence_forecast(history: PowerSeries, req: ForecastRequest) -> PowerSeries:
    """Yesterday's same-clock-time window, averaged to the requested resolution."""
    if not history.resolution.divides(req.resolution):
        raise DataError(
            f"history at {history.step_minutes} min cannot produce "
            f"{req.resolution.step_minutes}-min averages"
        )
    lookback_origin = req.origin - timedelta(hours=24)
    steps = int(req.horizon_hours * 60) // history.step_minutes
    window = history.slice(lookback_origin, steps).average_to(req.resolution)
    return PowerSeries(req.origin, req.resolution, window.values)


FORECAST_FILE_COLUMNS = ("origin_timestamp", "step_index", "p_hat_kw")


def load_forecast_file(path: str) -> dict[datetime, np.ndarray]:
    """Read precomputed forecasts keyed by planning origin.

    Expected CSV schema: origin_timestamp (ISO-8601, minute precision),
    step_index (0-based, contiguous per origin), p_hat_kw.
    """
    table: dict[datetime, dict[int, float]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != FORECAST_FILE_COLUMNS:
            raise DataError(
                f"{path}: expected header {','.join(FORECAST_FILE_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for row_no, row in enumerate(reader, start=2):
            try:
                origin = datetime.fromisoformat(row["origin_timestamp"])
                step = int(row["step_index"])
                value = float(row["p_hat_kw"])
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{row_no}: unparseable row ({exc})") from exc
            if not np.isfinite(value):
                raise DataError(f"{path}:{row_no}: non-finite forecast value")
            per_origin = table.setdefault(origin, {})
            if step in per_origin:
                raise DataError(f"{path}:{row_no}: duplicate step {step} for origin {origin}")
            per_origin[step] = value

    result: dict[datetime, np.ndarray] = {}
    for origin, steps in table.items():
        expected = range(len(steps))
        if sorted(steps) != list(expected):
            raise DataError(
                f"{path}: steps for origin {origin} are not contiguous from 0"
            )
        result[origin] = np.array([steps[i] for i in expected])
    return result


def file_forecast(
    table: dict[datetime, np.ndarray], req: ForecastRequest
) -> PowerSeries:
    """Look up a stored forecast for the request's origin.

    The stored values must cover at least the requested horizon; extra
    trailing steps are dropped.
    """
    values = table.get(req.origin)
    if values is None:
        raise DataError(f"no stored forecast for planning origin {req.origin}")
    if len(values) < req.horizon_steps:
        raise DataError(
            f"stored forecast for {req.origin} has {len(values)} steps, "
            f"need {req.horizon_steps}"
        )
    return PowerSeries(req.origin, req.resolution, values[: req.horizon_steps])
