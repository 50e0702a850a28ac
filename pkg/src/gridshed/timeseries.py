"""Uniformly sampled average-power time series.

Every series stores average power in kW over fixed-length intervals on a
minute-aligned grid. Sign convention used throughout the package: net load
p_L > 0 is consumption surplus, battery power p_B > 0 is discharging, grid
power p_G > 0 is import, so p_L = p_B + p_G holds at every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

MINUTES_PER_DAY = 1440


class AlignmentError(ValueError):
    """Timestamps, resolutions or window lengths do not line up on the grid."""


@dataclass(frozen=True, order=True)
class Resolution:
    """Sampling interval in whole minutes; must divide a day evenly."""

    step_minutes: int

    def __post_init__(self) -> None:
        if not isinstance(self.step_minutes, int) or isinstance(self.step_minutes, bool):
            raise ValueError(f"step_minutes must be an integer, got {self.step_minutes!r}")
        if self.step_minutes <= 0 or MINUTES_PER_DAY % self.step_minutes != 0:
            raise ValueError(
                f"step_minutes must be a positive divisor of {MINUTES_PER_DAY}, "
                f"got {self.step_minutes}"
            )

    @property
    def hours(self) -> float:
        return self.step_minutes / 60.0

    def divides(self, other: Resolution) -> bool:
        """True if windows of `other` consist of whole steps of this resolution."""
        return other.step_minutes % self.step_minutes == 0


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Immutable average-power signal (kW) on a uniform grid.

    Timestamps are implied: sample k covers
    [start + k * resolution, start + (k + 1) * resolution).
    """

    start: datetime
    resolution: Resolution
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.start.second != 0 or self.start.microsecond != 0:
            raise AlignmentError(f"series must start on a whole minute, got {self.start}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a non-empty one-dimensional sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must all be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.resolution == other.resolution
            and np.array_equal(self.values, other.values)
        )

    @property
    def step_minutes(self) -> int:
        return self.resolution.step_minutes

    @property
    def dt_hours(self) -> float:
        return self.resolution.hours

    @property
    def end(self) -> datetime:
        """First instant no longer covered by the series."""
        return self.start + timedelta(minutes=len(self) * self.step_minutes)

    def start_minute_of_day(self) -> int:
        return self.start.hour * 60 + self.start.minute

    def index_of(self, ts: datetime) -> int:
        """Index of the sample starting exactly at `ts`."""
        seconds = (ts - self.start).total_seconds()
        if seconds < 0:
            raise AlignmentError(f"{ts} lies before series start {self.start}")
        if seconds % 60 != 0:
            raise AlignmentError(f"{ts} is not minute-aligned relative to {self.start}")
        minutes = int(seconds // 60)
        if minutes % self.step_minutes != 0:
            raise AlignmentError(
                f"{ts} does not align with the {self.step_minutes}-min grid of the series"
            )
        index = minutes // self.step_minutes
        if index >= len(self):
            raise AlignmentError(f"{ts} lies at or past series end {self.end}")
        return index

    def average_to(self, target: Resolution) -> PowerSeries:
        """Downsample by arithmetic averaging over whole target windows.

        Energy is conserved: mean power times window length is unchanged.
        """
        if target == self.resolution:
            return self
        if not self.resolution.divides(target):
            raise AlignmentError(
                f"target step {target.step_minutes} min is not a multiple of "
                f"source step {self.step_minutes} min"
            )
        factor = target.step_minutes // self.step_minutes
        if len(self) % factor != 0:
            raise AlignmentError(
                f"series length {len(self)} leaves a partial trailing "
                f"{target.step_minutes}-min window"
            )
        averaged = self.values.reshape(-1, factor).mean(axis=1)
        return PowerSeries(self.start, target, averaged)

    def slice(self, start: datetime, steps: int) -> PowerSeries:
        """Contiguous sub-series of `steps` samples beginning at `start`."""
        if steps <= 0:
            raise ValueError(f"steps must be positive, got {steps}")
        first = self.index_of(start)
        if first + steps > len(self):
            raise AlignmentError(
                f"window of {steps} steps from {start} extends past series end {self.end}"
            )
        return PowerSeries(start, self.resolution, self.values[first : first + steps])
