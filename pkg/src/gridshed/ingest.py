"""Net-load data acquisition: CSV ingestion and a synthetic residential generator.

The generator stands in for measured data: minute-resolution household load
(base, morning/evening peaks, appliance spikes, noise) minus PV production
(clear-sky half-sine scaled by panel count, attenuated by cloud fields with
fast dips). All randomness comes from PCG64 generators derived from the
integer seed, so output is identical across platforms for the same seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from gridshed.errors import DataError
from gridshed.timeseries import MINUTES_PER_DAY, PowerSeries, Resolution

ONE_MINUTE = Resolution(1)
MIN_DATASET_DAYS = 2  # forecast lookback plus at least one simulated day

SYNTHETIC_START = datetime(2020, 7, 15)
PANEL_PEAK_KW = 0.15  # per-panel clear-sky peak

CSV_TIMESTAMP_COLUMN = "timestamp"


@dataclass(frozen=True)
class BuildingDataset:
    building_id: str
    net_load: PowerSeries  # 1-min net load, consumption surplus positive
    panel_count: int = 0  # 0 when unknown (e.g. measured data)

    def __post_init__(self) -> None:
        if not self.building_id:
            raise ValueError("building_id must be non-empty")
        if self.net_load.resolution != ONE_MINUTE:
            raise DataError(
                f"{self.building_id}: net load must be 1-min data, "
                f"got {self.net_load.step_minutes} min"
            )
        if len(self.net_load) < MIN_DATASET_DAYS * MINUTES_PER_DAY:
            raise DataError(
                f"{self.building_id}: need at least {MIN_DATASET_DAYS} days of data, "
                f"got {len(self.net_load)} minutes"
            )
        if self.panel_count < 0:
            raise ValueError(f"panel_count must be >= 0, got {self.panel_count}")


def load_csv(path: str) -> list[BuildingDataset]:
    """Load per-building 1-min net load from a wide CSV.

    Schema: header ``timestamp,<building_id>[,<building_id>...]``; ISO-8601
    minute-precision timestamps in strictly increasing 1-min steps; values in
    kW. Any gap, unordered row or unparseable cell is fatal and reported with
    its row number.
    """
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != CSV_TIMESTAMP_COLUMN or len(header) < 2:
            raise DataError(
                f"{path}: expected header '{CSV_TIMESTAMP_COLUMN},<building_id>[,...]', got {header}"
            )
        ids = header[1:]
        if len(set(ids)) != len(ids) or any(not b for b in ids):
            raise DataError(f"{path}: building ids must be unique and non-empty")

        start: datetime | None = None
        previous: datetime | None = None
        columns: list[list[float]] = [[] for _ in ids]
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{row_no}: expected {len(header)} cells, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0])
            except ValueError as exc:
                raise DataError(f"{path}:{row_no}: bad timestamp {row[0]!r}") from exc
            if ts.second != 0 or ts.microsecond != 0:
                raise DataError(f"{path}:{row_no}: timestamp {row[0]!r} is not minute-precise")
            if previous is not None and ts != previous + timedelta(minutes=1):
                kind = "gap" if ts > previous else "non-monotone timestamp"
                raise DataError(f"{path}:{row_no}: {kind} ({previous} -> {ts})")
            if start is None:
                start = ts
            previous = ts
            for i, cell in enumerate(row[1:]):
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise DataError(f"{path}:{row_no}: bad value {cell!r} for {ids[i]}") from exc
                if not np.isfinite(value):
                    raise DataError(f"{path}:{row_no}: non-finite value for {ids[i]}")
                columns[i].append(value)

    if start is None:
        raise DataError(f"{path}: no data rows")
    return [
        BuildingDataset(b, PowerSeries(start, ONE_MINUTE, np.array(col)))
        for b, col in zip(ids, columns)
    ]


def _smooth_noise(rng: np.random.Generator, n: int, window_minutes: int) -> np.ndarray:
    """Zero-mean unit-variance noise with fluctuations on the given time scale."""
    raw = rng.normal(0.0, 1.0, n + window_minutes)
    kernel = np.exp(-np.arange(3 * window_minutes) / window_minutes)
    kernel /= np.sqrt(np.sum(kernel**2))
    return np.convolve(raw, kernel, mode="same")[:n]


def _event_train(
    rng: np.random.Generator,
    n_minutes: int,
    days: int,
    events_per_day: float,
    minute_range: tuple[int, int],
    duration_range: tuple[int, int],
    magnitude_range: tuple[float, float],
) -> np.ndarray:
    """Sum of rectangular pulses (appliance spikes, cloud dips)."""
    train = np.zeros(n_minutes)
    counts = rng.poisson(events_per_day, size=days)
    for day in range(days):
        for _ in range(counts[day]):
            start = day * MINUTES_PER_DAY + int(rng.integers(*minute_range))
            duration = int(rng.integers(*duration_range))
            magnitude = float(rng.uniform(*magnitude_range))
            train[start : min(start + duration, n_minutes)] += magnitude
    return train


def _household_load(rng: np.random.Generator, days: int) -> np.ndarray:
    n = days * MINUTES_PER_DAY
    tod = np.arange(n) % MINUTES_PER_DAY
    base = 0.65
    morning = 0.9 * np.exp(-(((tod - 435) / 75.0) ** 2))  # around 07:15
    evening = 2.2 * np.exp(-(((tod - 1140) / 105.0) ** 2))  # around 19:00
    day_scale = np.repeat(np.clip(1.0 + 0.2 * rng.normal(size=days), 0.6, 1.6), MINUTES_PER_DAY)
    noise = 0.08 * _smooth_noise(rng, n, window_minutes=20)
    spikes = _event_train(
        rng, n, days,
        events_per_day=7.0,
        minute_range=(0, MINUTES_PER_DAY),
        duration_range=(3, 45),
        magnitude_range=(0.4, 2.8),
    )
    return np.clip(day_scale * (base + morning + evening) + noise + spikes, 0.04, None)


def _per_panel_pv(rng: np.random.Generator, days: int) -> np.ndarray:
    """Clear-sky production of a single panel (kW), attenuated by clouds."""
    n = days * MINUTES_PER_DAY
    tod = np.arange(n) % MINUTES_PER_DAY
    sunrise, sunset = 345, 1275  # 05:45 to 21:15
    phase = (tod - sunrise) / (sunset - sunrise)
    shape = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0) ** 1.2

    # clearness spans bright summer days down to overcast autumn-like ones,
    # so fleets mix PV-saturated and load-dominated days
    daily_clearness = np.repeat(rng.uniform(0.2, 1.0, size=days), MINUTES_PER_DAY)
    slow = 0.12 * _smooth_noise(rng, n, window_minutes=180)
    dips = _event_train(
        rng, n, days,
        events_per_day=9.0,
        minute_range=(sunrise, sunset),
        duration_range=(2, 30),
        magnitude_range=(0.35, 0.9),
    )
    cloud = np.clip(daily_clearness + slow - dips, 0.05, 1.0)
    return PANEL_PEAK_KW * shape * cloud


def generate_synthetic(seed: int, days: int, panel_count: int) -> BuildingDataset:
    """Deterministic synthetic building: household load minus scaled PV.

    Load and PV use independent PCG64 streams spawned from the seed, so the
    PV component scales exactly linearly with panel_count for a fixed seed.
    """
    if days < MIN_DATASET_DAYS:
        raise ValueError(f"days must be >= {MIN_DATASET_DAYS}, got {days}")
    if panel_count < 0:
        raise ValueError(f"panel_count must be >= 0, got {panel_count}")
    load_seq, pv_seq = np.random.SeedSequence(seed).spawn(2)
    load = _household_load(np.random.Generator(np.random.PCG64(load_seq)), days)
    pv = panel_count * _per_panel_pv(np.random.Generator(np.random.PCG64(pv_seq)), days)
    series = PowerSeries(SYNTHETIC_START, ONE_MINUTE, load - pv)
    return BuildingDataset(f"synthetic-{seed}", series, panel_count=panel_count)


def generate_fleet(
    seed: int, n_buildings: int, days: int, panel_range: tuple[int, int] = (16, 38)
) -> list[BuildingDataset]:
    """Fleet of synthetic buildings with panel counts drawn from `panel_range`."""
    if n_buildings < 1:
        raise ValueError(f"n_buildings must be >= 1, got {n_buildings}")
    lo, hi = panel_range
    if not 0 <= lo <= hi:
        raise ValueError(f"invalid panel_range {panel_range}")
    panel_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 1))))
    panels = panel_rng.integers(lo, hi + 1, size=n_buildings)
    buildings = []
    for i in range(n_buildings):
        child_seed = int(np.random.SeedSequence((seed, 2, i)).generate_state(1)[0])
        dataset = generate_synthetic(child_seed, days, int(panels[i]))
        buildings.append(
            BuildingDataset(f"b{i + 1:02d}", dataset.net_load, dataset.panel_count)
        )
    return buildings
