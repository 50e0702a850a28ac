"""Time-of-use price curves and netting-interval settlement.

A tariff is a pair of piecewise-constant daily price curves (import and
export, EUR/kWh). Settlement nets the signed grid energy inside each
netting-interval window and prices the net amount: with the netting
interval equal to the series resolution this is per-step billing of
imports and exports separately; coarser intervals let opposite flows
cancel before pricing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from gridshed.timeseries import MINUTES_PER_DAY, AlignmentError, PowerSeries, Resolution

# (start minute of day, price EUR/kWh); a curve is a sorted tuple of segments
# starting at minute 0 and covering the whole day.
Segment = tuple[int, float]

DEFAULT_IMPORT_SEGMENTS: tuple[Segment, ...] = (
    (0, 0.22),  # night
    (360, 0.32),  # day from 06:00
    (1020, 0.42),  # evening peak from 17:00
    (1260, 0.22),  # night again from 21:00
)
DEFAULT_EXPORT_SEGMENTS: tuple[Segment, ...] = ((0, 0.07),)


def _validate_curve(curve: tuple[Segment, ...], name: str) -> None:
    if not curve:
        raise ValueError(f"{name} curve must contain at least one segment")
    starts = [s for s, _ in curve]
    if starts[0] != 0:
        raise ValueError(f"{name} curve must start at minute 0, got {starts[0]}")
    if any(e <= s for s, e in zip(starts, starts[1:])):
        raise ValueError(f"{name} curve segments must be sorted and non-overlapping")
    if starts[-1] >= MINUTES_PER_DAY:
        raise ValueError(f"{name} curve segment starts at {starts[-1]} >= {MINUTES_PER_DAY}")
    for start, price in curve:
        if not np.isfinite(price) or price < 0.0:
            raise ValueError(f"{name} price at minute {start} must be >= 0, got {price}")


def _minute_prices(curve: tuple[Segment, ...]) -> np.ndarray:
    prices = np.empty(MINUTES_PER_DAY)
    bounds = [s for s, _ in curve] + [MINUTES_PER_DAY]
    for (start, price), stop in zip(curve, bounds[1:]):
        prices[start:stop] = price
    prices.flags.writeable = False
    return prices


@dataclass(frozen=True)
class Tariff:
    import_curve: tuple[Segment, ...]
    export_curve: tuple[Segment, ...]
    # per-minute expansions, derived once at construction
    import_minute_prices: np.ndarray = field(init=False, repr=False, compare=False)
    export_minute_prices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        curve_imp = tuple((int(s), float(p)) for s, p in self.import_curve)
        curve_exp = tuple((int(s), float(p)) for s, p in self.export_curve)
        _validate_curve(curve_imp, "import")
        _validate_curve(curve_exp, "export")
        object.__setattr__(self, "import_curve", curve_imp)
        object.__setattr__(self, "export_curve", curve_exp)
        object.__setattr__(self, "import_minute_prices", _minute_prices(curve_imp))
        object.__setattr__(self, "export_minute_prices", _minute_prices(curve_exp))

    def price_at(self, minute_of_day: int) -> tuple[float, float]:
        """(import, export) price of the segments covering the given minute."""
        if not 0 <= minute_of_day < MINUTES_PER_DAY:
            raise ValueError(f"minute_of_day must lie in [0, 1440), got {minute_of_day}")
        return (
            float(self.import_minute_prices[minute_of_day]),
            float(self.export_minute_prices[minute_of_day]),
        )


def default_tariff() -> Tariff:
    """Three-level TOU import curve with a flat export price.

    Chosen so that every import price exceeds every export price (no
    arbitrage) and the export price stays below the default battery
    degradation price of 0.084 EUR/kWh.
    """
    return Tariff(DEFAULT_IMPORT_SEGMENTS, DEFAULT_EXPORT_SEGMENTS)


@dataclass(frozen=True)
class SettlementResult:
    imported_kwh: float
    exported_kwh: float
    import_cost_eur: float
    export_revenue_eur: float
    bill_eur: float  # import_cost - export_revenue


def step_prices(
    tariff: Tariff, start: datetime, n_steps: int, step_minutes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (import, export) prices, time-averaged over each step's window.

    Steps spanning a price change get the duration-weighted mean of the
    covered segment prices; for minute steps this is the exact segment price.
    """
    minute_idx = (
        start.hour * 60 + start.minute + np.arange(n_steps * step_minutes)
    ) % MINUTES_PER_DAY
    imp = tariff.import_minute_prices[minute_idx].reshape(n_steps, step_minutes).mean(axis=1)
    exp = tariff.export_minute_prices[minute_idx].reshape(n_steps, step_minutes).mean(axis=1)
    return imp, exp


def settle(grid: PowerSeries, tariff: Tariff, ni: Resolution) -> SettlementResult:
    """Settle a signed grid-exchange series (kW, import positive) under a netting interval.

    Within each window of length `ni` the signed step energies are netted.
    A net import is priced at the energy-weighted import price of the
    importing sub-steps, a net export credited at the energy-weighted
    export price of the exporting sub-steps. For ni equal to the grid
    resolution this reduces to exact per-step billing.
    """
    if not grid.resolution.divides(ni):
        raise AlignmentError(
            f"netting interval {ni.step_minutes} min is not a multiple of the "
            f"grid resolution {grid.step_minutes} min"
        )
    factor = ni.step_minutes // grid.step_minutes
    if len(grid) % factor != 0:
        raise AlignmentError(
            f"series length {len(grid)} leaves a partial trailing netting window"
        )
    imp_price, exp_price = step_prices(tariff, grid.start, len(grid), grid.step_minutes)

    step_energy = (grid.values * grid.dt_hours).reshape(-1, factor)  # kWh, signed
    pos = np.maximum(step_energy, 0.0)
    neg = np.maximum(-step_energy, 0.0)
    net = step_energy.sum(axis=1)

    pos_sum = pos.sum(axis=1)
    neg_sum = neg.sum(axis=1)
    pos_cost = (imp_price.reshape(-1, factor) * pos).sum(axis=1)
    neg_revenue = (exp_price.reshape(-1, factor) * neg).sum(axis=1)

    importing = net > 0.0
    exporting = net < 0.0
    # Net energy is split pro-rata over the same-sign sub-step energies, so
    # each retains its own price; the scale is exactly 1 when factor == 1.
    scale_imp = np.zeros_like(net)
    scale_imp[importing] = net[importing] / pos_sum[importing]
    scale_exp = np.zeros_like(net)
    scale_exp[exporting] = -net[exporting] / neg_sum[exporting]

    imported = float(np.sum(net[importing]))
    exported = float(-np.sum(net[exporting]))
    import_cost = float(np.sum(pos_cost * scale_imp))
    export_revenue = float(np.sum(neg_revenue * scale_exp))
    return SettlementResult(
        imported_kwh=imported,
        exported_kwh=exported,
        import_cost_eur=import_cost,
        export_revenue_eur=export_revenue,
        bill_eur=import_cost - export_revenue,
    )


def validate_tariff(tariff: Tariff, c_deg: float) -> list[str]:
    """No-arbitrage violations: every import price must exceed every export price."""
    violations = []
    min_imp = float(tariff.import_minute_prices.min())
    max_exp = float(tariff.export_minute_prices.max())
    if not min_imp > max_exp:
        violations.append(
            f"no-arbitrage violated: cheapest import price {min_imp:.4f} EUR/kWh "
            f"does not exceed highest export price {max_exp:.4f} EUR/kWh"
        )
    return violations


def tariff_notes(tariff: Tariff, c_deg: float) -> list[str]:
    """Informational observations, e.g. whether battery-to-grid export ever pays off."""
    notes = []
    min_exp = float(tariff.export_minute_prices.min())
    if min_exp < c_deg:
        notes.append(
            f"export price falls to {min_exp:.4f} EUR/kWh, below the degradation "
            f"price {c_deg:.4f} EUR/kWh: discharging the battery to export is a net loss"
        )
    return notes
