"""Evaluation metrics: cost reports, relative performance, ranking,
underestimation and shrinkage."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from gridshed.tariff import SettlementResult


@dataclass(frozen=True)
class CostReport:
    """Settled energies and costs of one simulated run."""

    imported_kwh: float
    exported_kwh: float
    import_cost_eur: float
    export_revenue_eur: float
    discharged_kwh: float
    degradation_eur: float
    bill_eur: float  # import_cost - export_revenue
    total_eur: float  # bill + degradation

    @classmethod
    def build(cls, settlement: SettlementResult, discharged_kwh: float,
              degradation_eur: float) -> "CostReport":
        bill = settlement.bill_eur
        return cls(
            imported_kwh=settlement.imported_kwh,
            exported_kwh=settlement.exported_kwh,
            import_cost_eur=settlement.import_cost_eur,
            export_revenue_eur=settlement.export_revenue_eur,
            discharged_kwh=discharged_kwh,
            degradation_eur=degradation_eur,
            bill_eur=bill,
            total_eur=bill + degradation_eur,
        )


def relative_performance(model_total: float, rbc_total: float) -> float:
    """Percent change of total costs relative to the rule-based baseline."""
    if rbc_total == 0.0:
        raise ValueError("baseline total is zero; relative performance undefined")
    return 100.0 * (model_total - rbc_total) / rbc_total


def ranking(per_building_totals: Mapping[str, Sequence[float]]) -> dict[str, float]:
    """Average placement of each model when ranked per building by total cost.

    Ties share the mean of the tied rank positions.
    """
    models = list(per_building_totals)
    if not models:
        raise ValueError("no models to rank")
    lengths = {len(per_building_totals[m]) for m in models}
    if len(lengths) != 1:
        raise ValueError(f"per-model lists differ in length: {sorted(lengths)}")
    (n_buildings,) = lengths
    if n_buildings == 0:
        raise ValueError("need at least one building")
    totals = np.array([per_building_totals[m] for m in models])
    ranks = np.apply_along_axis(lambda col: rankdata(col, method="average"), 0, totals)
    return {m: float(ranks[i].mean()) for i, m in enumerate(models)}


def underestimation(avg_total: float, fine_total: float) -> float:
    """Percent by which the averaged evaluation understates the fine-resolution cost."""
    if avg_total <= 0.0:
        raise ValueError(f"averaged total must be positive, got {avg_total}")
    return 100.0 * (fine_total - avg_total) / avg_total


def shrinkage(advantage_averaged: float, advantage_fine: float) -> float:
    """Percent of the cost advantage (baseline minus model) lost under fine evaluation.

    Values above 100 mean the advantage reverses and the baseline wins.
    """
    if advantage_averaged == 0.0:
        raise ValueError("averaged advantage is zero; shrinkage undefined")
    return 100.0 * (1.0 - advantage_fine / advantage_averaged)


def mean_report(reports: Sequence[CostReport]) -> CostReport:
    """Field-wise arithmetic mean across buildings."""
    if not reports:
        raise ValueError("cannot average an empty group of reports")
    return CostReport(
        **{
            f.name: float(np.mean([getattr(r, f.name) for r in reports]))
            for f in fields(CostReport)
        }
    )


@dataclass(frozen=True)
class ReportRow:
    """One aggregated table row: a model's mean report plus comparison columns."""

    model: str
    mean: CostReport
    rel_perf_pct: float | None  # None for the baseline itself
    ranking: float


def aggregate_report(
    group: Mapping[str, Sequence[CostReport]], baseline: str
) -> list[ReportRow]:
    """Aggregate one comparison group (same scheduling step and evaluation mode).

    `group` maps model label to per-building reports in a shared building
    order. Relative performance compares mean totals against `baseline`.
    """
    if baseline not in group:
        raise ValueError(f"baseline {baseline!r} missing from group {sorted(group)}")
    if any(len(reports) == 0 for reports in group.values()):
        raise ValueError("empty report list in group")
    means = {model: mean_report(reports) for model, reports in group.items()}
    ranks = ranking({m: [r.total_eur for r in reports] for m, reports in group.items()})
    baseline_total = means[baseline].total_eur
    rows = []
    for model, mean in means.items():
        rel = None if model == baseline else relative_performance(mean.total_eur, baseline_total)
        rows.append(ReportRow(model=model, mean=mean, rel_perf_pct=rel, ranking=ranks[model]))
    rows.sort(key=lambda row: row.mean.total_eur)
    return rows
