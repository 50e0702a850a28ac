"""Command-line interface: simulate, replicate, validate-config.

Outputs land under the configured output directory: report.csv with
per-configuration means, cells.csv with one row per (building, model) cell,
and manifest.json capturing the fully resolved configuration for
reproducible re-runs. The replicate command additionally emits
underestimation.csv, shrinkage.csv and shrinkage_per_building.csv.

Exit codes: 0 success, 1 config error, 2 data error, 3 solver/verification
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import gridshed
from gridshed.config import (
    ResolvedExperiment,
    load_buildings,
    load_config,
    manifest_dict,
    merge_defaults,
    resolve_config,
    write_manifest,
)
from gridshed.errors import ConfigError, DataError, SolverError
from gridshed.metrics import ReportRow, aggregate_report, mean_report, shrinkage, underestimation
from gridshed.simulation import (
    ALLOWED_DELTA_S_MINUTES,
    EvaluationMode,
    ExperimentCell,
    ExperimentReport,
    SimulationConfig,
    run_experiment,
)
from gridshed.tariff import tariff_notes, validate_tariff
from gridshed.timeseries import AlignmentError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

REPORT_HEADER = (
    "model,delta_s_min,delta_gt_min,imp_kwh,cost_imp_eur,exp_kwh,rev_exp_eur,"
    "e_dis_kwh,degrad_eur,bill_eur,total_eur,rel_perf_pct,ranking"
)

REPLICATE_MODELS = (
    {"controller": "rbc"},
    {"controller": "mpc_const_grid", "forecast": "ideal"},
    {"controller": "mpc_const_grid", "forecast": "persistence"},
    {"controller": "mpc_const_bat", "forecast": "ideal"},
)
MPC_IDEAL_CG = "mpc_ideal_const_grid"
RBC = "rbc"


def _report_values(report) -> str:
    return ",".join(
        f"{v:.2f}"
        for v in (
            report.imported_kwh,
            report.import_cost_eur,
            report.exported_kwh,
            report.export_revenue_eur,
            report.discharged_kwh,
            report.degradation_eur,
            report.bill_eur,
            report.total_eur,
        )
    )


def _write_report_csv(path: Path, groups: list[tuple[SimulationConfig, list[ReportRow]]]) -> None:
    lines = [REPORT_HEADER]
    for sample_cfg, rows in groups:
        for row in rows:
            rel = "" if row.rel_perf_pct is None else f"{row.rel_perf_pct:.1f}"
            lines.append(
                f"{row.model},{sample_cfg.delta_s.step_minutes},"
                f"{sample_cfg.delta_gt.step_minutes},{_report_values(row.mean)},"
                f"{rel},{row.ranking:.2f}"
            )
    path.write_text("\n".join(lines) + "\n")


def _write_cells_csv(path: Path, cells: Sequence[ExperimentCell]) -> None:
    lines = [
        "building,model,delta_s_min,delta_gt_min,imp_kwh,cost_imp_eur,exp_kwh,"
        "rev_exp_eur,e_dis_kwh,degrad_eur,bill_eur,total_eur,status"
    ]
    for cell in cells:
        cfg = cell.config
        prefix = (
            f"{cell.building_id},{cfg.model_label()},"
            f"{cfg.delta_s.step_minutes},{cfg.delta_gt.step_minutes}"
        )
        if cell.ok:
            lines.append(f"{prefix},{_report_values(cell.result.report)},ok")
        else:
            lines.append(f"{prefix},,,,,,,,,{cell.error}")
    path.write_text("\n".join(lines) + "\n")


def _write_trace_csv(out_dir: Path, cells: Sequence[ExperimentCell]) -> None:
    for cell in cells:
        if not cell.ok:
            continue
        cfg = cell.config
        result = cell.result
        name = (
            f"trace_{cell.building_id}_{cfg.model_label()}_"
            f"s{cfg.delta_s.step_minutes}_{cfg.mode.value}.csv"
        )
        lines = ["step,p_l_kw,p_b_kw,p_g_kw,soe_kwh"]
        for i in range(len(result.p_b)):
            lines.append(
                f"{i},{result.net_load.values[i]:.6f},{result.p_b.values[i]:.6f},"
                f"{result.p_g.values[i]:.6f},{result.soe[i + 1]:.6f}"
            )
        (out_dir / name).write_text("\n".join(lines) + "\n")


def _write_plans_csv(out_dir: Path, cells: Sequence[ExperimentCell]) -> None:
    for cell in cells:
        if not cell.ok or cell.result.plans is None:
            continue
        cfg = cell.config
        name = (
            f"plans_{cell.building_id}_{cfg.model_label()}_"
            f"s{cfg.delta_s.step_minutes}_{cfg.mode.value}.csv"
        )
        lines = ["origin,step,p_b_kw,p_g_kw,p_imp_kw,p_exp_kw,p_ch_kw,p_dis_kw,e_kwh,objective_eur"]
        for plan in cell.result.plans:
            for k in range(len(plan)):
                lines.append(
                    f"{plan.origin.isoformat()},{k},{plan.p_b[k]:.6f},{plan.p_g[k]:.6f},"
                    f"{plan.p_imp[k]:.6f},{plan.p_exp[k]:.6f},{plan.p_ch[k]:.6f},"
                    f"{plan.p_dis[k]:.6f},{plan.e[k + 1]:.6f},{plan.objective_value:.6f}"
                )
        (out_dir / name).write_text("\n".join(lines) + "\n")


def _grouped_rows(
    report: ExperimentReport, matrix: Sequence[SimulationConfig]
) -> list[tuple[SimulationConfig, list[ReportRow]]]:
    """Aggregate cells into one comparison group per (mode, delta_s)."""
    group_keys: list[tuple[EvaluationMode, int]] = []
    for cfg in matrix:
        key = (cfg.mode, cfg.delta_s.step_minutes)
        if key not in group_keys:
            group_keys.append(key)
    grouped = []
    for mode, delta_s in group_keys:
        members = [
            c for c in matrix if c.mode is mode and c.delta_s.step_minutes == delta_s
        ]
        reports = {}
        for cfg in members:
            cells = [c for c in report.results_for(cfg) if c.ok]
            if cells:
                reports[cfg.model_label()] = [c.result.report for c in cells]
        if not reports:
            continue
        baseline = RBC if RBC in reports else next(iter(reports))
        grouped.append((members[0], aggregate_report(reports, baseline)))
    return grouped


def _exit_code_for_failures(report: ExperimentReport) -> int:
    for cell in report.failures:
        print(f"cell failed: building={cell.building_id} "
              f"model={cell.config.model_label()} "
              f"delta_s={cell.config.delta_s.step_minutes} "
              f"mode={cell.config.mode.value}: {cell.error}", file=sys.stderr)
    kinds = {cell.error.split(":", 1)[0] for cell in report.failures}
    if "SolverError" in kinds:
        return EXIT_SOLVER
    if kinds & {"ConfigError", "ValueError"}:
        return EXIT_CONFIG
    return EXIT_DATA


def _apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["output_dir"] = args.out
    sims = doc.get("simulations")
    if isinstance(sims, list):
        for entry in sims:
            if not isinstance(entry, dict):
                continue
            if args.delta_s is not None:
                entry["delta_s_min"] = args.delta_s
                entry.pop("delta_gt_min", None)
            if args.mode is not None:
                entry["mode"] = args.mode
                entry.pop("delta_gt_min", None)
            if args.controller is not None:
                entry["controller"] = args.controller
    return doc


def _run_and_write(
    resolved: ResolvedExperiment,
    matrix: list[SimulationConfig],
    config_path: str | None,
    args: argparse.Namespace,
) -> tuple[ExperimentReport, Path]:
    buildings = load_buildings(resolved)
    report = run_experiment(
        matrix,
        buildings,
        sim_days=resolved.sim_days,
        max_workers=resolved.workers,
        collect_plans=getattr(args, "dump_plans", False),
    )
    out_dir = Path(resolved.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_cells_csv(out_dir / "cells.csv", report.cells)
    _write_report_csv(out_dir / "report.csv", _grouped_rows(report, matrix))
    write_manifest(
        out_dir / "manifest.json",
        manifest_dict(resolved, config_path, gridshed.__version__),
    )
    if getattr(args, "trace", False):
        _write_trace_csv(out_dir, report.cells)
    if getattr(args, "dump_plans", False):
        _write_plans_csv(out_dir, report.cells)
    return report, out_dir


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = _apply_overrides(load_config(args.config), args)
    resolved = resolve_config(doc)
    report, out_dir = _run_and_write(resolved, resolved.matrix, args.config, args)
    print(f"wrote {out_dir / 'report.csv'} ({len(report.cells)} cells)")
    if report.failures:
        return _exit_code_for_failures(report)
    return EXIT_OK


def _replicate_matrix_doc(delta_s_values: Sequence[int]) -> list[dict]:
    entries = []
    for mode in ("fully_averaged", "fine_resolution"):
        for delta_s in delta_s_values:
            for model in REPLICATE_MODELS:
                entries.append({**model, "mode": mode, "delta_s_min": delta_s})
    return entries


def cmd_replicate(args: argparse.Namespace) -> int:
    doc = load_config(args.config) if args.config else {}
    doc = merge_defaults(doc)
    delta_s_values = [args.delta_s] if args.delta_s is not None else list(ALLOWED_DELTA_S_MINUTES)
    doc["simulations"] = _replicate_matrix_doc(delta_s_values)
    doc = _apply_overrides(doc, argparse.Namespace(
        seed=args.seed, out=args.out, delta_s=None, mode=None, controller=None,
    ))
    resolved = resolve_config(doc)
    report, out_dir = _run_and_write(resolved, resolved.matrix, args.config, args)
    if report.failures:
        return _exit_code_for_failures(report)

    _check_rbc_invariance(report, resolved, delta_s_values)
    _write_underestimation_csv(out_dir / "underestimation.csv", report, resolved, delta_s_values)
    _write_shrinkage_csvs(out_dir, report, resolved, delta_s_values)
    print(f"wrote replication tables under {out_dir}")
    return EXIT_OK


def _cells_by(
    report: ExperimentReport, resolved: ResolvedExperiment,
    model: str, delta_s: int, mode: EvaluationMode,
) -> list[ExperimentCell]:
    cfg = next(
        c for c in resolved.matrix
        if c.model_label() == model and c.delta_s.step_minutes == delta_s and c.mode is mode
    )
    return [c for c in report.results_for(cfg) if c.ok]


def _check_rbc_invariance(
    report: ExperimentReport, resolved: ResolvedExperiment, delta_s_values: Sequence[int]
) -> None:
    """Fine-resolution RBC ignores delta_s, so its reports must match exactly."""
    if len(delta_s_values) < 2:
        return
    reference = None
    for delta_s in delta_s_values:
        cells = _cells_by(report, resolved, RBC, delta_s, EvaluationMode.FINE_RESOLUTION)
        reports = [c.result.report for c in cells]
        if reference is None:
            reference = reports
        elif reports != reference:
            raise SolverError(
                "verification failed: fine-resolution RBC results differ across delta_s"
            )
    print("[check] fine-resolution RBC identical across delta_s: ok")


def _write_underestimation_csv(
    path: Path, report: ExperimentReport, resolved: ResolvedExperiment,
    delta_s_values: Sequence[int],
) -> None:
    models = {cfg.model_label() for cfg in resolved.matrix}
    lines = ["model,delta_s_min,avg_total_eur,fine_total_eur,underestimation_pct"]
    for model in sorted(models):
        for delta_s in delta_s_values:
            avg_cells = _cells_by(report, resolved, model, delta_s, EvaluationMode.FULLY_AVERAGED)
            fine_cells = _cells_by(report, resolved, model, delta_s, EvaluationMode.FINE_RESOLUTION)
            if not avg_cells or not fine_cells:
                continue
            avg_total = mean_report([c.result.report for c in avg_cells]).total_eur
            fine_total = mean_report([c.result.report for c in fine_cells]).total_eur
            pct = underestimation(avg_total, fine_total)
            lines.append(f"{model},{delta_s},{avg_total:.2f},{fine_total:.2f},{pct:.1f}")
    path.write_text("\n".join(lines) + "\n")


def _write_shrinkage_csvs(
    out_dir: Path, report: ExperimentReport, resolved: ResolvedExperiment,
    delta_s_values: Sequence[int],
) -> None:
    summary = ["delta_s_min,shrinkage_of_mean_totals_pct,mean_building_shrinkage_pct"]
    per_building = ["building,delta_s_min,advantage_avg_eur,advantage_fine_eur,shrinkage_pct"]
    for delta_s in delta_s_values:
        groups = {}
        for model in (RBC, MPC_IDEAL_CG):
            for mode in EvaluationMode:
                groups[(model, mode)] = _cells_by(report, resolved, model, delta_s, mode)
        if not all(groups.values()):
            continue
        totals = {
            key: [c.result.report.total_eur for c in cells] for key, cells in groups.items()
        }
        buildings = [c.building_id for c in groups[(RBC, EvaluationMode.FULLY_AVERAGED)]]

        building_shrinkages = []
        for i, building in enumerate(buildings):
            adv_avg = (
                totals[(RBC, EvaluationMode.FULLY_AVERAGED)][i]
                - totals[(MPC_IDEAL_CG, EvaluationMode.FULLY_AVERAGED)][i]
            )
            adv_fine = (
                totals[(RBC, EvaluationMode.FINE_RESOLUTION)][i]
                - totals[(MPC_IDEAL_CG, EvaluationMode.FINE_RESOLUTION)][i]
            )
            pct = shrinkage(adv_avg, adv_fine)
            building_shrinkages.append(pct)
            per_building.append(
                f"{building},{delta_s},{adv_avg:.2f},{adv_fine:.2f},{pct:.1f}"
            )

        mean_adv_avg = (
            sum(totals[(RBC, EvaluationMode.FULLY_AVERAGED)])
            - sum(totals[(MPC_IDEAL_CG, EvaluationMode.FULLY_AVERAGED)])
        ) / len(buildings)
        mean_adv_fine = (
            sum(totals[(RBC, EvaluationMode.FINE_RESOLUTION)])
            - sum(totals[(MPC_IDEAL_CG, EvaluationMode.FINE_RESOLUTION)])
        ) / len(buildings)
        of_means = shrinkage(mean_adv_avg, mean_adv_fine)
        mean_of = sum(building_shrinkages) / len(building_shrinkages)
        summary.append(f"{delta_s},{of_means:.1f},{mean_of:.1f}")
    (out_dir / "shrinkage.csv").write_text("\n".join(summary) + "\n")
    (out_dir / "shrinkage_per_building.csv").write_text("\n".join(per_building) + "\n")


def cmd_validate_config(args: argparse.Namespace) -> int:
    resolved = resolve_config(load_config(args.config))
    print(f"config ok: {args.config}")
    print(f"  seed={resolved.seed} output_dir={resolved.output_dir} "
          f"sim_days={resolved.sim_days} horizon_hours={resolved.horizon_hours}")
    print(f"  battery: e=[{resolved.spec.e_min}, {resolved.spec.e_max}] kWh, "
          f"p=[{resolved.spec.p_min}, {resolved.spec.p_max}] kW, "
          f"eta={resolved.spec.eta_ch}/{resolved.spec.eta_dis}, "
          f"c_deg={resolved.spec.c_deg} EUR/kWh, initial_soe={resolved.initial_soe} kWh")
    print(f"  data: {resolved.data}")
    print(f"  models: {[cfg.model_label() for cfg in resolved.matrix]}")
    violations = validate_tariff(resolved.tariff, resolved.spec.c_deg)
    for violation in violations:
        print(f"  tariff violation: {violation}")
    for note in tariff_notes(resolved.tariff, resolved.spec.c_deg):
        print(f"  note: {note}")
    return EXIT_CONFIG if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshed",
        description="PV-battery scheduling simulator with netting-interval settlement",
    )
    parser.add_argument("--version", action="version", version=f"gridshed {gridshed.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required: bool):
        if config_required:
            p.add_argument("--config", required=True, help="YAML config (or manifest.json)")
        else:
            p.add_argument("--config", help="YAML config (or manifest.json); defaults apply if omitted")
        p.add_argument("--seed", type=int, help="override the manifest seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--delta-s", type=int, dest="delta_s",
                       choices=ALLOWED_DELTA_S_MINUTES, help="override the scheduling step")
        p.add_argument("--trace", action="store_true", help="write per-step trace CSVs")
        p.add_argument("--dump-plans", action="store_true", dest="dump_plans",
                       help="write per-plan dispatch CSVs (debugging)")

    sim = sub.add_parser("simulate", help="run the configured simulation matrix")
    add_common(sim, config_required=True)
    sim.add_argument("--mode", choices=[m.value for m in EvaluationMode],
                     help="override the evaluation mode")
    sim.add_argument("--controller", choices=["rbc", "mpc_const_grid", "mpc_const_bat"],
                     help="override the controller")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replicate", help="run the full controller x delta_s x mode grid")
    add_common(rep, config_required=False)
    rep.set_defaults(func=cmd_replicate)

    val = sub.add_parser("validate-config", help="resolve and validate a config, no simulation")
    val.add_argument("--config", required=True, help="YAML config (or manifest.json)")
    val.set_defaults(func=cmd_validate_config)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, AlignmentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
