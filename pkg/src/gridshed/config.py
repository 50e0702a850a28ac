"""Configuration loading, validation and run manifests.

One structured YAML file drives everything; a written manifest embeds the
fully resolved configuration so re-running from the manifest reproduces the
outputs byte for byte.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from gridshed.battery import BatterySpec
from gridshed.errors import ConfigError, DataError
from gridshed.ingest import BuildingDataset, generate_fleet, load_csv
from gridshed.simulation import (
    ALLOWED_DELTA_S_MINUTES,
    Controller,
    EvaluationMode,
    ForecastSource,
    SimulationConfig,
)
from gridshed.tariff import Tariff, validate_tariff
from gridshed.timeseries import Resolution

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 42,
    "output_dir": "out",
    "sim_days": None,
    "workers": None,
    "horizon_hours": 24,
    "data": {
        "source": "synthetic",
        "buildings": 15,
        "days": 14,
        "panel_range": [16, 38],
    },
    "battery": {
        "e_min_kwh": 0.0,
        "e_max_kwh": 13.8,
        "p_min_kw": -5.0,
        "p_max_kw": 5.0,
        "eta_ch": 0.98,
        "eta_dis": 0.98,
        "c_deg_eur_per_kwh": 0.084,
        "initial_soe_kwh": 0.0,
    },
    "tariff": {
        "import": [
            {"start_minute": 0, "price_eur_per_kwh": 0.22},
            {"start_minute": 360, "price_eur_per_kwh": 0.32},
            {"start_minute": 1020, "price_eur_per_kwh": 0.42},
            {"start_minute": 1260, "price_eur_per_kwh": 0.22},
        ],
        "export": [
            {"start_minute": 0, "price_eur_per_kwh": 0.07},
        ],
    },
    "simulations": [
        {"controller": "rbc", "mode": "fine_resolution", "delta_s_min": 60},
    ],
}


@dataclass(frozen=True)
class ResolvedExperiment:
    seed: int
    output_dir: str
    sim_days: int | None
    workers: int | None
    horizon_hours: int
    spec: BatterySpec
    initial_soe: float
    tariff: Tariff
    data: dict[str, Any]
    matrix: list[SimulationConfig]
    raw: dict[str, Any]  # the fully merged config this was resolved from


def load_config(path: str) -> dict[str, Any]:
    """Parse a YAML config file; manifests are accepted via their embedded config."""
    try:
        with open(path) as handle:
            doc = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "resolved_config" in doc:
        doc = doc["resolved_config"]
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: manifest key 'resolved_config' must be a mapping")
    return doc


def merge_defaults(doc: dict[str, Any]) -> dict[str, Any]:
    """Overlay the user document onto the shipped defaults (one level deep)."""
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def _require(doc: dict, key: str, kind: type, context: str):
    if key not in doc:
        raise ConfigError(f"{context}.{key}: missing required key")
    value = doc[key]
    if isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{context}.{key}: expected {kind.__name__}, got {value!r}")
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{context}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _battery_from(doc: dict[str, Any]) -> tuple[BatterySpec, float]:
    try:
        spec = BatterySpec(
            e_min=_require(doc, "e_min_kwh", float, "battery"),
            e_max=_require(doc, "e_max_kwh", float, "battery"),
            p_min=_require(doc, "p_min_kw", float, "battery"),
            p_max=_require(doc, "p_max_kw", float, "battery"),
            eta_ch=_require(doc, "eta_ch", float, "battery"),
            eta_dis=_require(doc, "eta_dis", float, "battery"),
            c_deg=_require(doc, "c_deg_eur_per_kwh", float, "battery"),
        )
    except ValueError as exc:
        raise ConfigError(f"battery: {exc}") from exc
    initial = float(doc.get("initial_soe_kwh", spec.e_min))
    if not spec.e_min <= initial <= spec.e_max:
        raise ConfigError(
            f"battery.initial_soe_kwh: {initial} outside [{spec.e_min}, {spec.e_max}]"
        )
    return spec, initial


def _curve_from(entries: Any, context: str) -> tuple[tuple[int, float], ...]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{context}: expected a non-empty list of segments")
    curve = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"{context}[{i}]: expected a mapping")
        start = _require(entry, "start_minute", int, f"{context}[{i}]")
        price = _require(entry, "price_eur_per_kwh", float, f"{context}[{i}]")
        curve.append((start, price))
    return tuple(curve)


def _tariff_from(doc: dict[str, Any], c_deg: float) -> Tariff:
    try:
        tariff = Tariff(
            import_curve=_curve_from(doc.get("import"), "tariff.import"),
            export_curve=_curve_from(doc.get("export"), "tariff.export"),
        )
    except ValueError as exc:
        raise ConfigError(f"tariff: {exc}") from exc
    violations = validate_tariff(tariff, c_deg)
    if violations:
        raise ConfigError("tariff: " + "; ".join(violations))
    return tariff


_CONTROLLERS = {c.value: c for c in Controller}
_SOURCES = {s.value: s for s in ForecastSource}
_MODES = {m.value: m for m in EvaluationMode}


def _simulation_from(
    entry: Any,
    index: int,
    spec: BatterySpec,
    initial_soe: float,
    tariff: Tariff,
    horizon_hours: int,
    seed: int,
) -> SimulationConfig:
    context = f"simulations[{index}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{context}: expected a mapping")

    controller_name = _require(entry, "controller", str, context)
    if controller_name not in _CONTROLLERS:
        raise ConfigError(f"{context}.controller: unknown {controller_name!r}, "
                          f"expected one of {sorted(_CONTROLLERS)}")
    controller = _CONTROLLERS[controller_name]

    mode_name = _require(entry, "mode", str, context)
    if mode_name not in _MODES:
        raise ConfigError(f"{context}.mode: unknown {mode_name!r}, "
                          f"expected one of {sorted(_MODES)}")
    mode = _MODES[mode_name]

    delta_s_min = _require(entry, "delta_s_min", int, context)
    if delta_s_min not in ALLOWED_DELTA_S_MINUTES:
        raise ConfigError(
            f"{context}.delta_s_min: must be one of {list(ALLOWED_DELTA_S_MINUTES)}, "
            f"got {delta_s_min}"
        )

    source_name = entry.get("forecast", "ideal")
    if source_name not in _SOURCES:
        raise ConfigError(f"{context}.forecast: unknown {source_name!r}, "
                          f"expected one of {sorted(_SOURCES)}")

    derived_gt = delta_s_min if mode is EvaluationMode.FULLY_AVERAGED else 1
    delta_gt_min = entry.get("delta_gt_min", derived_gt)
    if not isinstance(delta_gt_min, int) or delta_gt_min != derived_gt:
        raise ConfigError(
            f"{context}.delta_gt_min: mode {mode_name!r} requires {derived_gt}, "
            f"got {delta_gt_min!r}"
        )

    try:
        return SimulationConfig(
            controller=controller,
            forecast_source=_SOURCES[source_name],
            delta_s=Resolution(delta_s_min),
            delta_gt=Resolution(delta_gt_min),
            mode=mode,
            spec=spec,
            tariff=tariff,
            horizon_hours=horizon_hours,
            initial_soe=initial_soe,
            seed=seed,
            forecast_file=entry.get("forecast_file"),
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _data_section(doc: dict[str, Any]) -> dict[str, Any]:
    data = doc.get("data")
    if not isinstance(data, dict):
        raise ConfigError("data: expected a mapping")
    source = data.get("source")
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"data.source: expected 'synthetic' or 'csv', got {source!r}")
    if source == "csv" and not data.get("csv_path"):
        raise ConfigError("data.csv_path: required when data.source is 'csv'")
    if source == "synthetic":
        buildings = data.get("buildings", 1)
        days = data.get("days", 2)
        if not isinstance(buildings, int) or buildings < 1:
            raise ConfigError(f"data.buildings: expected a positive integer, got {buildings!r}")
        if not isinstance(days, int) or days < 2:
            raise ConfigError(f"data.days: expected an integer >= 2, got {days!r}")
        panel_range = data.get("panel_range", [16, 38])
        if (
            not isinstance(panel_range, list)
            or len(panel_range) != 2
            or not all(isinstance(p, int) for p in panel_range)
            or not 0 <= panel_range[0] <= panel_range[1]
        ):
            raise ConfigError(f"data.panel_range: expected [lo, hi], got {panel_range!r}")
    return data


def resolve_config(doc: dict[str, Any]) -> ResolvedExperiment:
    """Validate a merged config document into runnable objects."""
    merged = merge_defaults(doc)
    seed = _require(merged, "seed", int, "config")
    output_dir = _require(merged, "output_dir", str, "config")
    horizon_hours = _require(merged, "horizon_hours", int, "config")
    sim_days = merged.get("sim_days")
    if sim_days is not None and (not isinstance(sim_days, int) or sim_days < 1):
        raise ConfigError(f"config.sim_days: expected a positive integer or null, got {sim_days!r}")
    workers = merged.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError(f"config.workers: expected a positive integer or null, got {workers!r}")

    battery = merged.get("battery")
    if not isinstance(battery, dict):
        raise ConfigError("battery: expected a mapping")
    spec, initial_soe = _battery_from(battery)
    tariff_doc = merged.get("tariff")
    if not isinstance(tariff_doc, dict):
        raise ConfigError("tariff: expected a mapping")
    tariff = _tariff_from(tariff_doc, spec.c_deg)
    data = _data_section(merged)

    simulations = merged.get("simulations")
    if not isinstance(simulations, list) or not simulations:
        raise ConfigError("simulations: expected a non-empty list")
    matrix = [
        _simulation_from(entry, i, spec, initial_soe, tariff, horizon_hours, seed)
        for i, entry in enumerate(simulations)
    ]

    return ResolvedExperiment(
        seed=seed,
        output_dir=output_dir,
        sim_days=sim_days,
        workers=workers,
        horizon_hours=horizon_hours,
        spec=spec,
        initial_soe=initial_soe,
        tariff=tariff,
        data=data,
        matrix=matrix,
        raw=merged,
    )


def load_buildings(resolved: ResolvedExperiment) -> list[BuildingDataset]:
    data = resolved.data
    if data["source"] == "csv":
        return load_csv(data["csv_path"])
    try:
        return generate_fleet(
            seed=resolved.seed,
            n_buildings=data.get("buildings", 1),
            days=data.get("days", 2),
            panel_range=tuple(data.get("panel_range", [16, 38])),
        )
    except ValueError as exc:
        raise DataError(f"synthetic data generation failed: {exc}") from exc


def manifest_dict(resolved: ResolvedExperiment, config_path: str | None, version: str) -> dict:
    return {
        "tool": "gridshed",
        "version": version,
        "config_path": config_path,
        "seed": resolved.seed,
        "output_dir": resolved.output_dir,
        "data_source": resolved.data,
        "models": [cfg.model_label() for cfg in resolved.matrix],
        "resolved_config": resolved.raw,
    }


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
