"""Command orchestration: scenario assembly, runs and manifests."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

from steamflex import __version__
from steamflex.config import RunConfig, ScenarioConfig, SeriesSource, price_unit_factor
from steamflex.optimize.dispatch import extract_kpis, log_dispatch_summary, solve_dispatch
from steamflex.optimize.economics import annual_scale_for, cost_breakdown
from steamflex.optimize.search import (
    SizingOutcome,
    SizingProblem,
    SweepResult,
    preheat_sweep,
    sensitivity_sweep,
    size_system,
)
from steamflex.output import (
    best_config_payload,
    cost_payload,
    file_sha256,
    kpis_payload,
    prepare_output_dir,
    write_de_trace_csv,
    write_dispatch_csv,
    write_json,
    write_sweep_csv,
)
from steamflex.shared.errors import ConfigError
from steamflex.shared.log import eprint, vprint
from steamflex.shared.units import parse_quantity
from steamflex.system.market import (
    ColumnSpec,
    FcrMarket,
    Scenario,
    TariffSchedule,
    TimeSeries,
    apply_weekend_scaling,
    assemble_scenario,
    check_leap_year_horizon,
    convert_currency,
    extend_periodic,
    lint_scenario,
    load_timeseries,
    resample_mean,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
SWEEP_KINDS = ("sensitivity", "preheat")


def _to_step(ts: TimeSeries, dt: int) -> TimeSeries:
    if ts.dt == dt:
        return ts
    return resample_mean(ts, dt)


def _load_price(src: SeriesSource, base_unit: str, rates: Dict[str, float], dt: int) -> TimeSeries:
    currency, factor = price_unit_factor(src.unit, base_unit)
    suffix = base_unit.split("/", 1)[1]
    ts = load_timeseries(src.path, f"{currency}/{suffix}", ColumnSpec(src.timestamp, src.value))
    ts = ts.with_values(ts.values * factor)
    if currency != "EUR":
        if currency not in rates:
            raise ConfigError(f"no conversion rate for {currency} (set scenario.currency_rates.{currency})")
        ts = convert_currency(ts, rates[currency])
    return _to_step(ts, dt)


def build_scenario(sc: ScenarioConfig, seed: int) -> Scenario:
    """Load, convert and align every input series into a validated scenario."""
    spot = _load_price(sc.spot, "EUR/kWh", sc.currency_rates, sc.dt)
    fcr_price = _load_price(sc.fcr, "EUR/kW", sc.currency_rates, sc.dt)

    factor = parse_quantity(f"1 {sc.demand.unit}", "kg/s", "scenario.demand.unit")
    demand = load_timeseries(sc.demand.path, "kg/s", ColumnSpec(sc.demand.timestamp, sc.demand.value))
    demand = _to_step(demand.with_values(demand.values * factor), sc.dt)
    if sc.align_demand:
        demand = extend_periodic(demand, len(spot)).rebase(spot.start)
    demand = apply_weekend_scaling(demand, sc.weekend_factor)

    volumetric = sc.tariff_volumetric
    if isinstance(volumetric, SeriesSource):
        volumetric = _load_price(volumetric, "EUR/kWh", sc.currency_rates, sc.dt)
    tariff = TariffSchedule(volumetric=volumetric, capacity=sc.tariff_capacity, months_per_horizon=sc.months_per_horizon)
    fcr = FcrMarket.from_price(fcr_price, sc.acceptance_fraction, seed)

    scenario = assemble_scenario(spot, tariff, fcr, demand, label=sc.label)
    if sc.annual_check:
        check_leap_year_horizon(scenario)
    if sc.slice is not None:
        scenario = scenario.slice(*sc.slice)
    vprint(f"[ok] scenario {scenario.label!r}: {scenario.horizon_steps} steps of {scenario.dt} s")
    return scenario


def sizing_problem(cfg: RunConfig, scenario: Scenario) -> SizingProblem:
    return SizingProblem(
        scenario=scenario,
        params=cfg.steam,
        battery=cfg.battery,
        economics=cfg.economics,
        tol=cfg.tol,
        backend=cfg.backend,
    )


def write_manifest(cfg: RunConfig, command: str, out_dir: Path, outputs: List[Path]) -> Path:
    """Everything needed to repeat the run; no wall-clock data."""
    inputs = {}
    if cfg.scenario is not None:
        for name, path in sorted(cfg.scenario.input_files().items()):
            inputs[name] = {"path": str(path), "sha256": file_sha256(path)}
    payload = {
        "command": command,
        "version": __version__,
        "preset": cfg.preset,
        "seed": cfg.seed,
        "de_seed": cfg.de.seed,
        "config_sha256": cfg.config_hash(),
        "config_path": str(cfg.source_path) if cfg.source_path else None,
        "backend": cfg.backend,
        "tol": cfg.tol,
        "inputs": inputs,
        "outputs": [p.name for p in outputs],
    }
    path = out_dir / "manifest.json"
    write_json(payload, path)
    return path


def _announce(paths: List[Path]) -> None:
    for p in paths:
        eprint(f"[ok] wrote: {p}")


def run_dispatch(cfg: RunConfig) -> int:
    system = cfg.require_system()
    scenario = build_scenario(cfg.require_scenario(), cfg.seed)
    out_dir = prepare_output_dir(str(cfg.out_dir))

    result = solve_dispatch(scenario, system, cfg.steam, cfg.battery, tol=cfg.tol, backend=cfg.backend)
    if not result.is_optimal:
        manifest = write_manifest(cfg, "dispatch", out_dir, [])
        _announce([manifest])
        log_dispatch_summary(result)
        eprint(f"error: {result.message}")
        return EXIT_INFEASIBLE if result.is_infeasible else EXIT_ERROR

    for w in result.warnings:
        eprint(f"[warn] {w}")
    kpis = extract_kpis(result, scenario, system)
    breakdown = cost_breakdown(result, scenario, tol=max(cfg.tol, 1e-6))

    outputs = [out_dir / "dispatch_series.csv", out_dir / "kpis.json", out_dir / "cost_breakdown.json"]
    write_dispatch_csv(result, scenario, outputs[0])
    write_json(kpis_payload(kpis, result.warnings), outputs[1])
    write_json(cost_payload(breakdown), outputs[2])
    outputs.append(write_manifest(cfg, "dispatch", out_dir, outputs))
    _announce(outputs)
    log_dispatch_summary(result)
    eprint(
        f"[summary] net energy cost {breakdown.net_energy_cost:.0f} EUR, "
        f"grid energy {kpis.total_grid_energy_Wh / 1e6:.3f} MWh"
    )
    return EXIT_OK


def _summarize_sizing(outcome: SizingOutcome) -> None:
    ref = outcome.reference
    eprint(f"[summary] reference: P_eb {ref.config.P_eb_max / 1e3:.1f} kW, NPV {ref.npv:.0f} EUR")
    feasible = len(outcome.grid.feasible_cells())
    eprint(f"[summary] grid: {feasible}/{len(outcome.grid.cells)} feasible cells")
    if outcome.best is None:
        eprint("[summary] no feasible configuration in the search space")
        return
    c = outcome.best.config
    eprint(
        f"[summary] best: P_eb {c.P_eb_max / 1e3:.1f} kW, M_sa {c.M_sa_max:.1f} kg, "
        f"Q_b {c.Q_b_max / 1e3:.1f} kWh, c-rate {c.c_rate:.3g} 1/h, ΔNPV {outcome.best_delta_npv:.0f} EUR"
    )


def run_size(cfg: RunConfig) -> int:
    space = cfg.require_search()
    scenario = build_scenario(cfg.require_scenario(), cfg.seed)
    out_dir = prepare_output_dir(str(cfg.out_dir))
    if scenario.is_slice:
        eprint("[warn] sizing on a representative slice; figures are annualised by horizon length")

    outcome = size_system(space, sizing_problem(cfg, scenario), cfg.de, jobs=cfg.jobs)
    outputs = [out_dir / "grid.csv"]
    write_sweep_csv(outcome.grid, outputs[0])
    if outcome.de is not None:
        outputs.append(out_dir / "de_trace.csv")
        write_de_trace_csv(outcome.de, outputs[-1])
    outputs.append(out_dir / "best_config.json")
    write_json(best_config_payload(outcome, cfg.economics.investment, annual_scale_for(scenario)), outputs[-1])
    outputs.append(write_manifest(cfg, "size", out_dir, outputs))
    _announce(outputs)
    _summarize_sizing(outcome)
    return EXIT_OK if outcome.best is not None else EXIT_INFEASIBLE


def run_sweep(cfg: RunConfig, kind: str) -> int:
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"unknown sweep kind {kind!r} (expected one of: {', '.join(SWEEP_KINDS)})")
    space = cfg.require_search()
    scenario = build_scenario(cfg.require_scenario(), cfg.seed)
    out_dir = prepare_output_dir(str(cfg.out_dir))
    problem = sizing_problem(cfg, scenario)

    sweep: SweepResult
    if kind == "sensitivity":
        spec = cfg.sensitivity
        if spec is None:
            raise ConfigError("sweep kind 'sensitivity' needs a 'sweep.sensitivity' section")
        sweep = sensitivity_sweep(space, problem, spec.f_sa, spec.f_b, cfg.de, jobs=cfg.jobs, run_de=spec.run_de)
    else:
        spec = cfg.preheat
        if spec is None:
            raise ConfigError("sweep kind 'preheat' needs a 'sweep.preheat' section")
        sweep = preheat_sweep(space, problem, spec.T0, axis=spec.axis, axis_values=spec.values,
                              base_config=spec.base, jobs=cfg.jobs)

    outputs = [out_dir / f"sweep_{kind}.csv"]
    write_sweep_csv(sweep, outputs[0])
    outputs.append(write_manifest(cfg, f"sweep:{kind}", out_dir, outputs))
    _announce(outputs)
    feasible = len(sweep.feasible_cells())
    eprint(f"[summary] {kind} sweep: {feasible}/{len(sweep.cells)} feasible cells, axes {list(sweep.axes)}")
    return EXIT_OK


def run_validate(cfg: RunConfig) -> int:
    scenario = build_scenario(cfg.require_scenario(), cfg.seed)
    warnings = lint_scenario(scenario)
    for w in warnings:
        eprint(f"[warn] {w}")
    eprint(
        f"[ok] scenario {scenario.label!r} valid: {scenario.horizon_steps} steps of {scenario.dt} s "
        f"from {scenario.start.isoformat()}, {len(warnings)} warning(s)"
    )
    return EXIT_OK
