"""Run configuration: YAML file, bundled presets and unit strings.

A run config names an optional preset; the user file is deep-merged over it.
Dimensional values are unit strings (``"1702 kW"``); fractions, exponents and
counts are plain numbers.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from steamflex.optimize.economics import EconomicContext, InvestmentModel, NpvParams
from steamflex.optimize.evolution import DeParams
from steamflex.optimize.lp_core import BACKENDS, DEFAULT_BACKEND, DEFAULT_TOL
from steamflex.optimize.search import AXES, AxisRange, SearchSpace
from steamflex.shared.errors import ConfigError, DomainError
from steamflex.shared.paths import default_presets_path, resolve_relative
from steamflex.shared.units import parse_optional_quantity, parse_quantity
from steamflex.system.models import (
    BatteryParams,
    PipeGeometry,
    SteamSystemParams,
    SystemConfig,
    TankGeometry,
)
from steamflex.system.thermo import calibrate_operating_temperature

TOP_LEVEL_KEYS = {
    "preset", "seed", "jobs", "out", "tol", "backend", "scenario", "steam", "battery",
    "system", "search", "economics", "de", "sweep",
}

_PRICE_UNIT_RE = re.compile(r"^([A-Z]{3})/(\S+)$")


def _mapping(value: Any, where: str) -> Dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
    return dict(value)


def _check_keys(section: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)} (allowed: {', '.join(sorted(allowed))})")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a plain number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge; mappings merge key-wise, everything else is replaced."""
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_presets(path: Optional[Path] = None) -> Dict[str, Dict[str, Any]]:
    path = Path(path) if path else default_presets_path()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    return {str(k): _mapping(v, f"preset {k}") for k, v in _mapping(data, str(path)).items()}


@dataclass(frozen=True)
class SeriesSource:
    """A CSV input and the unit of its value column."""

    path: Path
    unit: str
    timestamp: str = "timestamp"
    value: str = "value"


@dataclass(frozen=True)
class ScenarioConfig:
    spot: SeriesSource
    fcr: SeriesSource
    demand: SeriesSource
    tariff_volumetric: Union[float, SeriesSource]
    tariff_capacity: float
    months_per_horizon: Optional[float] = None
    label: str = ""
    dt: int = 3600
    currency_rates: Dict[str, float] = field(default_factory=dict)
    acceptance_fraction: float = 0.5
    weekend_factor: float = 0.25
    align_demand: bool = True
    annual_check: bool = False
    slice: Optional[Tuple[int, int]] = None

    def input_files(self) -> Dict[str, Path]:
        files = {"spot": self.spot.path, "fcr": self.fcr.path, "demand": self.demand.path}
        if isinstance(self.tariff_volumetric, SeriesSource):
            files["tariff_volumetric"] = self.tariff_volumetric.path
        return files


@dataclass(frozen=True)
class SensitivitySpec:
    f_sa: Tuple[float, ...]
    f_b: Tuple[float, ...]
    run_de: bool = True


@dataclass(frozen=True)
class PreheatSpec:
    T0: Tuple[float, ...]
    axis: str = "M_sa_max"
    values: Optional[Tuple[float, ...]] = None
    base: Optional[SystemConfig] = None


@dataclass
class RunConfig:
    raw: Dict[str, Any]
    scenario: Optional[ScenarioConfig]
    steam: SteamSystemParams
    battery: BatteryParams
    economics: EconomicContext
    de: DeParams
    system: Optional[SystemConfig] = None
    search: Optional[SearchSpace] = None
    sensitivity: Optional[SensitivitySpec] = None
    preheat: Optional[PreheatSpec] = None
    preset: Optional[str] = None
    seed: int = 0
    jobs: int = 1
    out_dir: Path = Path("out")
    tol: float = DEFAULT_TOL
    backend: str = DEFAULT_BACKEND
    source_path: Optional[Path] = None

    def require_scenario(self) -> ScenarioConfig:
        if self.scenario is None:
            raise ConfigError("config has no 'scenario' section")
        return self.scenario

    def require_system(self) -> SystemConfig:
        if self.system is None:
            raise ConfigError("this command needs a single configuration ('system' section)")
        return self.system

    def require_search(self) -> SearchSpace:
        if self.search is None:
            raise ConfigError("this command needs a search space ('search' section)")
        return self.search

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _series_source(section: Any, where: str, base_dir: Path) -> SeriesSource:
    s = _mapping(section, where)
    _check_keys(s, ("path", "unit", "timestamp", "value"), where)
    if "path" not in s or "unit" not in s:
        raise ConfigError(f"{where}: 'path' and 'unit' are required")
    path = resolve_relative(str(s["path"]), base_dir)
    if not path.is_file():
        raise ConfigError(f"{where}: input file not found: {path}")
    return SeriesSource(
        path=path,
        unit=str(s["unit"]).strip(),
        timestamp=str(s.get("timestamp", "timestamp")),
        value=str(s.get("value", "value")),
    )


def price_unit_factor(unit: str, base_unit: str) -> Tuple[str, float]:
    """Split ``"NOK/MWh"`` into its currency and the factor to ``base_unit``.

    ``base_unit`` is ``EUR/kWh`` or ``EUR/kW``; a trailing ``/h`` on capacity
    prices (per bid hour) is accepted.
    """
    m = _PRICE_UNIT_RE.match(unit.replace(" ", ""))
    if not m:
        raise ConfigError(f"price unit {unit!r} must look like 'EUR/MWh' or 'NOK/MW'")
    currency, rest = m.group(1), m.group(2)
    if base_unit == "EUR/kW" and rest.endswith("/h"):
        rest = rest[:-2]
    return currency, parse_quantity(f"1 EUR/{rest}", base_unit, field=f"unit {unit!r}")


def _scenario(section: Any, base_dir: Path) -> ScenarioConfig:
    s = _mapping(section, "scenario")
    _check_keys(
        s,
        ("label", "dt", "currency_rates", "spot", "fcr", "demand", "tariff", "annual_check", "slice"),
        "scenario",
    )
    for key in ("spot", "fcr", "demand", "tariff"):
        if key not in s:
            raise ConfigError(f"scenario: missing '{key}' section")

    fcr = _mapping(s["fcr"], "scenario.fcr")
    acceptance = _number(fcr.pop("acceptance_fraction", 0.5), "scenario.fcr.acceptance_fraction")
    demand = _mapping(s["demand"], "scenario.demand")
    weekend = _number(demand.pop("weekend_factor", 0.25), "scenario.demand.weekend_factor")
    align = bool(demand.pop("align_to_spot", True))

    tariff = _mapping(s["tariff"], "scenario.tariff")
    _check_keys(tariff, ("volumetric", "capacity", "months_per_horizon"), "scenario.tariff")
    if "volumetric" not in tariff or "capacity" not in tariff:
        raise ConfigError("scenario.tariff: 'volumetric' and 'capacity' are required")
    volumetric: Union[float, SeriesSource]
    if isinstance(tariff["volumetric"], Mapping):
        volumetric = _series_source(tariff["volumetric"], "scenario.tariff.volumetric", base_dir)
    else:
        volumetric = parse_quantity(tariff["volumetric"], "EUR/kWh", "scenario.tariff.volumetric")
    months = tariff.get("months_per_horizon")

    rates = {}
    for cur, rate in _mapping(s.get("currency_rates"), "scenario.currency_rates").items():
        rates[str(cur)] = _number(rate, f"scenario.currency_rates.{cur}")

    slice_spec = None
    if s.get("slice") is not None:
        sl = _mapping(s["slice"], "scenario.slice")
        _check_keys(sl, ("start_step", "steps"), "scenario.slice")
        slice_spec = (_integer(sl.get("start_step", 0), "scenario.slice.start_step"),
                      _integer(sl.get("steps"), "scenario.slice.steps"))

    dt = parse_quantity(s.get("dt", "1 h"), "s", "scenario.dt")
    if dt <= 0 or dt != int(dt):
        raise ConfigError(f"scenario.dt must be a positive whole number of seconds, got {dt}")

    return ScenarioConfig(
        spot=_series_source(s["spot"], "scenario.spot", base_dir),
        fcr=_series_source(fcr, "scenario.fcr", base_dir),
        demand=_series_source(demand, "scenario.demand", base_dir),
        tariff_volumetric=volumetric,
        tariff_capacity=parse_quantity(tariff["capacity"], "EUR/kW/month", "scenario.tariff.capacity"),
        months_per_horizon=None if months is None else _number(months, "scenario.tariff.months_per_horizon"),
        label=str(s.get("label", "")),
        dt=int(dt),
        currency_rates=rates,
        acceptance_fraction=acceptance,
        weekend_factor=weekend,
        align_demand=align,
        annual_check=bool(s.get("annual_check", False)),
        slice=slice_spec,
    )


_STEAM_QUANTITIES = {
    "T_op": "K", "T0": "K", "T_a": "K", "T_ref": "K", "T_boil": "K",
    "dh_ref": "kJ/kg", "dh_vap": "kJ/kg", "cp_w": "kJ/(kg*K)", "cp_s": "kJ/(kg*K)",
}
_PIPE_QUANTITIES = {"L_plus": "m", "L_minus": "m", "r": "m", "lambda_pipe": "W/(m*K)", "delta_pipe": "m"}
_TANK_QUANTITIES = {"lambda_tank": "W/(m*K)", "delta_tank": "m", "rho_store": "kg/m3"}


def _steam(section: Any) -> SteamSystemParams:
    s = _mapping(section, "steam")
    _check_keys(
        s,
        list(_STEAM_QUANTITIES) + ["pipe", "tank", "enthalpy_model", "self_discharge_override", "calibrate"],
        "steam",
    )
    kwargs: Dict[str, Any] = {k: parse_quantity(s[k], u, f"steam.{k}") for k, u in _STEAM_QUANTITIES.items() if k in s}

    pipe = _mapping(s.get("pipe"), "steam.pipe")
    _check_keys(pipe, list(_PIPE_QUANTITIES), "steam.pipe")
    kwargs["pipe"] = PipeGeometry(**{k: parse_quantity(v, _PIPE_QUANTITIES[k], f"steam.pipe.{k}") for k, v in pipe.items()})

    tank = _mapping(s.get("tank"), "steam.tank")
    _check_keys(tank, list(_TANK_QUANTITIES) + ["aspect_ratio"], "steam.tank")
    tank_kwargs = {k: parse_quantity(v, _TANK_QUANTITIES[k], f"steam.tank.{k}") for k, v in tank.items() if k in _TANK_QUANTITIES}
    if "aspect_ratio" in tank:
        tank_kwargs["aspect_ratio"] = _number(tank["aspect_ratio"], "steam.tank.aspect_ratio")
    kwargs["tank"] = TankGeometry(**tank_kwargs)

    if "enthalpy_model" in s:
        kwargs["enthalpy_model"] = str(s["enthalpy_model"])
    if s.get("self_discharge_override") is not None:
        kwargs["self_discharge_override"] = _number(s["self_discharge_override"], "steam.self_discharge_override")

    try:
        params = SteamSystemParams(**kwargs)
        if s.get("calibrate") is not None:
            cal = _mapping(s["calibrate"], "steam.calibrate")
            _check_keys(cal, ("target_efficiency", "rated_power"), "steam.calibrate")
            T_op = calibrate_operating_temperature(
                params,
                _number(cal.get("target_efficiency"), "steam.calibrate.target_efficiency"),
                parse_quantity(cal.get("rated_power", "1 MW"), "W", "steam.calibrate.rated_power"),
            )
            params = params.with_operating_temperature(T_op)
    except DomainError as e:
        raise ConfigError(f"steam: {e}") from e
    return params


def _battery(section: Any) -> BatteryParams:
    s = _mapping(section, "battery")
    names = ("eta_charge", "eta_discharge", "self_discharge", "soc_min_frac", "soc_max_frac", "soc_init_frac")
    _check_keys(s, names, "battery")
    try:
        return BatteryParams(**{k: _number(v, f"battery.{k}") for k, v in s.items()})
    except DomainError as e:
        raise ConfigError(f"battery: {e}") from e


_CAPACITY_UNITS = {"P_eb_max": "W", "M_sa_max": "kg", "Q_b_max": "Wh", "c_rate": "1/h"}


def system_config_from(section: Any, where: str = "system", default_T0: float = 283.0) -> SystemConfig:
    s = _mapping(section, where)
    _check_keys(s, list(_CAPACITY_UNITS) + ["T0"], where)
    if "P_eb_max" not in s:
        raise ConfigError(f"{where}: 'P_eb_max' is required")
    kwargs = {k: parse_quantity(v, _CAPACITY_UNITS[k], f"{where}.{k}") for k, v in s.items() if k != "T0"}
    kwargs["T0"] = parse_quantity(s["T0"], "K", f"{where}.T0") if "T0" in s else default_T0
    try:
        return SystemConfig(**kwargs)
    except DomainError as e:
        raise ConfigError(f"{where}: {e}") from e


def _axis(section: Any, unit: str, where: str) -> AxisRange:
    if isinstance(section, str):
        return AxisRange.fixed_at(parse_quantity(section, unit, where))
    s = _mapping(section, where)
    _check_keys(s, ("min", "max", "points"), where)
    if "min" not in s or "max" not in s:
        raise ConfigError(f"{where}: 'min' and 'max' are required")
    return AxisRange(
        parse_quantity(s["min"], unit, f"{where}.min"),
        parse_quantity(s["max"], unit, f"{where}.max"),
        _integer(s.get("points", 1), f"{where}.points"),
    )


def _search(section: Any, default_T0: float) -> SearchSpace:
    s = _mapping(section, "search")
    _check_keys(s, list(AXES) + ["T0"], "search")
    if "P_eb_max" not in s or "M_sa_max" not in s:
        raise ConfigError("search: 'P_eb_max' and 'M_sa_max' ranges are required")
    axes = {name: _axis(s[name], _CAPACITY_UNITS[name], f"search.{name}") for name in AXES if name in s}
    T0 = parse_quantity(s["T0"], "K", "search.T0") if "T0" in s else default_T0
    return SearchSpace(T0=T0, **axes)


_INVESTMENT_QUANTITIES = {"c_eb": "EUR/kW", "c_sa": "EUR/kg", "c_b": "EUR/kWh", "P0": "W", "M0": "kg", "Q0": "Wh"}
_INVESTMENT_NUMBERS = ("beta_eb", "alpha_sa", "alpha_b", "beta_b", "f_eb", "f_sa", "f_b")


def _economics(section: Any) -> EconomicContext:
    s = _mapping(section, "economics")
    _check_keys(s, ("investment", "npv"), "economics")
    inv = _mapping(s.get("investment"), "economics.investment")
    _check_keys(inv, list(_INVESTMENT_QUANTITIES) + list(_INVESTMENT_NUMBERS), "economics.investment")
    inv_kwargs: Dict[str, float] = {}
    for k, v in inv.items():
        if k in _INVESTMENT_QUANTITIES:
            inv_kwargs[k] = parse_quantity(v, _INVESTMENT_QUANTITIES[k], f"economics.investment.{k}")
        else:
            inv_kwargs[k] = _number(v, f"economics.investment.{k}")

    n = _mapping(s.get("npv"), "economics.npv")
    _check_keys(n, ("discount_rate", "lifetime", "maintenance_fraction", "year_index_start"), "economics.npv")
    npv_kwargs: Dict[str, Any] = {}
    for k, v in n.items():
        npv_kwargs[k] = _integer(v, f"economics.npv.{k}") if k in ("lifetime", "year_index_start") else _number(v, f"economics.npv.{k}")
    try:
        return EconomicContext(investment=InvestmentModel(**inv_kwargs), npv=NpvParams(**npv_kwargs))
    except DomainError as e:
        raise ConfigError(f"economics: {e}") from e


def _de(section: Any, seed: int) -> DeParams:
    s = _mapping(section, "de")
    _check_keys(s, ("population_size", "F", "CR", "max_generations", "tol", "seed"), "de")
    return DeParams(
        population_size=_integer(s.get("population_size", 32), "de.population_size"),
        F=_number(s.get("F", 0.7), "de.F"),
        CR=_number(s.get("CR", 0.9), "de.CR"),
        max_generations=_integer(s.get("max_generations", 150), "de.max_generations"),
        tol=_number(s.get("tol", 0.0), "de.tol"),
        seed=_integer(s.get("seed", seed), "de.seed"),
    )


def _number_list(values: Any, where: str) -> Tuple[float, ...]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}: expected a non-empty list")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(values))


def _sweeps(section: Any, default_T0: float) -> Tuple[Optional[SensitivitySpec], Optional[PreheatSpec]]:
    s = _mapping(section, "sweep")
    _check_keys(s, ("sensitivity", "preheat"), "sweep")
    sensitivity = None
    if s.get("sensitivity") is not None:
        sens = _mapping(s["sensitivity"], "sweep.sensitivity")
        _check_keys(sens, ("f_sa", "f_b", "run_de"), "sweep.sensitivity")
        sensitivity = SensitivitySpec(
            f_sa=_number_list(sens.get("f_sa", [1.0]), "sweep.sensitivity.f_sa"),
            f_b=_number_list(sens.get("f_b", [1.0]), "sweep.sensitivity.f_b"),
            run_de=bool(sens.get("run_de", True)),
        )
    preheat = None
    if s.get("preheat") is not None:
        ph = _mapping(s["preheat"], "sweep.preheat")
        _check_keys(ph, ("T0", "axis", "values", "base"), "sweep.preheat")
        if not isinstance(ph.get("T0"), list) or not ph["T0"]:
            raise ConfigError("sweep.preheat.T0: expected a non-empty list of temperatures")
        axis = str(ph.get("axis", "M_sa_max"))
        if axis not in AXES:
            raise ConfigError(f"sweep.preheat.axis: expected one of {AXES}, got {axis!r}")
        values = None
        if ph.get("values") is not None:
            values = tuple(parse_quantity(v, _CAPACITY_UNITS[axis], f"sweep.preheat.values[{i}]")
                           for i, v in enumerate(ph["values"]))
        base = system_config_from(ph["base"], "sweep.preheat.base", default_T0) if ph.get("base") is not None else None
        preheat = PreheatSpec(
            T0=tuple(parse_quantity(v, "K", f"sweep.preheat.T0[{i}]") for i, v in enumerate(ph["T0"])),
            axis=axis,
            values=values,
            base=base,
        )
    return sensitivity, preheat


def parse_run_config(
    data: Mapping[str, Any],
    base_dir: Path,
    preset: Optional[str] = None,
    presets: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> RunConfig:
    user = _mapping(data, "config")
    _check_keys(user, TOP_LEVEL_KEYS, "config")
    preset_name = preset or user.get("preset")
    merged = dict(user)
    if preset_name:
        catalog = presets if presets is not None else load_presets()
        if preset_name not in catalog:
            raise ConfigError(f"unknown preset {preset_name!r} (available: {', '.join(sorted(catalog))})")
        merged = deep_merge(catalog[preset_name], user)
        merged["preset"] = preset_name
    _check_keys(merged, TOP_LEVEL_KEYS, "config")

    seed = _integer(merged.get("seed", 0), "seed")
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    jobs = _integer(merged.get("jobs", 1), "jobs")
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    backend = str(merged.get("backend", DEFAULT_BACKEND))
    if backend not in BACKENDS:
        raise ConfigError(f"unknown LP backend {backend!r} (available: {', '.join(sorted(BACKENDS))})")

    steam = _steam(merged.get("steam"))
    if "system" in merged and "search" in merged:
        raise ConfigError("config must define either 'system' (single configuration) or 'search' (search space), not both")
    system = system_config_from(merged["system"], "system", steam.T0) if "system" in merged else None
    search = _search(merged["search"], steam.T0) if "search" in merged else None
    sensitivity, preheat = _sweeps(merged.get("sweep"), steam.T0)

    return RunConfig(
        raw=merged,
        scenario=_scenario(merged["scenario"], base_dir) if "scenario" in merged else None,
        steam=steam,
        battery=_battery(merged.get("battery")),
        economics=_economics(merged.get("economics")),
        de=_de(merged.get("de"), seed),
        system=system,
        search=search,
        sensitivity=sensitivity,
        preheat=preheat,
        preset=preset_name or None,
        seed=seed,
        jobs=jobs,
        out_dir=resolve_relative(str(merged.get("out", "out")), base_dir),
        tol=_number(merged.get("tol", DEFAULT_TOL), "tol"),
        backend=backend,
    )


def load_run_config(
    path: Union[str, Path],
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Load a YAML run config; ``overrides`` (e.g. CLI flags) win over the file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    data = _mapping(data, str(path))
    if overrides:
        data = deep_merge(data, {k: v for k, v in overrides.items() if v is not None})
    cfg = parse_run_config(data, path.resolve().parent, preset=preset)
    cfg.source_path = path
    return cfg


def list_presets() -> List[str]:
    return sorted(load_presets())
