"""Sizing search: no-storage reference, grid search, differential evolution
refinement, and cost-factor / preheat sweeps.

Every candidate is scored by dispatch -> cost breakdown -> NPV. Infeasible
candidates are kept as marked cells and score a fixed penalty in the DE.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from steamflex.optimize.dispatch import solve_dispatch
from steamflex.optimize.economics import (
    CostBreakdown,
    EconomicContext,
    InvestmentBreakdown,
    annual_scale_for,
    cost_breakdown,
    investment_cost,
    npv,
)
from steamflex.optimize.evolution import DeParams, DeResult, differential_evolution
from steamflex.optimize.lp_core import DEFAULT_BACKEND, DEFAULT_TOL
from steamflex.shared.errors import ConfigError, ConsistencyError, DomainError
from steamflex.shared.log import vprint
from steamflex.system.market import Scenario
from steamflex.system.models import BatteryParams, SteamSystemParams, SystemConfig
from steamflex.system.thermo import total_enthalpy

AXES = ("M_sa_max", "P_eb_max", "Q_b_max", "c_rate")
AXIS_LABELS = {
    "M_sa_max": "M_sa_max_kg",
    "P_eb_max": "P_eb_max_W",
    "Q_b_max": "Q_b_max_Wh",
    "c_rate": "c_rate_per_h",
    "T0": "T0_K",
}
INFEASIBLE_PENALTY = 1e12
REFERENCE_GRID_POINTS = 9


@dataclass(frozen=True)
class AxisRange:
    min: float
    max: float
    points: int = 1

    def __post_init__(self) -> None:
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise ConfigError(f"axis bounds must be finite, got [{self.min}, {self.max}]")
        if self.min < 0:
            raise ConfigError(f"axis minimum must be >= 0, got {self.min}")
        if self.min > self.max:
            raise ConfigError(f"axis minimum {self.min} exceeds maximum {self.max}")
        if int(self.points) != self.points or self.points < 1:
            raise ConfigError(f"axis points must be an integer >= 1, got {self.points!r}")

    @classmethod
    def fixed_at(cls, value: float) -> "AxisRange":
        return cls(value, value, 1)

    @property
    def fixed(self) -> bool:
        return self.min == self.max

    def values(self) -> np.ndarray:
        if self.fixed:
            return np.array([float(self.min)])
        return np.linspace(self.min, self.max, int(self.points))


def _zero_axis() -> AxisRange:
    return AxisRange(0.0, 0.0, 1)


@dataclass(frozen=True)
class SearchSpace:
    """Capacity ranges: M_sa_max in kg, P_eb_max in W, Q_b_max in Wh, c_rate in 1/h."""

    M_sa_max: AxisRange
    P_eb_max: AxisRange
    Q_b_max: AxisRange = field(default_factory=_zero_axis)
    c_rate: AxisRange = field(default_factory=_zero_axis)
    T0: float = 283.0

    def __post_init__(self) -> None:
        if self.Q_b_max.max > 0 and not self.c_rate.min > 0:
            raise ConfigError("c_rate range must be strictly positive when the battery axis is non-zero")

    def axis(self, name: str) -> AxisRange:
        if name not in AXES:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.axis(n).values().size for n in AXES)

    def free_axes(self) -> List[str]:
        return [n for n in AXES if not self.axis(n).fixed]

    def config_from(self, values: Dict[str, float]) -> SystemConfig:
        """Configuration with ``values`` on the named axes and axis minima elsewhere."""
        kwargs = {n: float(values.get(n, self.axis(n).min)) for n in AXES}
        return SystemConfig(T0=self.T0, **kwargs)

    def grid(self) -> List[Tuple[Tuple[float, ...], SystemConfig]]:
        out = []
        for coords in itertools.product(*(self.axis(n).values() for n in AXES)):
            out.append((tuple(float(c) for c in coords), self.config_from(dict(zip(AXES, coords)))))
        return out


@dataclass(frozen=True)
class SizingProblem:
    scenario: Scenario
    params: SteamSystemParams = field(default_factory=SteamSystemParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    economics: EconomicContext = field(default_factory=EconomicContext)
    tol: float = DEFAULT_TOL
    backend: str = DEFAULT_BACKEND

    def with_economics(self, economics: EconomicContext) -> "SizingProblem":
        return replace(self, economics=economics)


@dataclass(frozen=True)
class Evaluation:
    config: SystemConfig
    feasible: bool
    investment: InvestmentBreakdown
    npv: Optional[float] = None
    breakdown: Optional[CostBreakdown] = None
    peak_grid_power: Optional[float] = None
    message: str = ""

    @property
    def objective(self) -> float:
        """Minimisation target: negative NPV, or a fixed penalty when infeasible."""
        return -self.npv if self.feasible else INFEASIBLE_PENALTY

    def sort_key(self) -> tuple:
        c = self.config
        return (
            0 if self.feasible else 1,
            -round(self.npv, 6) if self.feasible else 0.0,
            round(self.investment.C_I, 6),
            c.M_sa_max,
            c.P_eb_max,
            c.Q_b_max,
            c.c_rate,
        )


def evaluate_config(problem: SizingProblem, config: SystemConfig) -> Evaluation:
    inv = investment_cost(config, problem.economics.investment)
    try:
        result = solve_dispatch(problem.scenario, config, problem.params, problem.battery,
                                tol=problem.tol, backend=problem.backend)
    except DomainError as exc:
        return Evaluation(config=config, feasible=False, investment=inv, message=str(exc))
    if not result.is_optimal:
        return Evaluation(config=config, feasible=False, investment=inv, message=result.message)

    breakdown = cost_breakdown(result, problem.scenario, tol=max(problem.tol, 1e-6))
    value = npv(breakdown, inv.C_I, problem.economics.npv, annual_scale_for(problem.scenario))
    return Evaluation(
        config=config,
        feasible=True,
        investment=inv,
        npv=value,
        breakdown=breakdown,
        peak_grid_power=result.peak_grid_power,
    )


def _cache_key(config: SystemConfig) -> tuple:
    c_rate = config.c_rate if config.has_battery else 0.0
    return (config.P_eb_max, config.M_sa_max, config.Q_b_max, c_rate, config.T0)


class Evaluator:
    """Memoising, optionally process-parallel candidate scorer.

    Results come back in request order whatever the completion order.
    """

    def __init__(self, problem: SizingProblem, jobs: int = 1) -> None:
        self.problem = problem
        self.jobs = max(1, int(jobs))
        self._pool: Optional[ProcessPoolExecutor] = None
        self._cache: Dict[tuple, Evaluation] = {}

    def __enter__(self) -> "Evaluator":
        if self.jobs > 1 and self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.jobs)
        return self

    def __exit__(self, *exc) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    @property
    def evaluations(self) -> List[Evaluation]:
        return list(self._cache.values())

    def evaluate(self, configs: Sequence[SystemConfig]) -> List[Evaluation]:
        pending: Dict[tuple, SystemConfig] = {}
        for cfg in configs:
            key = _cache_key(cfg)
            if key not in self._cache and key not in pending:
                pending[key] = cfg

        todo = list(pending.values())
        if self._pool is not None and len(todo) > 1:
            chunk = max(1, len(todo) // (4 * self.jobs))
            results: Iterable[Evaluation] = self._pool.map(partial(evaluate_config, self.problem), todo, chunksize=chunk)
        else:
            results = (evaluate_config(self.problem, cfg) for cfg in todo)

        it = iter(results)
        for key, cfg in pending.items():
            try:
                self._cache[key] = next(it)
            except ConsistencyError as exc:
                raise ConsistencyError(f"configuration {cfg.as_dict()}: {exc}") from exc

        out = []
        for cfg in configs:
            ev = self._cache[_cache_key(cfg)]
            out.append(ev if ev.config == cfg else replace(ev, config=cfg))
        return out


@dataclass(frozen=True)
class SweepCell:
    coords: Tuple[float, ...]
    evaluation: Evaluation
    delta_npv: Optional[float]


@dataclass
class SweepResult:
    kind: str
    axes: Dict[str, np.ndarray]
    cells: List[SweepCell]
    reference: Optional[Evaluation] = None

    def __post_init__(self) -> None:
        expected = int(np.prod(self.shape)) if self.axes else 0
        if len(self.cells) != expected:
            raise ConsistencyError(f"{self.kind} sweep has {len(self.cells)} cells, axes imply {expected}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(v) for v in self.axes.values())

    def feasible_cells(self) -> List[SweepCell]:
        return [c for c in self.cells if c.evaluation.feasible]

    def best(self) -> Optional[SweepCell]:
        feasible = self.feasible_cells()
        if not feasible:
            return None
        return min(feasible, key=lambda c: c.evaluation.sort_key())

    def delta_grid(self) -> np.ndarray:
        """ΔNPV shaped by the axes, NaN for infeasible cells."""
        values = [np.nan if c.delta_npv is None else c.delta_npv for c in self.cells]
        return np.array(values, dtype=float).reshape(self.shape)

    def to_frame(self) -> pd.DataFrame:
        labels = list(self.axes)
        rows = []
        for cell in self.cells:
            ev = cell.evaluation
            row = dict(zip(labels, cell.coords))
            row.update(
                {
                    "delta_npv_EUR": cell.delta_npv,
                    "npv_EUR": ev.npv,
                    "feasible": ev.feasible,
                    "investment_EUR": ev.investment.C_I,
                    "net_energy_cost_EUR": ev.breakdown.net_energy_cost if ev.breakdown else None,
                    "peak_grid_power_W": ev.peak_grid_power,
                }
            )
            for key, value in ev.config.as_dict().items():
                row.setdefault(key, value)
            row["message"] = ev.message
            rows.append(row)
        return pd.DataFrame(rows)


def _with_delta(ev: Evaluation, reference: Evaluation) -> Optional[float]:
    if not ev.feasible:
        return None
    return ev.npv - reference.npv


def optimize_reference(
    problem: SizingProblem,
    P_hi: Optional[float] = None,
    T0: Optional[float] = None,
    points: int = REFERENCE_GRID_POINTS,
    refine: bool = True,
    evaluator: Optional[Evaluator] = None,
) -> Evaluation:
    """Best boiler-only configuration: the NPV baseline for every ΔNPV.

    Scans [smallest feasible boiler, P_hi] and polishes the best grid point
    with a bounded scalar search.
    """
    T0 = problem.params.T0 if T0 is None else float(T0)
    dh = total_enthalpy(problem.params, T0)
    demand = problem.scenario.demand_values()
    p_lo = dh * 1e3 * float(np.max(demand)) if demand.size else 0.0
    if P_hi is None or P_hi < p_lo:
        P_hi = 2.0 * p_lo

    def cfg(p: float) -> SystemConfig:
        return SystemConfig(P_eb_max=float(p), T0=T0)

    own = evaluator is None
    ev = evaluator or Evaluator(problem)
    try:
        candidates = np.unique(np.linspace(p_lo, P_hi, max(1, int(points))))
        scanned = ev.evaluate([cfg(p) for p in candidates])
        seen = list(scanned)
        feasible = [i for i, e in enumerate(scanned) if e.feasible]
        if not feasible:
            raise DomainError(f"no feasible boiler size within [{p_lo:.0f}, {P_hi:.0f}] W")

        best_i = min(feasible, key=lambda i: scanned[i].sort_key())
        if refine and candidates.size > 1:
            lo = candidates[max(best_i - 1, 0)]
            hi = candidates[min(best_i + 1, candidates.size - 1)]

            def objective(p: float) -> float:
                e = ev.evaluate([cfg(p)])[0]
                seen.append(e)
                return e.objective

            minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                            options={"xatol": max(1.0, 1e-4 * (hi - lo))})
        best = min((e for e in seen if e.feasible), key=lambda e: e.sort_key())
    finally:
        if own:
            ev.__exit__(None, None, None)
    vprint(f"[grid] reference boiler {best.config.P_eb_max / 1e3:.1f} kW, NPV {best.npv:.0f} EUR")
    return best


def grid_search(
    space: SearchSpace,
    problem: SizingProblem,
    reference: Optional[Evaluation] = None,
    jobs: int = 1,
    evaluator: Optional[Evaluator] = None,
) -> SweepResult:
    own = evaluator is None
    ev = evaluator or Evaluator(problem, jobs).__enter__()
    try:
        if reference is None:
            reference = optimize_reference(problem, P_hi=space.P_eb_max.max, T0=space.T0, evaluator=ev)
        grid = space.grid()
        evaluations = ev.evaluate([c for _, c in grid])
    finally:
        if own:
            ev.__exit__(None, None, None)

    cells = []
    for i, ((coords, _), e) in enumerate(zip(grid, evaluations)):
        cells.append(SweepCell(coords=coords, evaluation=e, delta_npv=_with_delta(e, reference)))
        vprint(f"[grid] {i + 1}/{len(grid)} {coords}: " + (f"ΔNPV {cells[-1].delta_npv:.0f} EUR" if e.feasible else "infeasible"))
    axes = {AXIS_LABELS[n]: space.axis(n).values() for n in AXES}
    return SweepResult(kind="grid", axes=axes, cells=cells, reference=reference)


def refine_with_de(
    space: SearchSpace,
    problem: SizingProblem,
    params: DeParams,
    seeds: Optional[np.ndarray] = None,
    evaluator: Optional[Evaluator] = None,
) -> Tuple[Optional[DeResult], Optional[Evaluation]]:
    """Differential evolution over the non-fixed axes of ``space``."""
    free = space.free_axes()
    if not free:
        return None, None
    bounds = [(space.axis(n).min, space.axis(n).max) for n in free]
    own = evaluator is None
    ev = evaluator or Evaluator(problem)

    def batch(X: np.ndarray) -> np.ndarray:
        configs = [space.config_from(dict(zip(free, row))) for row in X]
        return np.array([e.objective for e in ev.evaluate(configs)], dtype=float)

    try:
        result = differential_evolution(None, bounds, params, initial=seeds, batch_objective=batch)
        best = ev.evaluate([space.config_from(dict(zip(free, result.x)))])[0]
    finally:
        if own:
            ev.__exit__(None, None, None)
    return result, best


@dataclass
class SizingOutcome:
    reference: Evaluation
    grid: SweepResult
    de: Optional[DeResult]
    de_best: Optional[Evaluation]
    best: Optional[Evaluation]

    @property
    def best_delta_npv(self) -> Optional[float]:
        if self.best is None:
            return None
        return self.best.npv - self.reference.npv


def size_system(
    space: SearchSpace,
    problem: SizingProblem,
    de_params: DeParams = DeParams(),
    jobs: int = 1,
    reference: Optional[Evaluation] = None,
    run_de: bool = True,
) -> SizingOutcome:
    """Grid search, then DE seeded from the best cells; keeps the better optimum."""
    with Evaluator(problem, jobs) as ev:
        if reference is None:
            reference = optimize_reference(problem, P_hi=space.P_eb_max.max, T0=space.T0, evaluator=ev)
        grid = grid_search(space, problem, reference, evaluator=ev)

        de_result, de_best = None, None
        free = space.free_axes()
        if run_de and free:
            ranked = sorted(grid.feasible_cells(), key=lambda c: c.evaluation.sort_key())
            n_seeds = max(1, de_params.population_size // 4)
            seeds = np.array(
                [[getattr(c.evaluation.config, n) for n in free] for c in ranked[:n_seeds]], dtype=float
            )
            de_result, de_best = refine_with_de(space, problem, de_params, seeds=seeds if len(seeds) else None, evaluator=ev)

    candidates = [c.evaluation for c in grid.feasible_cells()]
    if de_best is not None and de_best.feasible:
        candidates.append(de_best)
    if reference.feasible:
        candidates.append(reference)
    best = min(candidates, key=lambda e: e.sort_key()) if candidates else None
    return SizingOutcome(reference=reference, grid=grid, de=de_result, de_best=de_best, best=best)


def _infeasible_placeholder(config: SystemConfig, problem: SizingProblem, message: str) -> Evaluation:
    return Evaluation(config=config, feasible=False,
                      investment=investment_cost(config, problem.economics.investment), message=message)


def sensitivity_sweep(
    space: SearchSpace,
    problem: SizingProblem,
    f_sa_values: Sequence[float],
    f_b_values: Sequence[float],
    de_params: DeParams = DeParams(),
    jobs: int = 1,
    run_de: bool = True,
    reference: Optional[Evaluation] = None,
) -> SweepResult:
    """Optimal sizing for every (f_sa, f_b) investment cost-factor pair."""
    for f in list(f_sa_values) + list(f_b_values):
        if not f > 0:
            raise ConfigError(f"cost factors must be > 0, got {f}")
    if reference is None:
        with Evaluator(problem, jobs) as ev:
            reference = optimize_reference(problem, P_hi=space.P_eb_max.max, T0=space.T0, evaluator=ev)

    cells = []
    for f_sa, f_b in itertools.product(f_sa_values, f_b_values):
        economics = replace(problem.economics, investment=problem.economics.investment.with_factors(f_sa=f_sa, f_b=f_b))
        outcome = size_system(space, problem.with_economics(economics), de_params, jobs, reference=reference, run_de=run_de)
        best = outcome.best or _infeasible_placeholder(reference.config, problem, "no feasible configuration")
        cells.append(SweepCell(coords=(float(f_sa), float(f_b)), evaluation=best, delta_npv=_with_delta(best, reference)))
        vprint(f"[grid] f_sa={f_sa} f_b={f_b}: best {best.config.as_dict()}")
    axes = {"f_sa": np.asarray(f_sa_values, dtype=float), "f_b": np.asarray(f_b_values, dtype=float)}
    return SweepResult(kind="sensitivity", axes=axes, cells=cells, reference=reference)


def preheat_sweep(
    space: SearchSpace,
    problem: SizingProblem,
    T0_values: Sequence[float],
    axis: str = "M_sa_max",
    axis_values: Optional[Sequence[float]] = None,
    base_config: Optional[SystemConfig] = None,
    jobs: int = 1,
    reference: Optional[Evaluation] = None,
) -> SweepResult:
    """ΔNPV over inlet temperature and one capacity axis.

    The baseline is the boiler-only optimum at the default inlet temperature;
    unswept capacities come from ``base_config`` (default: the reference boiler
    with the axis minima of ``space``).
    """
    params = problem.params
    for t in T0_values:
        if not (params.T_ref <= t < params.T_op):
            raise DomainError(f"inlet temperature {t} K outside [{params.T_ref}, {params.T_op}) K")
    if axis not in AXES:
        raise ConfigError(f"unknown capacity axis {axis!r}; expected one of {AXES}")
    values = np.asarray(axis_values if axis_values is not None else space.axis(axis).values(), dtype=float)

    with Evaluator(problem, jobs) as ev:
        if reference is None:
            reference = optimize_reference(problem, P_hi=space.P_eb_max.max, T0=params.T0, evaluator=ev)
        if base_config is None:
            base_config = replace(space.config_from({}), P_eb_max=reference.config.P_eb_max)
        coords = [(float(t), float(v)) for t, v in itertools.product(T0_values, values)]
        configs = [replace(base_config, T0=t, **{axis: v}) for t, v in coords]
        evaluations = ev.evaluate(configs)

    cells = [SweepCell(coords=c, evaluation=e, delta_npv=_with_delta(e, reference)) for c, e in zip(coords, evaluations)]
    axes = {AXIS_LABELS["T0"]: np.asarray(T0_values, dtype=float), AXIS_LABELS[axis]: values}
    return SweepResult(kind="preheat", axes=axes, cells=cells, reference=reference)
