"""Hybrid electrode-boiler / steam-accumulator / battery dispatch.

The problem is assembled in kW, kWh, kg and kg/s; results are reported in
W, Wh, kg and kg/s. Storage states are kept at N+1 boundaries, index 0 being
the fixed initial charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from steamflex.optimize.lp_core import (
    DEFAULT_BACKEND,
    DEFAULT_TOL,
    LinearProgram,
    LpBuilder,
    LpSolution,
    solve,
)
from steamflex.shared.errors import ConsistencyError, DomainError
from steamflex.shared.log import eprint, vprint
from steamflex.system.market import Scenario
from steamflex.system.models import (
    SECONDS_PER_HOUR,
    BatteryParams,
    SteamSystemParams,
    StorageCoefficients,
    SystemConfig,
)
from steamflex.system.thermo import storage_coefficients

KW = 1e3
SA_INIT_FRAC = 0.9
INFEASIBLE_MESSAGE = "cannot meet steam demand"
RETRY_BACKEND = "highs-ipm"


def fcr_blocks(n: int, dt: int) -> np.ndarray:
    """Hour-block index of every step; FCR capacity is constant within a block."""
    steps = np.arange(n, dtype=np.int64)
    if dt >= SECONDS_PER_HOUR:
        return steps
    return (steps * int(dt)) // int(SECONDS_PER_HOUR)


def _check_coefficients(config: SystemConfig, coeffs: StorageCoefficients) -> None:
    def close(a: float, b: float) -> bool:
        return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)

    if not close(coeffs.rated_power, config.P_eb_max):
        raise DomainError(
            f"storage coefficients rated at {coeffs.rated_power:.6g} W but boiler capacity is {config.P_eb_max:.6g} W"
        )
    if not close(coeffs.T0, config.T0):
        raise DomainError(f"storage coefficients computed at T0={coeffs.T0} K but configuration uses T0={config.T0} K")
    if not close(coeffs.M_max, config.M_sa_max):
        raise DomainError(
            f"storage coefficients computed for {coeffs.M_max} kg but accumulator capacity is {config.M_sa_max} kg"
        )


def rated_flow(config: SystemConfig, coeffs: StorageCoefficients) -> float:
    """Accumulator flow limit (kg/s): boiler steam output at rated power."""
    if not config.has_accumulator:
        return 0.0
    return config.P_eb_max / KW / coeffs.dh_tot


def fcr_up_headroom(result: "DispatchResult", battery: BatteryParams) -> np.ndarray:
    """Up-regulation headroom (kW) per step, recomputed from the series."""
    co = result.coeffs
    sa_loss = co.dh_tot * (
        (1.0 - co.eta_sa_charge) * result.m_dot_sa_charge
        + (1.0 / co.eta_sa_discharge - 1.0) * result.m_dot_sa_discharge
    )
    battery_net = battery.eta_charge * result.P_b_charge / KW - result.P_b_discharge / KW / battery.eta_discharge
    return result.P_eb / KW - sa_loss + battery_net


def loop_flows(result: "DispatchResult") -> tuple:
    """Simultaneous charge and discharge: (accumulator kg, battery kWh) over the horizon."""
    dt = float(result.dt)
    sa = float(np.sum(np.minimum(result.m_dot_sa_charge, result.m_dot_sa_discharge)) * dt)
    batt = float(np.sum(np.minimum(result.P_b_charge, result.P_b_discharge)) / KW * dt / SECONDS_PER_HOUR)
    return sa, batt


def initial_charge_energy(config: SystemConfig, coeffs: StorageCoefficients, battery: BatteryParams) -> float:
    """Energy (kWh) stored at t=0 in the battery and the accumulator."""
    q0 = battery.soc_init_frac * config.Q_b_max / KW
    m0 = SA_INIT_FRAC * config.M_sa_max
    return q0 + m0 * coeffs.dh_tot / SECONDS_PER_HOUR


def build_problem(
    scenario: Scenario,
    config: SystemConfig,
    coeffs: StorageCoefficients,
    battery: BatteryParams,
) -> LinearProgram:
    """Dispatch LP: minimise energy cost minus FCR profit plus initial-charge cost."""
    _check_coefficients(config, coeffs)

    n = scenario.horizon_steps
    dt = float(scenario.dt)
    dth = dt / SECONDS_PER_HOUR
    spot = scenario.spot_values()
    vol = scenario.volumetric_values()
    fcr = scenario.fcr_values()
    demand = scenario.demand_values()

    p_max = config.P_eb_max / KW
    q_max = config.Q_b_max / KW
    m_max = config.M_sa_max
    p_b_max = config.c_rate * q_max if config.has_battery else 0.0
    m_flow_ub = rated_flow(config, coeffs)

    blocks = fcr_blocks(n, scenario.dt)
    n_blocks = int(blocks[-1]) + 1 if n else 0

    b = LpBuilder()
    p_eb = b.add_variables("P_eb", n, 0.0, p_max)
    p_bc = b.add_variables("P_b_charge", n, 0.0, p_b_max)
    p_bd = b.add_variables("P_b_discharge", n, 0.0, p_b_max)
    p_fcr = b.add_variables("P_fcr", n_blocks, 0.0, np.inf)
    m_c = b.add_variables("m_sa_charge", n, 0.0, m_flow_ub)
    m_d = b.add_variables("m_sa_discharge", n, 0.0, m_flow_ub)

    m0 = SA_INIT_FRAC * m_max
    m_lb = np.zeros(n + 1)
    m_ub = np.full(n + 1, m_max)
    m_lb[0] = m_ub[0] = m0
    m_sa = b.add_variables("M_sa", n + 1, m_lb, m_ub)

    q0 = battery.soc_init_frac * q_max
    q_lb = np.full(n + 1, battery.soc_min_frac * q_max)
    q_ub = np.full(n + 1, battery.soc_max_frac * q_max)
    q_lb[0] = q_ub[0] = q0
    q_b = b.add_variables("Q_b", n + 1, q_lb, q_ub)

    p_imp = b.add_variables("P_import", n, 0.0, np.inf)
    p_pk = b.add_variables("P_peak", 1, 0.0, np.inf)[0]

    # steam: boiler output plus accumulator discharge minus charge meets the plant
    b.add_constraints(
        "steam_balance",
        [(p_eb, 1.0 / coeffs.dh_tot), (m_d, 1.0), (m_c, -1.0)],
        "=",
        demand,
    )
    # charging steam comes out of the boiler, never out of the tank itself
    b.add_constraints("sa_charge_from_boiler", [(m_c, 1.0), (p_eb, -1.0 / coeffs.dh_tot)], "<=", 0.0)
    decay_sa = 1.0 - coeffs.eps_sa * dt
    b.add_constraints(
        "tank_balance",
        [
            (m_sa[1:], 1.0),
            (m_sa[:-1], -decay_sa),
            (m_c, -coeffs.eta_sa_charge * dt),
            (m_d, dt / coeffs.eta_sa_discharge),
        ],
        "=",
        0.0,
    )
    decay_b = 1.0 - battery.self_discharge_per_second * dt
    b.add_constraints(
        "battery_balance",
        [
            (q_b[1:], 1.0),
            (q_b[:-1], -decay_b),
            (p_bc, -battery.eta_charge * dth),
            (p_bd, dth / battery.eta_discharge),
        ],
        "=",
        0.0,
    )
    if config.has_battery:
        b.add_constraints("c_rate_charge", [(p_bc, 1.0), (p_bd, -1.0)], "<=", p_b_max)
        b.add_constraints("c_rate_discharge", [(p_bd, 1.0), (p_bc, -1.0)], "<=", p_b_max)

    # FCR down-regulation: unused boiler capacity plus remaining battery charge rate
    b.add_constraints(
        "fcr_down_headroom",
        [(p_fcr[blocks], 1.0), (p_eb, 1.0), (p_bc, 1.0), (p_bd, -1.0)],
        "<=",
        p_max + p_b_max,
    )
    # FCR up-regulation: bounded by the current consumption net of storage
    # conversion losses, so a charge/discharge loop adds no headroom
    b.add_constraints(
        "fcr_up_headroom",
        [
            (p_fcr[blocks], 1.0),
            (p_eb, -1.0),
            (m_c, coeffs.dh_tot * (1.0 - coeffs.eta_sa_charge)),
            (m_d, coeffs.dh_tot * (1.0 / coeffs.eta_sa_discharge - 1.0)),
            (p_bc, -battery.eta_charge),
            (p_bd, 1.0 / battery.eta_discharge),
        ],
        "<=",
        0.0,
    )
    b.add_constraints("grid_import", [(p_imp, 1.0), (p_eb, -1.0), (p_bc, -1.0), (p_bd, 1.0)], ">=", 0.0)
    b.add_constraints("grid_peak", [(p_pk, 1.0), (p_eb, -1.0), (p_bc, -1.0), (p_bd, 1.0)], ">=", 0.0)

    b.add_objective(p_eb, dth * spot)
    b.add_objective(p_bc, dth * spot)
    b.add_objective(p_bd, -dth * spot)
    b.add_objective(p_imp, dth * vol)
    b.add_objective(p_pk, scenario.months * scenario.tariff.capacity)
    b.add_objective(p_fcr[blocks], -dth * fcr)
    if n:
        b.add_objective_constant(float(np.mean(spot + vol)) * initial_charge_energy(config, coeffs, battery))
    return b.build()


@dataclass
class DispatchResult:
    """Solved (or failed) dispatch; series are None unless ``status == "optimal"``."""

    status: str
    config: SystemConfig
    coeffs: StorageCoefficients
    dt: int
    objective: Optional[float] = None
    message: str = ""
    P_grid: Optional[np.ndarray] = None
    P_eb: Optional[np.ndarray] = None
    P_b_charge: Optional[np.ndarray] = None
    P_b_discharge: Optional[np.ndarray] = None
    P_fcr: Optional[np.ndarray] = None
    m_dot_eb: Optional[np.ndarray] = None
    m_dot_sa_charge: Optional[np.ndarray] = None
    m_dot_sa_discharge: Optional[np.ndarray] = None
    m_dot_plant: Optional[np.ndarray] = None
    M_sa: Optional[np.ndarray] = None  # kg, N+1 boundaries
    Q_b: Optional[np.ndarray] = None  # Wh, N+1 boundaries
    peak_grid_power: Optional[float] = None
    P_peak_variable: Optional[float] = None
    initial_charge_kWh: float = 0.0
    backend: str = ""
    warnings: List[str] = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def is_infeasible(self) -> bool:
        return self.status == "infeasible"

    @property
    def P_b_net(self) -> np.ndarray:
        return self.P_b_charge - self.P_b_discharge


def _extract(lp: LinearProgram, sol: LpSolution, scenario: Scenario, config: SystemConfig,
             coeffs: StorageCoefficients, battery: BatteryParams) -> DispatchResult:
    x = sol.x
    blocks = fcr_blocks(scenario.horizon_steps, scenario.dt)
    p_eb = lp.values(x, "P_eb") * KW
    p_bc = lp.values(x, "P_b_charge") * KW
    p_bd = lp.values(x, "P_b_discharge") * KW
    p_grid = p_eb + p_bc - p_bd
    return DispatchResult(
        status="optimal",
        config=config,
        coeffs=coeffs,
        dt=scenario.dt,
        objective=sol.objective,
        message=sol.message,
        P_grid=p_grid,
        P_eb=p_eb,
        P_b_charge=p_bc,
        P_b_discharge=p_bd,
        P_fcr=lp.values(x, "P_fcr")[blocks] * KW,
        m_dot_eb=p_eb / (coeffs.dh_tot * KW),
        m_dot_sa_charge=lp.values(x, "m_sa_charge"),
        m_dot_sa_discharge=lp.values(x, "m_sa_discharge"),
        m_dot_plant=scenario.demand_values().copy(),
        M_sa=lp.values(x, "M_sa"),
        Q_b=lp.values(x, "Q_b") * KW,
        peak_grid_power=float(max(0.0, np.max(p_grid))) if p_grid.size else 0.0,
        P_peak_variable=float(lp.values(x, "P_peak")[0]) * KW,
        initial_charge_kWh=initial_charge_energy(config, coeffs, battery),
        backend=sol.backend,
    )


def solve_dispatch(
    scenario: Scenario,
    config: SystemConfig,
    params: SteamSystemParams,
    battery: BatteryParams,
    tol: float = DEFAULT_TOL,
    backend: str = DEFAULT_BACKEND,
    coeffs: Optional[StorageCoefficients] = None,
) -> DispatchResult:
    """Build, solve and independently re-check one dispatch instance.

    Infeasibility is returned as ``status="infeasible"``; a solution failing
    the independent re-check raises :class:`ConsistencyError`.
    """
    if coeffs is None:
        coeffs = storage_coefficients(params, config.M_sa_max, config.P_eb_max, config.T0)
    lp = build_problem(scenario, config, coeffs, battery)
    sol = solve(lp, tol=tol, backend=backend)
    if sol.status == "numerical_failure" and backend != RETRY_BACKEND:
        vprint(f"[solve] {backend} failed ({sol.message}); retrying with {RETRY_BACKEND}")
        sol = solve(lp, tol=tol, backend=RETRY_BACKEND)

    if sol.status != "optimal":
        message = INFEASIBLE_MESSAGE if sol.status == "infeasible" else sol.message
        return DispatchResult(status=sol.status, config=config, coeffs=coeffs, dt=scenario.dt,
                              message=message, backend=sol.backend)

    result = _extract(lp, sol, scenario, config, coeffs, battery)
    violations = check_dispatch(result, scenario, battery, tol=max(tol, 1e-6) * 10)
    if violations:
        raise ConsistencyError(
            "dispatch solution failed the independent constraint re-check:\n  " + "\n  ".join(violations[:10])
        )

    e0 = result.initial_charge_kWh
    if e0 > 0 and e0 * KW > result.peak_grid_power:
        msg = (
            f"initial storage charge ({e0:.1f} kWh) cannot be supplied within one hour "
            f"without exceeding the operational peak ({result.peak_grid_power / KW:.1f} kW)"
        )
        result.warnings.append(msg)
        vprint(f"[warn] {msg}")

    sa_loop, batt_loop = loop_flows(result)
    if sa_loop > 1e-6 * (1.0 + config.M_sa_max) or batt_loop > 1e-6 * (1.0 + config.Q_b_max / KW):
        msg = (
            f"simultaneous charge and discharge in the schedule "
            f"(accumulator {sa_loop:.3g} kg, battery {batt_loop:.3g} kWh)"
        )
        result.warnings.append(msg)
        vprint(f"[warn] {msg}")
    return result


def _violations(name: str, residual: np.ndarray, scale: np.ndarray, tol: float, out: List[str]) -> None:
    residual = np.asarray(residual, dtype=float)
    bad = np.flatnonzero(residual > tol * (1.0 + np.abs(scale)))
    if bad.size:
        i = int(bad[0])
        out.append(f"{name} violated at step {i} by {residual[i]:.3g}" + (f" ({bad.size} steps)" if bad.size > 1 else ""))


def check_dispatch(result: DispatchResult, scenario: Scenario, battery: BatteryParams, tol: float = DEFAULT_TOL) -> List[str]:
    """Re-check every operating constraint from the reported series alone.

    Works in kW, kWh, kg and kg/s; an empty list means the schedule is valid.
    """
    if not result.is_optimal:
        return [f"no schedule to check (status {result.status})"]
    cfg, co = result.config, result.coeffs
    dt = float(result.dt)
    dth = dt / SECONDS_PER_HOUR
    out: List[str] = []

    p_eb = result.P_eb / KW
    p_bc = result.P_b_charge / KW
    p_bd = result.P_b_discharge / KW
    p_grid = result.P_grid / KW
    p_fcr = result.P_fcr / KW
    m_c, m_d = result.m_dot_sa_charge, result.m_dot_sa_discharge
    m_sa = result.M_sa
    q_b = result.Q_b / KW
    p_max = cfg.P_eb_max / KW
    q_max = cfg.Q_b_max / KW
    p_b_max = cfg.c_rate * q_max if cfg.has_battery else 0.0
    demand = scenario.demand_values()

    _violations("grid balance", np.abs(p_grid - (p_eb + p_bc - p_bd)), p_grid, tol, out)
    _violations("boiler lower bound", -p_eb, 0.0, tol, out)
    _violations("boiler capacity", p_eb - p_max, p_max, tol, out)
    _violations("steam balance", np.abs(p_eb / co.dh_tot + m_d - m_c - demand), demand, tol, out)
    for label, arr in (("battery charge", p_bc), ("battery discharge", p_bd)):
        _violations(f"{label} lower bound", -arr, 0.0, tol, out)
        _violations(f"{label} rate", arr - p_b_max, p_b_max, tol, out)
    _violations("c-rate", np.abs(p_bc - p_bd) - p_b_max, p_b_max, tol, out)
    m_rated = rated_flow(cfg, co)
    for label, arr in (("accumulator charge flow", m_c), ("accumulator discharge flow", m_d)):
        _violations(f"{label} lower bound", -arr, 0.0, tol, out)
        limit = "rated flow" if cfg.has_accumulator else "without accumulator"
        _violations(f"{label} {limit}", arr - m_rated, m_rated, tol, out)
    _violations("accumulator charge from boiler", m_c - p_eb / co.dh_tot, m_c, tol, out)

    _violations("accumulator lower bound", -m_sa, 0.0, tol, out)
    _violations("accumulator capacity", m_sa - cfg.M_sa_max, cfg.M_sa_max, tol, out)
    _violations("accumulator initial charge", np.abs(m_sa[:1] - SA_INIT_FRAC * cfg.M_sa_max), cfg.M_sa_max, tol, out)
    tank_rhs = (1.0 - co.eps_sa * dt) * m_sa[:-1] + co.eta_sa_charge * dt * m_c - dt * m_d / co.eta_sa_discharge
    _violations("tank balance", np.abs(m_sa[1:] - tank_rhs), np.abs(m_sa[1:]) + dt * (m_c + m_d), tol, out)

    _violations("battery SOC minimum", battery.soc_min_frac * q_max - q_b, q_max, tol, out)
    _violations("battery SOC maximum", q_b - battery.soc_max_frac * q_max, q_max, tol, out)
    _violations("battery initial SOC", np.abs(q_b[:1] - battery.soc_init_frac * q_max), q_max, tol, out)
    batt_rhs = (
        (1.0 - battery.self_discharge_per_second * dt) * q_b[:-1]
        + battery.eta_charge * dth * p_bc
        - dth * p_bd / battery.eta_discharge
    )
    _violations("battery balance", np.abs(q_b[1:] - batt_rhs), np.abs(q_b[1:]) + dth * (p_bc + p_bd), tol, out)

    headroom_down = (p_max - p_eb) + (p_b_max - (p_bc - p_bd))
    headroom_up = fcr_up_headroom(result, battery)
    _violations("FCR lower bound", -p_fcr, 0.0, tol, out)
    _violations("FCR down-regulation headroom", p_fcr - headroom_down, p_max + p_b_max, tol, out)
    _violations("FCR up-regulation headroom", p_fcr - headroom_up, p_max + p_b_max, tol, out)
    blocks = fcr_blocks(len(p_fcr), result.dt)
    if blocks.size:
        first = np.r_[True, blocks[1:] != blocks[:-1]]
        block_start_value = np.maximum.accumulate(np.where(first, np.arange(blocks.size), 0))
        _violations("FCR hourly block", np.abs(p_fcr - p_fcr[block_start_value]), p_fcr, tol, out)
    return out


@dataclass(frozen=True)
class DispatchKpis:
    max_grid_power_W: float
    mean_grid_power_W: float
    total_grid_energy_Wh: float
    sa_daily_cycles: Optional[float]
    battery_daily_cycles: Optional[float]
    peak_grid_power_W: float
    objective_EUR: float
    status: str
    # KPIs that may differ between alternative optimal vertices
    solver_dependent: tuple = ("sa_daily_cycles", "battery_daily_cycles")

    def as_dict(self) -> dict:
        return {
            "max_grid_power_W": self.max_grid_power_W,
            "mean_grid_power_W": self.mean_grid_power_W,
            "total_grid_energy_Wh": self.total_grid_energy_Wh,
            "sa_daily_cycles": self.sa_daily_cycles,
            "battery_daily_cycles": self.battery_daily_cycles,
            "peak_grid_power_W": self.peak_grid_power_W,
            "objective_EUR": self.objective_EUR,
            "status": self.status,
            "solver_dependent": list(self.solver_dependent),
        }


def extract_kpis(result: DispatchResult, scenario: Scenario, config: Optional[SystemConfig] = None) -> DispatchKpis:
    """Annual energy and power figures of an optimal dispatch."""
    if not result.is_optimal:
        raise DomainError(f"KPIs need an optimal dispatch, got status {result.status!r}")
    config = config or result.config
    dth = scenario.dt_hours
    p_grid = result.P_grid
    n_days = scenario.n_days

    sa_cycles = None
    if config.has_accumulator and n_days > 0:
        # gross flows, so a charge/discharge loop shows up as cycling
        throughput = np.sum(result.m_dot_sa_discharge + result.m_dot_sa_charge) * scenario.dt
        sa_cycles = float(throughput / (2.0 * config.M_sa_max * n_days))
    batt_cycles = None
    if config.has_battery and n_days > 0:
        throughput = np.sum(result.P_b_charge + result.P_b_discharge) * dth
        batt_cycles = float(throughput / (2.0 * config.Q_b_max * n_days))

    return DispatchKpis(
        max_grid_power_W=float(np.max(p_grid)) if p_grid.size else 0.0,
        mean_grid_power_W=float(np.mean(p_grid)) if p_grid.size else 0.0,
        total_grid_energy_Wh=float(np.sum(p_grid) * dth),
        sa_daily_cycles=sa_cycles,
        battery_daily_cycles=batt_cycles,
        peak_grid_power_W=float(result.peak_grid_power),
        objective_EUR=float(result.objective),
        status=result.status,
    )


def log_dispatch_summary(result: DispatchResult) -> None:
    if result.is_optimal:
        eprint(f"[summary] objective={result.objective:.2f} EUR peak={result.peak_grid_power / KW:.1f} kW")
    else:
        eprint(f"[summary] status={result.status}: {result.message}")
