"""Energy cost accounting, investment cost and net present value."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
import numpy_financial as npf

from steamflex.optimize.dispatch import KW, DispatchResult
from steamflex.shared.errors import ConsistencyError, DomainError
from steamflex.system.market import Scenario
from steamflex.system.models import SECONDS_PER_MONTH, SystemConfig

SECONDS_PER_YEAR = 12.0 * SECONDS_PER_MONTH


@dataclass(frozen=True)
class CostBreakdown:
    """Energy cost terms of one dispatch horizon, in EUR."""

    C_S: float
    C_ec: float
    C_pc: float
    C_0: float
    Pi_fcr: float

    @property
    def C_E(self) -> float:
        return self.C_S + self.C_ec + self.C_pc + self.C_0

    @property
    def operating_cost(self) -> float:
        return self.C_S + self.C_ec + self.C_pc

    @property
    def net_energy_cost(self) -> float:
        return self.C_E - self.Pi_fcr

    def as_dict(self) -> Dict[str, float]:
        return {
            "C_S": self.C_S,
            "C_ec": self.C_ec,
            "C_pc": self.C_pc,
            "C_0": self.C_0,
            "Pi_fcr": self.Pi_fcr,
            "C_E": self.C_E,
            "net_energy_cost": self.net_energy_cost,
        }


def cost_breakdown(result: DispatchResult, scenario: Scenario, tol: float = 1e-6) -> CostBreakdown:
    """Recompute every cost term from the dispatch series.

    Raises :class:`ConsistencyError` when the recomputed net cost and the LP
    objective disagree by more than ``tol`` relative.
    """
    if not result.is_optimal:
        raise DomainError(f"cost breakdown needs an optimal dispatch, got status {result.status!r}")
    dth = scenario.dt_hours
    spot = scenario.spot_values()
    vol = scenario.volumetric_values()
    p_grid = result.P_grid / KW
    peak = max(0.0, float(np.max(p_grid))) if p_grid.size else 0.0

    breakdown = CostBreakdown(
        C_S=float(np.sum(spot * p_grid) * dth),
        C_ec=float(np.sum(vol * np.maximum(p_grid, 0.0)) * dth),
        C_pc=scenario.months * scenario.tariff.capacity * peak,
        C_0=float(np.mean(spot + vol)) * result.initial_charge_kWh if p_grid.size else 0.0,
        Pi_fcr=float(np.sum(scenario.fcr_values() * result.P_fcr / KW) * dth),
    )
    if result.objective is not None:
        gap = abs(breakdown.net_energy_cost - result.objective)
        if gap > tol * (1.0 + abs(result.objective)):
            raise ConsistencyError(
                f"cost breakdown ({breakdown.net_energy_cost:.6f} EUR) disagrees with the dispatch "
                f"objective ({result.objective:.6f} EUR) by {gap:.3g} EUR"
            )
    return breakdown


def annual_scale_for(scenario: Scenario) -> float:
    """Factor turning a representative slice into annual-equivalent cash flow."""
    if not scenario.is_slice:
        return 1.0
    return SECONDS_PER_YEAR / scenario.horizon_seconds


@dataclass(frozen=True)
class InvestmentModel:
    """Power-law investment cost with economy of scale.

    Base costs in EUR/kW (boiler), EUR/kg (accumulator), EUR/kWh (battery).
    References: P0 in W, M0 in kg, Q0 in Wh.
    """

    c_eb: float = 152.0
    beta_eb: float = -0.296
    c_sa: float = 191.0
    alpha_sa: float = -0.05
    c_b: float = 433.0
    alpha_b: float = -0.164
    beta_b: float = 0.005
    P0: float = 1e6
    M0: float = 1000.0
    Q0: float = 1e6
    f_eb: float = 1.0
    f_sa: float = 1.0
    f_b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("c_eb", "c_sa", "c_b", "f_eb", "f_sa", "f_b"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("P0", "M0", "Q0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"reference {name} must be > 0, got {getattr(self, name)!r}")

    def with_factors(self, f_eb: Optional[float] = None, f_sa: Optional[float] = None,
                     f_b: Optional[float] = None) -> "InvestmentModel":
        return replace(
            self,
            f_eb=self.f_eb if f_eb is None else f_eb,
            f_sa=self.f_sa if f_sa is None else f_sa,
            f_b=self.f_b if f_b is None else f_b,
        )


@dataclass(frozen=True)
class InvestmentBreakdown:
    C_eb: float
    C_sa: float
    C_b: float

    @property
    def C_I(self) -> float:
        return self.C_eb + self.C_sa + self.C_b

    def as_dict(self) -> Dict[str, float]:
        return {"C_eb": self.C_eb, "C_sa": self.C_sa, "C_b": self.C_b, "C_I": self.C_I}


def investment_cost(config: SystemConfig, model: InvestmentModel) -> InvestmentBreakdown:
    p = config.P_eb_max
    m = config.M_sa_max
    q = config.Q_b_max
    c_eb = model.f_eb * model.c_eb * (p / KW) * (p / model.P0) ** model.beta_eb if p > 0 else 0.0
    c_sa = model.f_sa * model.c_sa * m * (m / model.M0) ** model.alpha_sa if m > 0 else 0.0
    c_b = (
        model.f_b * model.c_b * (q / KW) * (q / model.Q0) ** model.alpha_b * config.c_rate ** model.beta_b
        if q > 0
        else 0.0
    )
    return InvestmentBreakdown(C_eb=c_eb, C_sa=c_sa, C_b=c_b)


def specific_cost(config: SystemConfig, model: InvestmentModel) -> Dict[str, Optional[float]]:
    """Investment per unit of capacity (EUR/kW, EUR/kg, EUR/kWh); None for absent units."""
    inv = investment_cost(config, model)
    return {
        "EUR_per_kW_eb": inv.C_eb / (config.P_eb_max / KW) if config.P_eb_max > 0 else None,
        "EUR_per_kg_sa": inv.C_sa / config.M_sa_max if config.M_sa_max > 0 else None,
        "EUR_per_kWh_b": inv.C_b / (config.Q_b_max / KW) if config.Q_b_max > 0 else None,
    }


@dataclass(frozen=True)
class NpvParams:
    discount_rate: float = 0.05
    lifetime: int = 15
    maintenance_fraction: float = 0.02
    # first year carrying an operating cash flow
    year_index_start: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.discount_rate < 1.0):
            raise DomainError(f"discount_rate must be in [0, 1), got {self.discount_rate!r}")
        if int(self.lifetime) != self.lifetime or self.lifetime < 1:
            raise DomainError(f"lifetime must be an integer >= 1, got {self.lifetime!r}")
        if not self.maintenance_fraction >= 0:
            raise DomainError(f"maintenance_fraction must be >= 0, got {self.maintenance_fraction!r}")
        if self.year_index_start not in (0, 1):
            raise DomainError(f"year_index_start must be 0 or 1, got {self.year_index_start!r}")


def annual_cash_flow(annual: CostBreakdown, invest: float, params: NpvParams, annual_scale: float = 1.0) -> float:
    """Yearly FCR profit minus energy cost minus maintenance.

    ``annual_scale`` extrapolates the operating terms of a slice; the initial
    charge cost is not scaled.
    """
    operating = annual_scale * (annual.Pi_fcr - annual.operating_cost)
    return operating - annual.C_0 - params.maintenance_fraction * invest


def npv(annual: CostBreakdown, invest: float, params: NpvParams, annual_scale: float = 1.0) -> float:
    flow = annual_cash_flow(annual, invest, params, annual_scale)
    years = params.lifetime - params.year_index_start + 1
    values = [0.0] * params.year_index_start + [flow] * years
    return float(npf.npv(params.discount_rate, values)) - invest


def delta_npv(config_npv: float, reference_npv: float) -> float:
    return config_npv - reference_npv


def annual_savings(reference: CostBreakdown, candidate: CostBreakdown, annual_scale: float = 1.0) -> float:
    """Yearly reduction of net energy cost against the no-storage reference."""
    ref = annual_scale * (reference.operating_cost - reference.Pi_fcr) + reference.C_0
    cand = annual_scale * (candidate.operating_cost - candidate.Pi_fcr) + candidate.C_0
    return ref - cand


@dataclass(frozen=True)
class EconomicContext:
    investment: InvestmentModel = field(default_factory=InvestmentModel)
    npv: NpvParams = field(default_factory=NpvParams)
