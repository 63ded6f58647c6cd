"""Data models for the steam/electricity system."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from steamflex.shared.errors import DomainError

SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0
# mean Gregorian month; used for "per month" rates
SECONDS_PER_MONTH = 365.25 * SECONDS_PER_DAY / 12.0

ENTHALPY_MODELS = ("affine", "integral")


def _require_positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise DomainError(f"{name} must be strictly positive and finite, got {value!r}")


@dataclass(frozen=True)
class PipeGeometry:
    L_plus: float = 300.0
    L_minus: float = 300.0
    r: float = 0.10
    lambda_pipe: float = 0.1
    delta_pipe: float = 0.04

    def __post_init__(self) -> None:
        for name in ("L_plus", "L_minus", "r", "lambda_pipe", "delta_pipe"):
            _require_positive(f"pipe.{name}", getattr(self, name))


@dataclass(frozen=True)
class TankGeometry:
    lambda_tank: float = 0.1
    delta_tank: float = 0.20
    rho_store: float = 1000.0
    aspect_ratio: float = 2.0

    def __post_init__(self) -> None:
        for name in ("lambda_tank", "delta_tank", "rho_store", "aspect_ratio"):
            _require_positive(f"tank.{name}", getattr(self, name))


@dataclass(frozen=True)
class SteamSystemParams:
    """Physical constants and geometry of the steam side.

    Temperatures in K, enthalpies in kJ/kg, heat capacities in kJ/(kg·K).
    ``T0`` is the default inlet temperature; a sizing config may override it.
    """

    T_op: float = 478.2
    T0: float = 283.0
    T_a: float = 283.0
    dh_ref: float = 2772.0
    T_ref: float = 283.0
    cp_w: float = 4.186
    cp_s: float = 2.01
    dh_vap: float = 2257.0
    T_boil: float = 373.15
    pipe: PipeGeometry = field(default_factory=PipeGeometry)
    tank: TankGeometry = field(default_factory=TankGeometry)
    enthalpy_model: str = "affine"
    # fraction per month; replaces the tank heat-loss estimate when set
    self_discharge_override: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("T_op", "T0", "T_a", "T_ref", "dh_ref", "cp_w", "cp_s", "dh_vap", "T_boil"):
            _require_positive(name, getattr(self, name))
        if not self.T_op > self.T0:
            raise DomainError(f"T_op ({self.T_op} K) must exceed inlet temperature T0 ({self.T0} K)")
        if not self.T_op > self.T_a:
            raise DomainError(f"T_op ({self.T_op} K) must exceed ambient temperature T_a ({self.T_a} K)")
        # enthalpy must stay positive over the admissible inlet range [T_ref, T_op)
        if not self.dh_ref > self.cp_w * (self.T_op - self.T_ref):
            raise DomainError(
                f"dh_ref ({self.dh_ref} kJ/kg) must exceed cp_w·(T_op − T_ref) = "
                f"{self.cp_w * (self.T_op - self.T_ref):.1f} kJ/kg"
            )
        if self.enthalpy_model not in ENTHALPY_MODELS:
            raise DomainError(f"enthalpy_model must be one of {ENTHALPY_MODELS}, got {self.enthalpy_model!r}")
        if self.self_discharge_override is not None and not (0.0 <= self.self_discharge_override < 1.0):
            raise DomainError(
                f"self_discharge_override must be in [0, 1) per month, got {self.self_discharge_override!r}"
            )

    def with_operating_temperature(self, T_op: float) -> "SteamSystemParams":
        return replace(self, T_op=T_op)


@dataclass(frozen=True)
class BatteryParams:
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    self_discharge: float = 0.03  # fraction per month
    soc_min_frac: float = 0.10
    soc_max_frac: float = 0.90
    soc_init_frac: float = 0.90

    def __post_init__(self) -> None:
        if not (0.0 < self.eta_charge <= 1.0):
            raise DomainError(f"eta_charge must be in (0, 1], got {self.eta_charge!r}")
        if not (0.0 < self.eta_discharge <= 1.0):
            raise DomainError(f"eta_discharge must be in (0, 1], got {self.eta_discharge!r}")
        if not (0.0 <= self.self_discharge < 1.0):
            raise DomainError(f"self_discharge must be in [0, 1) per month, got {self.self_discharge!r}")
        if not (0.0 <= self.soc_min_frac < self.soc_init_frac <= self.soc_max_frac <= 1.0):
            raise DomainError(
                "battery SOC fractions must satisfy 0 <= soc_min < soc_init <= soc_max <= 1, got "
                f"({self.soc_min_frac}, {self.soc_init_frac}, {self.soc_max_frac})"
            )

    @property
    def self_discharge_per_second(self) -> float:
        return self.self_discharge / SECONDS_PER_MONTH


@dataclass(frozen=True)
class StorageCoefficients:
    """Reduced steam-accumulator model used by the dispatch LP.

    ``eta_sa_discharge`` is the fraction of withdrawn tank mass that reaches
    the steam network; the mass balance removes ``m_dot / eta_sa_discharge``.
    """

    dh_tot: float  # kJ/kg
    eta_sa_charge: float
    eta_sa_discharge: float
    eps_sa: float  # 1/s
    q_loss_charge_pipe: float  # W
    q_loss_discharge_pipe: float  # W
    q_loss_tank: float  # W
    rated_power: float  # W
    T0: float  # K
    M_max: float  # kg

    def __post_init__(self) -> None:
        if not (0.0 < self.eta_sa_charge <= 1.0):
            raise DomainError(f"eta_sa_charge must be in (0, 1], got {self.eta_sa_charge!r}")
        if not (0.0 < self.eta_sa_discharge <= 1.0):
            raise DomainError(f"eta_sa_discharge must be in (0, 1], got {self.eta_sa_discharge!r}")
        if self.eps_sa < 0.0:
            raise DomainError(f"eps_sa must be non-negative, got {self.eps_sa!r}")
        _require_positive("dh_tot", self.dh_tot)

    @property
    def eps_sa_per_month(self) -> float:
        return self.eps_sa * SECONDS_PER_MONTH

    @property
    def round_trip_efficiency(self) -> float:
        return self.eta_sa_charge * self.eta_sa_discharge

    @classmethod
    def lossless(cls, dh_tot: float, rated_power: float, T0: float, M_max: float = 0.0) -> "StorageCoefficients":
        return cls(
            dh_tot=dh_tot,
            eta_sa_charge=1.0,
            eta_sa_discharge=1.0,
            eps_sa=0.0,
            q_loss_charge_pipe=0.0,
            q_loss_discharge_pipe=0.0,
            q_loss_tank=0.0,
            rated_power=rated_power,
            T0=T0,
            M_max=M_max,
        )


@dataclass(frozen=True)
class SystemConfig:
    """Candidate equipment sizing.

    P_eb_max in W, M_sa_max in kg, Q_b_max in Wh, c_rate in 1/h, T0 in K.
    """

    P_eb_max: float
    M_sa_max: float = 0.0
    Q_b_max: float = 0.0
    c_rate: float = 0.0
    T0: float = 283.0

    def __post_init__(self) -> None:
        for name in ("P_eb_max", "M_sa_max", "Q_b_max", "c_rate"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
        _require_positive("T0", self.T0)
        if self.Q_b_max > 0.0 and not self.c_rate > 0.0:
            raise DomainError("c_rate must be > 0 when Q_b_max > 0")

    @property
    def has_accumulator(self) -> bool:
        return self.M_sa_max > 0.0

    @property
    def has_battery(self) -> bool:
        return self.Q_b_max > 0.0

    def without_storage(self) -> "SystemConfig":
        return replace(self, M_sa_max=0.0, Q_b_max=0.0)

    def as_dict(self) -> dict:
        return {
            "P_eb_max_W": self.P_eb_max,
            "M_sa_max_kg": self.M_sa_max,
            "Q_b_max_Wh": self.Q_b_max,
            "c_rate_per_h": self.c_rate,
            "T0_K": self.T0,
        }
