"""Reduced steam-accumulator and electrode-boiler thermodynamics.

The accumulator is treated as a mass store: pipe heat losses become charge
and discharge efficiencies, tank heat loss becomes a self-discharge rate.
All heat flows are in W, enthalpies in kJ/kg.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

from steamflex.shared.errors import DomainError
from steamflex.system.models import SteamSystemParams, StorageCoefficients, SECONDS_PER_MONTH

KJ = 1e3


def total_enthalpy(params: SteamSystemParams, T0: Optional[float] = None) -> float:
    """Energy needed to raise inlet water at ``T0`` to steam at ``T_op`` (kJ/kg)."""
    T0 = params.T0 if T0 is None else float(T0)
    if T0 < params.T_ref:
        raise DomainError(f"inlet temperature T0={T0} K is below the reference T_ref={params.T_ref} K")
    if T0 >= params.T_op:
        raise DomainError(f"inlet temperature T0={T0} K must be below the operating temperature T_op={params.T_op} K")

    if params.enthalpy_model == "integral":
        if T0 > params.T_boil or params.T_boil > params.T_op:
            raise DomainError(
                f"integral enthalpy needs T0 <= T_boil <= T_op, got ({T0}, {params.T_boil}, {params.T_op})"
            )
        return (
            params.cp_w * (params.T_boil - T0)
            + params.cp_s * (params.T_op - params.T_boil)
            + params.dh_vap
        )
    return params.dh_ref - params.cp_w * (T0 - params.T_ref)


def _driving_dT(params: SteamSystemParams, T_op: Optional[float]) -> float:
    T = params.T_op if T_op is None else float(T_op)
    return T - params.T_a


def pipe_heat_loss(params: SteamSystemParams, length: float, T_op: Optional[float] = None) -> float:
    """Heat loss through the insulation of a steam pipe of ``length`` metres."""
    if length < 0:
        raise DomainError(f"pipe length must be >= 0, got {length}")
    pipe = params.pipe
    return 2.0 * math.pi * (pipe.lambda_pipe / pipe.delta_pipe) * length * pipe.r * _driving_dT(params, T_op)


def tank_geometry_from_capacity(params: SteamSystemParams, M_max: float) -> Tuple[float, float]:
    """Cylinder (H, R) holding ``M_max`` kg at the configured density and aspect ratio."""
    if not M_max > 0:
        raise DomainError(f"accumulator mass capacity must be > 0, got {M_max}")
    tank = params.tank
    R = (M_max / (math.pi * tank.rho_store * tank.aspect_ratio)) ** (1.0 / 3.0)
    return tank.aspect_ratio * R, R


def tank_heat_loss(params: SteamSystemParams, H: float, R: float, T_op: Optional[float] = None) -> float:
    if not (H > 0 and R > 0):
        raise DomainError(f"tank dimensions must be > 0, got H={H}, R={R}")
    tank = params.tank
    return 2.0 * math.pi * (tank.lambda_tank / tank.delta_tank) * (H * R + R * R) * _driving_dT(params, T_op)


def storage_coefficients(
    params: SteamSystemParams,
    M_max: float,
    rated_power: float,
    T0: Optional[float] = None,
) -> StorageCoefficients:
    """Efficiencies and self-discharge of the accumulator at rated boiler flow.

    Flow-dependent efficiencies are evaluated once at ``rated_power`` (W) so
    the dispatch problem stays linear.
    """
    if M_max < 0:
        raise DomainError(f"accumulator mass capacity must be >= 0, got {M_max}")
    if not rated_power > 0:
        raise DomainError(f"rated thermal power must be > 0, got {rated_power}")
    T0 = params.T0 if T0 is None else float(T0)
    dh_tot = total_enthalpy(params, T0)

    q_plus = pipe_heat_loss(params, params.pipe.L_plus)
    q_minus = pipe_heat_loss(params, params.pipe.L_minus)
    if rated_power <= max(q_plus, q_minus):
        raise DomainError(
            f"pipe loss exceeds rated thermal power ({max(q_plus, q_minus):.0f} W >= {rated_power:.0f} W)"
        )

    if M_max == 0:
        q_tank = 0.0
        eps = 0.0
    elif params.self_discharge_override is not None:
        eps = params.self_discharge_override / SECONDS_PER_MONTH
        q_tank = eps * M_max * dh_tot * KJ
    else:
        H, R = tank_geometry_from_capacity(params, M_max)
        q_tank = tank_heat_loss(params, H, R)
        eps = q_tank / (M_max * dh_tot * KJ)

    return StorageCoefficients(
        dh_tot=dh_tot,
        eta_sa_charge=1.0 - q_plus / rated_power,
        eta_sa_discharge=1.0 - q_minus / rated_power,
        eps_sa=eps,
        q_loss_charge_pipe=q_plus,
        q_loss_discharge_pipe=q_minus,
        q_loss_tank=q_tank,
        rated_power=rated_power,
        T0=T0,
        M_max=M_max,
    )


def calibrate_operating_temperature(
    params: SteamSystemParams,
    target_eta: float,
    rated_power: float,
) -> float:
    """Operating temperature at which the charge efficiency equals ``target_eta``.

    Pipe loss is linear in (T_op − T_a), so the back-solve is closed form.
    """
    if not (0.0 < target_eta < 1.0):
        raise DomainError(f"target efficiency must be in (0, 1), got {target_eta}")
    if not rated_power > 0:
        raise DomainError(f"rated thermal power must be > 0, got {rated_power}")

    pipe = params.pipe
    loss_per_kelvin = 2.0 * math.pi * (pipe.lambda_pipe / pipe.delta_pipe) * pipe.L_plus * pipe.r
    T_op = params.T_a + (1.0 - target_eta) * rated_power / loss_per_kelvin
    if not (T_op > params.T0 and T_op > params.T_a):
        raise DomainError(
            f"target efficiency {target_eta} is unreachable: it needs T_op={T_op:.2f} K, "
            f"which does not exceed T0={params.T0} K and T_a={params.T_a} K"
        )
    if not params.dh_ref > params.cp_w * (T_op - params.T_ref):
        raise DomainError(f"target efficiency {target_eta} needs T_op={T_op:.2f} K, beyond the enthalpy model range")
    return T_op
