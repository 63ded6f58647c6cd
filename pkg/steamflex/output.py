"""Writers for dispatch, sizing and sweep results."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from steamflex.optimize.dispatch import DispatchKpis, DispatchResult
from steamflex.optimize.economics import CostBreakdown, annual_savings, specific_cost
from steamflex.optimize.evolution import DeResult
from steamflex.optimize.search import INFEASIBLE_PENALTY, Evaluation, SizingOutcome, SweepResult
from steamflex.system.market import Scenario

DISPATCH_COLUMNS = [
    "step",
    "timestamp",
    "P_grid_W",
    "P_eb_W",
    "P_b_charge_W",
    "P_b_discharge_W",
    "P_fcr_W",
    "m_dot_eb_kg_s",
    "m_dot_sa_charge_kg_s",
    "m_dot_sa_discharge_kg_s",
    "m_dot_plant_kg_s",
    "M_sa_kg",
    "Q_b_Wh",
]


def prepare_output_dir(path_str: str) -> Path:
    p = Path(path_str)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, NaN/inf to null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(payload: Dict[str, Any], out_path: Path) -> None:
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(_clean(payload), f, indent=2)
        f.write("\n")


def write_dispatch_csv(result: DispatchResult, scenario: Scenario, out_path: Path) -> None:
    """One row per step; storage columns hold the state at the end of the step."""
    stamps = scenario.timestamps()
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, quoting=csv.QUOTE_MINIMAL)
        w.writerow(DISPATCH_COLUMNS)
        for t in range(scenario.horizon_steps):
            w.writerow([
                t,
                stamps[t].strftime("%Y-%m-%dT%H:%M:%SZ"),
                repr(float(result.P_grid[t])),
                repr(float(result.P_eb[t])),
                repr(float(result.P_b_charge[t])),
                repr(float(result.P_b_discharge[t])),
                repr(float(result.P_fcr[t])),
                repr(float(result.m_dot_eb[t])),
                repr(float(result.m_dot_sa_charge[t])),
                repr(float(result.m_dot_sa_discharge[t])),
                repr(float(result.m_dot_plant[t])),
                repr(float(result.M_sa[t + 1])),
                repr(float(result.Q_b[t + 1])),
            ])


def kpis_payload(kpis: DispatchKpis, warnings: Optional[list] = None) -> Dict[str, Any]:
    payload = kpis.as_dict()
    payload["warnings"] = list(warnings or [])
    return payload


def cost_payload(breakdown: CostBreakdown) -> Dict[str, Any]:
    return breakdown.as_dict()


def write_sweep_csv(sweep: SweepResult, out_path: Path) -> None:
    sweep.to_frame().to_csv(out_path, index=False)


def write_de_trace_csv(result: DeResult, out_path: Path) -> None:
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, quoting=csv.QUOTE_MINIMAL)
        w.writerow(["generation", "best_objective", "best_npv_EUR"])
        for g, value in enumerate(result.trace):
            npv_value = "" if value >= INFEASIBLE_PENALTY else repr(-float(value))
            w.writerow([g, repr(float(value)), npv_value])


def evaluation_payload(ev: Evaluation, investment_model=None) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "configuration": ev.config.as_dict(),
        "feasible": ev.feasible,
        "investment": ev.investment.as_dict(),
        "npv_EUR": ev.npv,
        "cost_breakdown": ev.breakdown.as_dict() if ev.breakdown else None,
        "peak_grid_power_W": ev.peak_grid_power,
    }
    if investment_model is not None:
        payload["specific_cost"] = specific_cost(ev.config, investment_model)
    if ev.message:
        payload["message"] = ev.message
    return payload


def best_config_payload(outcome: SizingOutcome, investment_model=None, annual_scale: float = 1.0) -> Dict[str, Any]:
    best = outcome.best
    payload: Dict[str, Any] = {
        "best": evaluation_payload(best, investment_model) if best else None,
        "delta_npv_EUR": outcome.best_delta_npv,
        "reference": evaluation_payload(outcome.reference, investment_model),
        "grid_best": None,
        "de_best": evaluation_payload(outcome.de_best) if outcome.de_best else None,
        "de_generations": outcome.de.generations if outcome.de else 0,
        "de_evaluations": outcome.de.nfev if outcome.de else 0,
    }
    grid_best = outcome.grid.best()
    if grid_best is not None:
        payload["grid_best"] = evaluation_payload(grid_best.evaluation)
    if best is not None and best.breakdown and outcome.reference.breakdown:
        payload["annual_savings_EUR"] = annual_savings(outcome.reference.breakdown, best.breakdown, annual_scale)
    return payload


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
