"""Dynamic-programming reference for lossless boiler + accumulator dispatch.

With dh = 3600 kJ/kg one kWh of boiler output makes one kg of steam, so an
hourly schedule is a lot-sizing problem in kg. Integral demand, boiler and
tank data keep every LP vertex on a half-kilogram grid, which the DP
enumerates exactly. FCR revenue is concave in the boiler energy with its
kink at half the boiler rating, so it stays on the same grid.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


def dp_min_cost(
    spot: Sequence[float],
    demand_kg: Sequence[float],
    p_max_kwh: float,
    m_max: float,
    m_init: float,
    step: float = 0.5,
    fcr: Optional[Sequence[float]] = None,
) -> float:
    """Minimum Σ spot·boiler energy minus FCR revenue; the final tank level is free."""
    fcr = np.zeros(len(spot)) if fcr is None else np.asarray(fcr, dtype=float)
    states = np.arange(0.0, m_max + step / 2, step)
    value = np.zeros(states.size)
    for price, demand, reserve in zip(reversed(list(spot)), reversed(list(demand_kg)), reversed(list(fcr))):
        # boiler[i, j]: energy needed to go from states[i] to states[j]
        boiler = demand + states[None, :] - states[:, None]
        feasible = (boiler >= -1e-9) & (boiler <= p_max_kwh + 1e-9)
        headroom = np.clip(np.minimum(boiler, p_max_kwh - boiler), 0.0, None)
        total = np.where(feasible, price * boiler - reserve * headroom + value[None, :], np.inf)
        value = total.min(axis=1)
    return float(value[int(round(m_init / step))])
