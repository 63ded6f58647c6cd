"""Unit-string parsing for configuration values.

Every dimensional config value is written as ``"<number> <unit>"`` and is
converted to the base unit the consuming field expects. Bare numbers are
rejected so that kW/W mix-ups fail at parse time.
"""

from __future__ import annotations

import re
from typing import Any, Dict

from steamflex.shared.errors import ConfigError

# base unit -> accepted spellings and their factor to the base unit
UNIT_FAMILIES: Dict[str, Dict[str, float]] = {
    "W": {"W": 1.0, "kW": 1e3, "MW": 1e6},
    "Wh": {"Wh": 1.0, "kWh": 1e3, "MWh": 1e6},
    "kg": {"kg": 1.0, "t": 1e3},
    "m": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "s": {"s": 1.0, "min": 60.0, "h": 3600.0},
    "1/h": {"1/h": 1.0, "/h": 1.0},
    "kJ/kg": {"kJ/kg": 1.0, "J/kg": 1e-3},
    "kJ/(kg*K)": {"kJ/(kg*K)": 1.0, "kJ/kg/K": 1.0, "J/(kg*K)": 1e-3, "J/kg/K": 1e-3},
    "W/(m*K)": {"W/(m*K)": 1.0, "W/m/K": 1.0},
    "kg/m3": {"kg/m3": 1.0, "kg/m^3": 1.0},
    "kg/s": {"kg/s": 1.0, "kg/h": 1.0 / 3600.0, "t/h": 1e3 / 3600.0},
    "EUR/kWh": {"EUR/kWh": 1.0, "EUR/MWh": 1e-3},
    "EUR/kW": {"EUR/kW": 1.0, "EUR/MW": 1e-3},
    "EUR/kW/month": {"EUR/kW/month": 1.0, "EUR/MW/month": 1e-3},
    "EUR/kg": {"EUR/kg": 1.0, "EUR/t": 1e-3},
}

_CELSIUS = {"degC", "°C", "C"}
_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S.*?)\s*$")


def _normalize_unit(unit: str) -> str:
    return unit.replace(" ", "").replace("·", "*").replace("³", "3")


def parse_quantity(value: Any, base_unit: str, field: str = "value") -> float:
    """Parse ``"<number> <unit>"`` into a float expressed in ``base_unit``."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError(
            f"{field}: expected a unit string like '1 {base_unit}', got {value!r}"
        )
    m = _QUANTITY_RE.match(value)
    if not m:
        raise ConfigError(f"{field}: cannot parse quantity {value!r}")
    number = float(m.group(1))
    unit = _normalize_unit(m.group(2))

    if base_unit == "K":
        if unit == "K":
            return number
        if unit in _CELSIUS:
            return number + 273.15
        raise ConfigError(f"{field}: unit {unit!r} is not a temperature (expected K or degC)")

    family = UNIT_FAMILIES.get(base_unit)
    if family is None:
        raise ConfigError(f"{field}: unknown base unit {base_unit!r}")
    normalized = {_normalize_unit(k): v for k, v in family.items()}
    if unit not in normalized:
        accepted = ", ".join(sorted(family))
        raise ConfigError(f"{field}: unit {unit!r} not accepted here (expected one of: {accepted})")
    return number * normalized[unit]


def parse_optional_quantity(value: Any, base_unit: str, field: str = "value"):
    if value is None:
        return None
    return parse_quantity(value, base_unit, field=field)
