"""Ingestion, cleaning and alignment of hourly market and demand data.

Canonical CSV schema: header ``timestamp,value``; ISO-8601 UTC timestamps
(``2024-01-01T00:00:00Z``); decimal point; no thousands separators; UTF-8.
Gaps are never filled silently.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from steamflex.shared.errors import DomainError, IngestionError, ScenarioValidationError
from steamflex.system.models import SECONDS_PER_DAY, SECONDS_PER_HOUR, SECONDS_PER_MONTH

_UNIT_RE = re.compile(r"^(?:[A-Z]{3}/(?:kWh|kW)|kg/s|W)$")
LEAP_YEAR_HOURS = 8784


def _as_utc(ts) -> pd.Timestamp:
    t = pd.Timestamp(ts)
    if t.tzinfo is None:
        return t.tz_localize("UTC")
    return t.tz_convert("UTC")


@dataclass(frozen=True)
class TimeSeries:
    """Gap-free, equidistant series with an immutable unit tag."""

    start: pd.Timestamp
    dt: int
    values: np.ndarray
    unit: str

    def __post_init__(self) -> None:
        if int(self.dt) != self.dt or self.dt <= 0:
            raise DomainError(f"time step must be a positive whole number of seconds, got {self.dt!r}")
        if not _UNIT_RE.match(self.unit or ""):
            raise DomainError(f"unsupported unit tag {self.unit!r} (expected CUR/kWh, CUR/kW, kg/s or W)")
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("time series values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise DomainError(f"time series has a missing or non-finite value at step {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dt", int(self.dt))
        object.__setattr__(self, "start", _as_utc(self.start))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> pd.Timestamp:
        return self.start + pd.Timedelta(seconds=self.dt * len(self))

    def index(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self), freq=pd.Timedelta(seconds=self.dt))

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.index())

    def integral(self) -> float:
        """Sum of value·dt over the series."""
        return float(np.sum(self.values) * self.dt)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def with_values(self, values, unit: Optional[str] = None) -> "TimeSeries":
        return TimeSeries(start=self.start, dt=self.dt, values=values, unit=unit or self.unit)

    def rebase(self, start) -> "TimeSeries":
        """Same values, re-anchored to a new start timestamp."""
        return TimeSeries(start=_as_utc(start), dt=self.dt, values=self.values, unit=self.unit)

    def slice(self, start_step: int, steps: int) -> "TimeSeries":
        if start_step < 0 or steps <= 0 or start_step + steps > len(self):
            raise DomainError(f"slice [{start_step}, {start_step + steps}) outside series of length {len(self)}")
        return TimeSeries(
            start=self.start + pd.Timedelta(seconds=self.dt * start_step),
            dt=self.dt,
            values=self.values[start_step:start_step + steps],
            unit=self.unit,
        )


@dataclass(frozen=True)
class ColumnSpec:
    timestamp: str = "timestamp"
    value: str = "value"
    # required when a file has a single row; otherwise inferred
    dt: Optional[int] = None


def load_timeseries(path: Union[str, Path], unit_tag: str, column_spec: Optional[ColumnSpec] = None) -> TimeSeries:
    """Read a canonical CSV into a gap-free :class:`TimeSeries`."""
    spec = column_spec or ColumnSpec()
    path = Path(path)
    if not path.is_file():
        raise IngestionError("input file not found", path=str(path))

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except pd.errors.ParserError as e:
        m = re.search(r"line (\d+)", str(e))
        raise IngestionError(f"malformed row: {e}", path=str(path), line=int(m.group(1)) if m else None) from e
    except UnicodeDecodeError as e:
        raise IngestionError(f"file is not UTF-8: {e}", path=str(path)) from e

    for col in (spec.timestamp, spec.value):
        if col not in frame.columns:
            raise IngestionError(f"missing column {col!r} (found {list(frame.columns)})", path=str(path), line=1)
    if frame.empty:
        raise IngestionError("no data rows", path=str(path))

    stamps = pd.to_datetime(frame[spec.timestamp].str.strip(), utc=True, errors="coerce")
    values = pd.to_numeric(frame[spec.value].str.strip(), errors="coerce")
    for name, parsed in (("timestamp", stamps), ("value", values)):
        bad = np.flatnonzero(parsed.isna().to_numpy())
        if bad.size:
            i = int(bad[0])
            raw = frame.iloc[i][spec.timestamp if name == "timestamp" else spec.value]
            # header is line 1
            raise IngestionError(f"malformed {name} {raw!r}", path=str(path), line=i + 2)

    seconds = (stamps - stamps.iloc[0]).dt.total_seconds().to_numpy()
    steps = np.diff(seconds)
    if np.any(steps == 0):
        i = int(np.flatnonzero(steps == 0)[0]) + 1
        raise IngestionError(f"duplicate timestamp {stamps.iloc[i].isoformat()}", path=str(path), line=i + 2)
    if np.any(steps < 0):
        i = int(np.flatnonzero(steps < 0)[0]) + 1
        raise IngestionError(f"timestamps not in increasing order at {stamps.iloc[i].isoformat()}", path=str(path), line=i + 2)

    if spec.dt is not None:
        dt = int(spec.dt)
    elif steps.size:
        dt = int(steps.min())
    else:
        raise IngestionError("cannot infer time step from a single row; set dt explicitly", path=str(path))

    off = np.flatnonzero(steps != dt)
    if off.size:
        i = int(off[0])
        if steps[i] > dt and steps[i] % dt == 0:
            missing_from = stamps.iloc[i] + pd.Timedelta(seconds=dt)
            raise IngestionError(
                f"gap: missing interval [{missing_from.isoformat()}, {stamps.iloc[i + 1].isoformat()})",
                path=str(path),
                line=i + 3,
            )
        raise IngestionError(
            f"irregular spacing of {steps[i]:.0f} s between rows (expected {dt} s)", path=str(path), line=i + 3
        )

    return TimeSeries(start=stamps.iloc[0], dt=dt, values=values.to_numpy(dtype=float), unit=unit_tag)


def resample_mean(ts: TimeSeries, new_dt: int) -> TimeSeries:
    """Block means over windows of ``new_dt`` seconds; preserves the integral."""
    if new_dt <= 0 or new_dt % ts.dt != 0:
        raise DomainError(f"new step {new_dt} s is not an integer multiple of {ts.dt} s")
    factor = new_dt // ts.dt
    if len(ts) % factor != 0:
        raise DomainError(f"series length {len(ts)} is not divisible into whole {new_dt} s windows")
    means = ts.to_series().resample(pd.Timedelta(seconds=new_dt), origin="start").mean()
    return TimeSeries(start=ts.start, dt=new_dt, values=means.to_numpy(dtype=float), unit=ts.unit)


def extend_periodic(ts: TimeSeries, horizon_steps: int) -> TimeSeries:
    """Repeat the series so that ``out[i] = ts[i mod len(ts)]``."""
    if horizon_steps <= 0:
        raise DomainError(f"horizon must be positive, got {horizon_steps}")
    return ts.with_values(np.resize(ts.values, horizon_steps))


def apply_weekend_scaling(
    ts: TimeSeries,
    factor: float,
    calendar_start_weekday: Optional[int] = None,
) -> TimeSeries:
    """Multiply values of steps starting on Saturday or Sunday by ``factor``.

    The calendar is the series' own (UTC) calendar unless
    ``calendar_start_weekday`` (0 = Monday) overrides the weekday of the first step.
    """
    if not (0.0 <= factor <= 1.0):
        raise DomainError(f"weekend factor must be in [0, 1], got {factor}")
    if SECONDS_PER_DAY % ts.dt != 0:
        raise DomainError(f"time step {ts.dt} s does not divide one day")

    offset_s = ts.start.hour * 3600 + ts.start.minute * 60 + ts.start.second
    first_weekday = ts.start.weekday() if calendar_start_weekday is None else int(calendar_start_weekday) % 7
    day_index = (offset_s + np.arange(len(ts)) * ts.dt) // int(SECONDS_PER_DAY)
    weekday = (first_weekday + day_index) % 7
    scaled = np.where(weekday >= 5, ts.values * factor, ts.values)
    return ts.with_values(scaled)


def build_acceptance_mask(n_hours: int, fraction: float, seed: int) -> np.ndarray:
    """Exactly ``round(fraction·n_hours)`` accepted hours drawn without replacement."""
    if not (0.0 <= fraction <= 1.0):
        raise DomainError(f"acceptance fraction must be in [0, 1], got {fraction}")
    n_accept = int(math.floor(fraction * n_hours + 0.5))
    rng = np.random.default_rng(seed)
    mask = np.zeros(n_hours, dtype=bool)
    mask[rng.choice(n_hours, size=n_accept, replace=False)] = True
    return mask


def convert_currency(ts: TimeSeries, rate: float, to_currency: str = "EUR") -> TimeSeries:
    if not rate > 0:
        raise DomainError(f"conversion rate must be > 0, got {rate}")
    unit = ts.unit
    if "/" in unit and unit[:3].isalpha() and unit[:3].isupper():
        unit = to_currency + unit[3:]
    return ts.with_values(ts.values * rate, unit=unit)


@dataclass(frozen=True)
class TariffSchedule:
    """Grid tariff: volumetric EUR/kWh (scalar or series), capacity EUR/kW/month."""

    volumetric: Union[float, TimeSeries]
    capacity: float
    # None: derived from the horizon length
    months_per_horizon: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.volumetric, TimeSeries):
            if np.any(self.volumetric.values < 0):
                raise DomainError("volumetric tariff must be >= 0")
        elif not self.volumetric >= 0:
            raise DomainError(f"volumetric tariff must be >= 0, got {self.volumetric}")
        if not self.capacity >= 0:
            raise DomainError(f"capacity tariff must be >= 0, got {self.capacity}")
        if self.months_per_horizon is not None and not self.months_per_horizon > 0:
            raise DomainError(f"months_per_horizon must be > 0, got {self.months_per_horizon}")

    def volumetric_values(self, n: int) -> np.ndarray:
        if isinstance(self.volumetric, TimeSeries):
            return np.asarray(self.volumetric.values, dtype=float)
        return np.full(n, float(self.volumetric))


@dataclass(frozen=True)
class FcrMarket:
    """Hourly FCR capacity price and the bid-acceptance mask applied to it."""

    price: TimeSeries
    acceptance: np.ndarray
    acceptance_fraction: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        mask = np.array(self.acceptance, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "acceptance", mask)

    @classmethod
    def from_price(cls, price: TimeSeries, fraction: float, seed: int) -> "FcrMarket":
        """Draw the acceptance mask per bid hour and expand it to the price steps."""
        if price.dt >= SECONDS_PER_HOUR:
            mask = build_acceptance_mask(len(price), fraction, seed)
        else:
            per_hour = int(SECONDS_PER_HOUR // price.dt)
            n_hours = -(-len(price) // per_hour)
            mask = np.repeat(build_acceptance_mask(n_hours, fraction, seed), per_hour)[: len(price)]
        return cls(price=price, acceptance=mask, acceptance_fraction=fraction, rng_seed=seed)

    def effective_price(self) -> np.ndarray:
        """Price with rejected hours set to zero (EUR/kW per bid hour)."""
        return np.where(self.acceptance, self.price.values, 0.0)

    def scaled(self, k: float) -> "FcrMarket":
        return replace(self, price=self.price.with_values(self.price.values * k))

    def slice(self, start_step: int, steps: int) -> "FcrMarket":
        return replace(
            self,
            price=self.price.slice(start_step, steps),
            acceptance=self.acceptance[start_step:start_step + steps],
        )


@dataclass(frozen=True)
class Scenario:
    spot: TimeSeries
    tariff: TariffSchedule
    fcr: FcrMarket
    steam_demand: TimeSeries
    dt: int
    horizon_steps: int
    label: str = ""
    # True for representative slices; economics are then annualised
    is_slice: bool = False

    @property
    def start(self) -> pd.Timestamp:
        return self.spot.start

    @property
    def horizon_seconds(self) -> float:
        return float(self.dt * self.horizon_steps)

    @property
    def dt_hours(self) -> float:
        return self.dt / SECONDS_PER_HOUR

    @property
    def n_days(self) -> float:
        return self.horizon_seconds / SECONDS_PER_DAY

    @property
    def months(self) -> float:
        if self.tariff.months_per_horizon is not None:
            return float(self.tariff.months_per_horizon)
        return self.horizon_seconds / SECONDS_PER_MONTH

    def timestamps(self) -> pd.DatetimeIndex:
        return self.spot.index()

    def spot_values(self) -> np.ndarray:
        return np.asarray(self.spot.values, dtype=float)

    def volumetric_values(self) -> np.ndarray:
        return self.tariff.volumetric_values(self.horizon_steps)

    def fcr_values(self) -> np.ndarray:
        return self.fcr.effective_price()

    def demand_values(self) -> np.ndarray:
        return np.asarray(self.steam_demand.values, dtype=float)

    def with_fcr(self, fcr: FcrMarket) -> "Scenario":
        return replace(self, fcr=fcr)

    def slice(self, start_step: int, steps: int) -> "Scenario":
        """Representative sub-horizon; tariff months scale with its length."""
        volumetric = self.tariff.volumetric
        if isinstance(volumetric, TimeSeries):
            volumetric = volumetric.slice(start_step, steps)
        months = None
        if self.tariff.months_per_horizon is not None:
            months = self.tariff.months_per_horizon * steps / self.horizon_steps
        tariff = TariffSchedule(volumetric=volumetric, capacity=self.tariff.capacity, months_per_horizon=months)
        return assemble_scenario(
            self.spot.slice(start_step, steps),
            tariff,
            self.fcr.slice(start_step, steps),
            self.steam_demand.slice(start_step, steps),
            label=f"{self.label}[{start_step}:{start_step + steps}]",
            is_slice=True,
        )


def assemble_scenario(
    spot: TimeSeries,
    tariff: TariffSchedule,
    fcr: FcrMarket,
    demand: TimeSeries,
    label: str = "",
    is_slice: bool = False,
) -> Scenario:
    """Validate alignment of every series and build a :class:`Scenario`.

    All violations are collected before raising.
    """
    issues: List[str] = []
    named = [("spot", spot), ("fcr.price", fcr.price), ("steam_demand", demand)]
    if isinstance(tariff.volumetric, TimeSeries):
        named.append(("tariff.volumetric", tariff.volumetric))

    ref_name, ref = named[0]
    for name, ts in named[1:]:
        if len(ts) != len(ref):
            issues.append(f"{name}: length {len(ts)} differs from {ref_name} length {len(ref)}")
        if ts.dt != ref.dt:
            issues.append(f"{name}: time step {ts.dt} s differs from {ref_name} time step {ref.dt} s")
        if ts.start != ref.start:
            issues.append(f"{name}: start {ts.start.isoformat()} differs from {ref_name} start {ref.start.isoformat()}")

    if len(fcr.acceptance) != len(fcr.price):
        issues.append(f"fcr.acceptance: mask length {len(fcr.acceptance)} differs from fcr.price length {len(fcr.price)}")
    if np.any(fcr.price.values < 0):
        i = int(np.flatnonzero(fcr.price.values < 0)[0])
        issues.append(f"fcr.price: negative capacity price at step {i}")

    negative = np.flatnonzero(demand.values < 0)
    if negative.size:
        i = int(negative[0])
        issues.append(
            f"steam_demand: negative demand {demand.values[i]} at step {i}"
            + (f" (and {negative.size - 1} more)" if negative.size > 1 else "")
        )

    expected_units = {"spot": "EUR/kWh", "fcr.price": "EUR/kW", "steam_demand": "kg/s", "tariff.volumetric": "EUR/kWh"}
    for name, ts in named:
        if ts.unit != expected_units[name]:
            issues.append(f"{name}: unit {ts.unit!r} differs from expected {expected_units[name]!r}")

    if issues:
        raise ScenarioValidationError(issues)

    return Scenario(
        spot=spot,
        tariff=tariff,
        fcr=fcr,
        steam_demand=demand,
        dt=spot.dt,
        horizon_steps=len(spot),
        label=label,
        is_slice=is_slice,
    )


def check_leap_year_horizon(scenario: Scenario) -> None:
    """Annual presets for 2024 must span exactly 8784 hourly steps."""
    if scenario.dt != SECONDS_PER_HOUR or scenario.horizon_steps != LEAP_YEAR_HOURS:
        raise DomainError(
            f"annual 2024 scenario must have {LEAP_YEAR_HOURS} hourly steps, "
            f"got {scenario.horizon_steps} steps of {scenario.dt} s"
        )


def lint_scenario(scenario: Scenario) -> List[str]:
    """Non-fatal observations about a valid scenario."""
    warnings: List[str] = []
    spot = scenario.spot_values()
    if np.any(spot < 0):
        warnings.append(f"spot: {int(np.sum(spot < 0))} steps with negative price (export becomes costly)")
    fcr = scenario.fcr_values()
    if not np.any(fcr > 0):
        warnings.append("fcr: no accepted hour has a positive price; FCR profit will be zero")
    demand = scenario.demand_values()
    if not np.any(demand > 0):
        warnings.append("steam_demand: demand is zero over the whole horizon")
    accepted = float(np.mean(scenario.fcr.acceptance)) if len(scenario.fcr.acceptance) else 0.0
    if abs(accepted - scenario.fcr.acceptance_fraction) > 1.0 / math.sqrt(max(1, scenario.horizon_steps)):
        warnings.append(
            f"fcr: accepted share {accepted:.3f} deviates from configured fraction {scenario.fcr.acceptance_fraction:.3f}"
        )
    if scenario.is_slice:
        warnings.append("scenario is a representative slice; results are not annual-equivalent")
    return warnings
