from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from typing import Tuple

import numpy as np

from ..dispatch.storage import StorageBounds
from ..errors import ConfigurationError, GridMismatchError

HOURS_PER_DAY = 24
HOURS_PER_WEEK = 168
WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


@dataclass(frozen=True)
class TimeGrid:
    """Hourly horizon of `steps` steps; step 0 starts at midnight of `start_weekday` (0 = Monday)"""
    steps: int
    start_weekday: int = 0
    step_hours: float = field(default=1.0, init=False)

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"grid.steps must be a positive integer, got {self.steps}")
        if self.start_weekday not in range(7):
            raise ConfigurationError(f"grid.start_weekday must lie in 0..6, got {self.start_weekday}")

    @property
    def hours(self) -> np.ndarray:
        return np.arange(self.steps) % HOURS_PER_DAY

    @property
    def weekdays(self) -> np.ndarray:
        return (np.arange(self.steps) // HOURS_PER_DAY + self.start_weekday) % 7

    @property
    def weekend(self) -> np.ndarray:
        return self.weekdays >= 5

    def check(self, values: np.ndarray, label: str) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != self.steps:
            raise GridMismatchError(f"{label}: {values.size} values on a {self.steps}-step grid")
        return values


@dataclass(frozen=True)
class EvParams:
    rho: float = 1.0
    eta_c: float = 0.95
    eta_d: float = 0.95
    final_soc_target: float = 0.0

    def __post_init__(self):
        for name in ('rho', 'eta_c', 'eta_d'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {value}")
        if not self.final_soc_target >= 0.0:
            raise ConfigurationError(f"final_soc_target must be nonnegative, got {self.final_soc_target}")


SERIES_FIELDS = ('demand_drive', 'demand_thermal', 'charge_min', 'charge_max',
                 'discharge_min', 'discharge_max', 'soc_min', 'soc_max')

# ids travel through CSV cells and `key=a,b` header values
VEHICLE_ID = re.compile(r'[^\s,#"]+')


@dataclass(frozen=True, eq=False)
class EvProfile:
    """Demands (MWh/h), availability limits (MWh/h) and SOC limits (MWh) of one vehicle"""
    vehicle_id: str
    grid: TimeGrid
    params: EvParams
    demand_drive: np.ndarray
    demand_thermal: np.ndarray
    charge_min: np.ndarray
    charge_max: np.ndarray
    discharge_min: np.ndarray
    discharge_max: np.ndarray
    soc_min: np.ndarray
    soc_max: np.ndarray

    def __post_init__(self):
        if not isinstance(self.vehicle_id, str) or not VEHICLE_ID.fullmatch(self.vehicle_id):
            raise ConfigurationError(f"vehicle id {self.vehicle_id!r} must be nonempty and free of "
                                     f"whitespace, commas, '#' and quotes")
        for name in SERIES_FIELDS:
            object.__setattr__(self, name, self.grid.check(getattr(self, name),
                                                           f"{self.vehicle_id}.{name}"))

    @cached_property
    def bounds(self) -> StorageBounds:
        return StorageBounds(self.charge_min, self.charge_max, self.discharge_min,
                             self.discharge_max, self.soc_min, self.soc_max)

    @property
    def demand(self) -> np.ndarray:
        return self.demand_drive + self.demand_thermal

    @property
    def driving(self) -> np.ndarray:
        return self.demand_drive > 0

    @property
    def capacity(self) -> float:
        return float(np.max(self.soc_max))

    def series(self) -> Tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in SERIES_FIELDS)

    def equals(self, other: EvProfile) -> bool:
        return (self.vehicle_id == other.vehicle_id and self.grid == other.grid
                and self.params == other.params
                and all(np.array_equal(a, b) for a, b in zip(self.series(), other.series())))


class UncontrolledVariant(StrEnum):
    DIRECT = "direct"
    LOW_SOC = "low_soc"


@dataclass(frozen=True)
class UncontrolledMode:
    """
    Rule-based charging: `direct` charges whenever plugged in and not full,
    `low_soc` only once the start-of-step SOC drops below
    anxiety_fraction * soc_max and then until full or unplugged.
    """
    variant: UncontrolledVariant = UncontrolledVariant.DIRECT
    anxiety_fraction: float = 0.3
    initial_soc_fraction: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'variant', UncontrolledVariant(self.variant))
        except ValueError:
            raise ConfigurationError(f"unknown uncontrolled variant '{self.variant}'") from None
        if not 0.0 < self.anxiety_fraction <= 1.0:
            raise ConfigurationError(f"anxiety_fraction must lie in (0, 1], got {self.anxiety_fraction}")
        if not 0.0 <= self.initial_soc_fraction <= 1.0:
            raise ConfigurationError("initial_soc_fraction must lie in [0, 1]")


def _check_range(name: str, value: Tuple[float, float], low: float, high: float):
    lo, hi = value
    if not low <= lo <= hi <= high:
        raise ConfigurationError(f"fleet.{name} must satisfy {low} <= min <= max <= {high}, got {value}")


@dataclass(frozen=True)
class FleetGenSpec:
    """Synthetic commuter fleet; energies in kWh, powers in kW"""
    battery_kwh: Tuple[float, float] = (40.0, 80.0)
    charger_kw: Tuple[float, ...] = (3.7, 7.4, 11.0)
    weekly_drive_kwh: Tuple[float, float] = (40.0, 90.0)
    departure_hour: float = 7.0
    arrival_hour: float = 17.0
    commute_jitter_hours: float = 1.0
    weekend_trip_probability: float = 0.5
    weekend_trip_hours: Tuple[int, int] = (2, 6)
    soc_min_fraction: float = 0.1
    final_soc_fraction: float = 0.5
    thermal_kw: float = 0.0
    v2g: bool = False
    rho: float = 1.0
    eta_c: float = 0.95
    eta_d: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, 'battery_kwh', tuple(self.battery_kwh))
        object.__setattr__(self, 'charger_kw', tuple(self.charger_kw))
        object.__setattr__(self, 'weekly_drive_kwh', tuple(self.weekly_drive_kwh))
        object.__setattr__(self, 'weekend_trip_hours', tuple(self.weekend_trip_hours))
        _check_range('battery_kwh', self.battery_kwh, 20.0, 100.0)
        if not self.charger_kw or not all(3.7 <= p <= 11.0 for p in self.charger_kw):
            raise ConfigurationError(f"fleet.charger_kw entries must lie in [3.7, 11], got {self.charger_kw}")
        _check_range('weekly_drive_kwh', self.weekly_drive_kwh, 0.0, np.inf)
        if not 0.0 <= self.departure_hour < self.arrival_hour <= HOURS_PER_DAY:
            raise ConfigurationError("fleet commute window must satisfy 0 <= departure < arrival <= 24")
        if self.commute_jitter_hours < 0:
            raise ConfigurationError("fleet.commute_jitter_hours must be nonnegative")
        if not 0.0 <= self.weekend_trip_probability <= 1.0:
            raise ConfigurationError("fleet.weekend_trip_probability must lie in [0, 1]")
        lo, hi = self.weekend_trip_hours
        if not 1 <= lo <= hi <= 12:
            raise ConfigurationError("fleet.weekend_trip_hours must satisfy 1 <= min <= max <= 12")
        if not 0.0 <= self.soc_min_fraction < 1.0:
            raise ConfigurationError("fleet.soc_min_fraction must lie in [0, 1)")
        if not self.soc_min_fraction <= self.final_soc_fraction <= 1.0:
            raise ConfigurationError("fleet.final_soc_fraction must lie in [soc_min_fraction, 1]")
        if self.thermal_kw < 0:
            raise ConfigurationError("fleet.thermal_kw must be nonnegative")
        EvParams(self.rho, self.eta_c, self.eta_d)


@dataclass(frozen=True)
class PriceGenSpec:
    """Daily two-peak sinusoid around a weekday/weekend base level plus seeded noise (EUR/MWh)"""
    base: float = 80.0
    daily_amplitude: float = 30.0
    peak_hour: float = 8.0
    weekend_factor: float = 0.8
    noise_std: float = 5.0
    floor: float = 0.0

    def __post_init__(self):
        if self.daily_amplitude < 0 or self.noise_std < 0:
            raise ConfigurationError("prices.daily_amplitude and prices.noise_std must be nonnegative")
        if self.weekend_factor < 0:
            raise ConfigurationError("prices.weekend_factor must be nonnegative")
        if self.floor < 0:
            raise ConfigurationError("prices.floor must be nonnegative")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', self.grid.check(self.values, "prices"))

    def equals(self, other: PriceSeries) -> bool:
        return self.grid == other.grid and np.array_equal(self.values, other.values)
