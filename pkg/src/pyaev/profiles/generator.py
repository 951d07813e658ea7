"""Seeded synthetic commuter fleets"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from ..errors import ConfigurationError
from .types import (HOURS_PER_DAY, HOURS_PER_WEEK, EvParams, EvProfile, FleetGenSpec,
                    TimeGrid)
from .validation import validate_profile

logger = logging.getLogger('pyaev.profiles')

KWH = 1e-3
CAPACITY_HEADROOM = 1.2


def vehicle_id(index: int) -> str:
    return f"ev{index:04d}"


def _away_mask(rng: np.random.Generator, grid: TimeGrid, spec: FleetGenSpec, steps: int) -> np.ndarray:
    """Away-from-home steps over `steps` hours: weekday commutes and optional weekend trips"""
    jitter = spec.commute_jitter_hours
    departure = int(np.clip(np.rint(spec.departure_hour + rng.uniform(-jitter, jitter)),
                            0, HOURS_PER_DAY - 2))
    arrival = int(np.clip(np.rint(spec.arrival_hour + rng.uniform(-jitter, jitter)),
                          departure + 1, HOURS_PER_DAY - 1))

    hours = np.arange(steps) % HOURS_PER_DAY
    days = np.arange(steps) // HOURS_PER_DAY
    weekdays = (days + grid.start_weekday) % 7
    away = (weekdays < 5) & (hours >= departure) & (hours < arrival)

    lo, hi = spec.weekend_trip_hours
    for day in np.unique(days[weekdays >= 5]):
        if rng.random() >= spec.weekend_trip_probability:
            continue
        start = int(rng.integers(9, 15))
        length = int(rng.integers(lo, hi + 1))
        away |= (days == day) & (hours >= start) & (hours < min(start + length, HOURS_PER_DAY - 1))
    return away


def _stretch_energy(demand: np.ndarray) -> float:
    """Largest energy drawn over one contiguous away stretch"""
    worst = current = 0.0
    for value in demand:
        current = current + value if value > 0 else 0.0
        worst = max(worst, current)
    return worst


def generate_vehicle(seed: int, index: int, grid: TimeGrid, spec: FleetGenSpec) -> EvProfile:
    rng = np.random.default_rng([seed, index])
    battery = rng.uniform(*spec.battery_kwh) * KWH
    charger = float(rng.choice(spec.charger_kw)) * KWH
    weekly = rng.uniform(*spec.weekly_drive_kwh) * KWH

    # whole weeks, so every block can be normalised to the weekly energy
    weeks = -(-grid.steps // HOURS_PER_WEEK)
    away = _away_mask(rng, grid, spec, weeks * HOURS_PER_WEEK)
    drive = np.zeros(away.size)
    for block in range(weeks):
        window = slice(block * HOURS_PER_WEEK, (block + 1) * HOURS_PER_WEEK)
        count = np.count_nonzero(away[window])
        if count:
            drive[window] = np.where(away[window], weekly / count, 0.0)
    away, drive = away[:grid.steps], drive[:grid.steps]

    thermal = np.where(away, spec.thermal_kw * KWH, 0.0)
    usable = 1.0 - spec.soc_min_fraction
    capacity = max(battery, CAPACITY_HEADROOM * _stretch_energy(drive + thermal) / usable)
    if capacity > battery:
        logger.debug("%s: capacity raised from %.4f to %.4f MWh", vehicle_id(index), battery, capacity)

    home = np.where(away, 0.0, charger)
    zeros = np.zeros(grid.steps)
    return EvProfile(
        vehicle_id=vehicle_id(index),
        grid=grid,
        params=EvParams(spec.rho, spec.eta_c, spec.eta_d, spec.final_soc_fraction * capacity),
        demand_drive=drive,
        demand_thermal=thermal,
        charge_min=zeros,
        charge_max=home,
        discharge_min=zeros,
        discharge_max=home if spec.v2g else zeros,
        soc_min=np.full(grid.steps, spec.soc_min_fraction * capacity),
        soc_max=np.full(grid.steps, capacity),
    )


def generate_commuter_fleet(seed: int, n_vehicles: int, grid: TimeGrid,
                            spec: Optional[FleetGenSpec] = None,
                            threads: int = 1) -> List[EvProfile]:
    """
    Deterministic for fixed (seed, n_vehicles, grid, spec): vehicle v draws from
    its own generator seeded with (seed, v). Each profile is checked with
    validate_profile before it is returned.
    """
    spec = spec or FleetGenSpec()
    if n_vehicles < 1:
        raise ConfigurationError(f"fleet.n_vehicles must be positive, got {n_vehicles}")

    def build(index: int) -> EvProfile:
        profile = generate_vehicle(seed, index, grid, spec)
        result = validate_profile(profile)
        if not result.passed:
            raise ConfigurationError(f"generated vehicle {profile.vehicle_id} is not dispatchable: "
                                     + "; ".join(result.violations))
        return profile

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="fleet") as pool:
            fleet = list(pool.map(build, range(n_vehicles)))
    else:
        fleet = [build(i) for i in range(n_vehicles)]
    logger.info("generated %d vehicles on %d steps (seed %d)", n_vehicles, grid.steps, seed)
    return fleet
