from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..dispatch.storage import build_storage_lp
from ..lp_core import DEFAULT_TOLERANCES, ToleranceConfig, is_feasible
from .types import SERIES_FIELDS, EvProfile


@dataclass
class ProfileValidation:
    vehicle_id: str
    violations: List[str] = field(default_factory=list)
    feasible: bool = True

    @property
    def passed(self) -> bool:
        return not self.violations


def _steps(mask: np.ndarray) -> str:
    bad = np.flatnonzero(mask)
    return f"{bad[:5].tolist()}" + (" ..." if bad.size > 5 else "")


def validate_profile(profile: EvProfile, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ProfileValidation:
    """Check bound signs and ordering, charger availability while driving and LP feasibility; never raises"""
    result = ProfileValidation(profile.vehicle_id)
    steps = profile.grid.steps
    for name in SERIES_FIELDS:
        values = getattr(profile, name)
        if np.any(~np.isfinite(values)):
            result.violations.append(f"{name} is not finite at steps {_steps(~np.isfinite(values))}")
        if np.any(values < 0):
            result.violations.append(f"{name} is negative at steps {_steps(values < 0)}")

    for quantity in ('charge', 'discharge', 'soc'):
        lower = getattr(profile, f"{quantity}_min")
        upper = getattr(profile, f"{quantity}_max")
        if np.any(lower > upper):
            result.violations.append(
                f"{quantity}_min exceeds {quantity}_max at steps {_steps(lower > upper)}")

    driving_with_charger = profile.driving & (profile.charge_max > 0)
    if np.any(driving_with_charger):
        result.violations.append(
            f"charge_max is positive while driving at steps {_steps(driving_with_charger)}")

    if result.violations:
        result.feasible = False
        return result

    lp = build_storage_lp(profile.bounds, profile.params, profile.demand, np.zeros(steps),
                          name=f"feasibility_{profile.vehicle_id}")
    if not is_feasible(lp.model, tol):
        result.feasible = False
        result.violations.append("demand cannot be met within the charging and SOC limits")
    return result
