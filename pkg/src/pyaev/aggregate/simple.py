from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

from ..dispatch.storage import BoundRole
from ..errors import ConfigurationError
from .envelope import AevEnvelope, AggregateProfile
from .mapping import ScalingMap
from .scaling import SocMinSource, apply_scaling

SA_GROUP_WIDTH = 24


@dataclass(frozen=True)
class SaHeuristics:
    """Constant derating of the summed bounds (virtual storage); unit factors reproduce the plain sums"""
    charge_factor: float = 1.0
    discharge_factor: float = 1.0
    soc_min_factor: float = 1.0
    soc_max_factor: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value >= 0:
                raise ConfigurationError(f"sa.{name} must be nonnegative, got {value}")

    def factors(self) -> Dict[BoundRole, float]:
        return {
            BoundRole.CHARGE_MIN: 1.0,
            BoundRole.CHARGE_MAX: self.charge_factor,
            BoundRole.DISCHARGE_MIN: 1.0,
            BoundRole.DISCHARGE_MAX: self.discharge_factor,
            BoundRole.SOC_MIN: self.soc_min_factor,
            BoundRole.SOC_MAX: self.soc_max_factor,
        }


def simple_aggregation(agg: AggregateProfile, heuristics: SaHeuristics = SaHeuristics(),
                       soc_min_source: SocMinSource = SocMinSource.SOC_MIN) -> AevEnvelope:
    kappa = ScalingMap.constant(SA_GROUP_WIDTH, heuristics.factors())
    return apply_scaling(agg, kappa, soc_min_source, source="sa")
