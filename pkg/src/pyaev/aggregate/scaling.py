from __future__ import annotations

from enum import StrEnum

import numpy as np

from ..dispatch.storage import BOUND_ROLES, BoundRole
from .envelope import AevEnvelope, AggregateProfile
from .mapping import ScalingMap, step_groups


class SocMinSource(StrEnum):
    """Which summed series the lower SOC factor multiplies"""
    SOC_MIN = "soc_min"
    SOC_MAX = "soc_max"


def base_series(agg: AggregateProfile, role: BoundRole,
                soc_min_source: SocMinSource = SocMinSource.SOC_MIN) -> np.ndarray:
    """Summed series a role's factor multiplies"""
    if role == BoundRole.SOC_MIN and SocMinSource(soc_min_source) == SocMinSource.SOC_MAX:
        return agg.role(BoundRole.SOC_MAX)
    return agg.role(role)


def apply_scaling(agg: AggregateProfile, kappa: ScalingMap,
                  soc_min_source: SocMinSource = SocMinSource.SOC_MIN,
                  source: str = "aev") -> AevEnvelope:
    """x_role[t] = kappa_role[tau(t)] * summed_role[t] for every bound role"""
    tau = step_groups(agg.grid, kappa.group_width)
    return AevEnvelope(
        **{role.value: kappa.factor(role)[tau] * base_series(agg, role, soc_min_source)
           for role in BOUND_ROLES},
        source=source,
    )
