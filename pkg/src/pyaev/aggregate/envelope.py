from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..dispatch.storage import BOUND_ROLES, BoundRole, StorageBounds
from ..errors import ConfigurationError, GridMismatchError
from ..profiles import EvParams, EvProfile, TimeGrid
from ..tables import read_table, write_table

ENVELOPE_COLUMNS = ('t',) + tuple(role.value for role in BOUND_ROLES)


class AggregationParamRule(StrEnum):
    CAPACITY_WEIGHTED = "capacity_weighted"
    MEAN = "mean"


@dataclass(frozen=True, eq=False)
class AggregateProfile:
    """Summed bounds and demands of a fleet, with derived unit parameters"""
    grid: TimeGrid
    bounds: StorageBounds
    demand_drive: np.ndarray
    demand_thermal: np.ndarray
    params: EvParams
    size: int
    param_rule: AggregationParamRule = AggregationParamRule.CAPACITY_WEIGHTED

    @property
    def demand(self) -> np.ndarray:
        return self.demand_drive + self.demand_thermal

    def role(self, role: BoundRole) -> np.ndarray:
        return self.bounds.role(role)


@dataclass(frozen=True, eq=False)
class AevEnvelope(StorageBounds):
    """Scaled bounds of an aggregated unit; `source` names the approach that produced it"""
    source: str = "aev"


def sum_profiles(fleet: Sequence[EvProfile],
                 param_rule: AggregationParamRule = AggregationParamRule.CAPACITY_WEIGHTED
                 ) -> AggregateProfile:
    """
    Elementwise sums of every bound and demand series. rho, eta_c and eta_d
    are capacity-weighted (or plain) means of the members; the final SOC
    target is the sum of member targets.
    """
    if not fleet:
        raise ConfigurationError("cannot aggregate an empty fleet")
    grid = fleet[0].grid
    for profile in fleet:
        if profile.grid != grid:
            raise GridMismatchError(f"vehicle '{profile.vehicle_id}' is on {profile.grid}, expected {grid}")
    param_rule = AggregationParamRule(param_rule)

    summed = {role.value: np.sum([p.bounds.role(role) for p in fleet], axis=0) for role in BOUND_ROLES}
    if param_rule == AggregationParamRule.CAPACITY_WEIGHTED:
        weights = np.array([p.capacity for p in fleet])
        if weights.sum() <= 0:
            weights = np.ones(len(fleet))
    else:
        weights = np.ones(len(fleet))
    weights = weights / weights.sum()

    def weighted(name: str) -> float:
        return float(np.clip(weights @ np.array([getattr(p.params, name) for p in fleet]), 0.0, 1.0))

    params = EvParams(
        rho=weighted('rho'),
        eta_c=weighted('eta_c'),
        eta_d=weighted('eta_d'),
        final_soc_target=float(sum(p.params.final_soc_target for p in fleet)),
    )
    return AggregateProfile(
        grid=grid,
        bounds=StorageBounds(**summed),
        demand_drive=np.sum([p.demand_drive for p in fleet], axis=0),
        demand_thermal=np.sum([p.demand_thermal for p in fleet], axis=0),
        params=params,
        size=len(fleet),
        param_rule=param_rule,
    )


def envelope_frame(envelope: StorageBounds) -> pd.DataFrame:
    frame = pd.DataFrame({role.value: envelope.role(role) for role in BOUND_ROLES})
    frame.insert(0, 't', np.arange(envelope.steps))
    return frame


def write_envelope_csv(envelope: AevEnvelope, path: Union[str, Path],
                       digest: Optional[str] = None) -> Path:
    return write_table(envelope_frame(envelope), path, digest, source=envelope.source)


def read_envelope_csv(path: Union[str, Path]) -> AevEnvelope:
    frame, meta = read_table(path, ENVELOPE_COLUMNS)
    frame = frame.sort_values('t')
    return AevEnvelope(**{role.value: frame[role.value].to_numpy(dtype=float) for role in BOUND_ROLES},
                       source=meta.get('source', 'aev'))
