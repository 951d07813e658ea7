from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..aggregate import AevEnvelope, ScalingMap, SocMinSource
from ..dispatch import BOUND_ROLES, BoundRole, DispatchSchedule, StorageDuals
from ..errors import ModelFormatError, ReportError

SOLUTION_SCHEMA = 1


class BnbStatus(StrEnum):
    OPTIMAL = "optimal"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"
    INFEASIBLE = "infeasible"
    NO_INCUMBENT = "no_incumbent"


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


@dataclass(eq=False)
class BilevelSolution:
    """
    Outcome of one branch-and-bound run. `envelope` is apply_scaling(kappa)
    bit for bit; `schedule` is the inner dispatch on it with its duals.
    Without an incumbent only the bound and statistics are set.
    """
    status: BnbStatus
    group_width: int
    objective: float
    best_bound: float
    gap: float
    nodes: int
    wall_time: float
    kappa: Optional[ScalingMap] = None
    envelope: Optional[AevEnvelope] = None
    schedule: Optional[DispatchSchedule] = None
    m_activity: Dict[str, float] = field(default_factory=dict)
    soc_min_source: SocMinSource = SocMinSource.SOC_MIN
    source: str = ""
    warnings: List[str] = field(default_factory=list)

    @property
    def has_incumbent(self) -> bool:
        return self.kappa is not None

    @property
    def inner_objective(self) -> Optional[float]:
        return None if self.schedule is None else self.schedule.objective

    def summary(self) -> Dict[str, object]:
        return {
            'status': str(self.status),
            'group_width': self.group_width,
            'objective': self.objective,
            'best_bound': self.best_bound,
            'gap': self.gap,
            'nodes': self.nodes,
            'wall_time': round(self.wall_time, 3),
            'source': self.source,
        }

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {'schema': SOLUTION_SCHEMA, **self.summary()}
        data['wall_time'] = self.wall_time
        data['soc_min_source'] = str(self.soc_min_source)
        data['m_activity'] = dict(self.m_activity)
        data['warnings'] = list(self.warnings)
        data['inner_objective'] = self.inner_objective
        data['kappa'] = self.kappa.to_dict() if self.kappa is not None else None
        data['envelope'] = (
            {role.value: self.envelope.role(role).tolist() for role in BOUND_ROLES}
            if self.envelope is not None else None)
        if self.schedule is not None:
            schedule = {
                'charge': self.schedule.charge.tolist(),
                'discharge': self.schedule.discharge.tolist(),
                'soc': self.schedule.soc.tolist(),
            }
            duals = self.schedule.duals
            if duals is not None:
                schedule['lambda'] = duals.balance.tolist()
                schedule['mu'] = {role.value: duals.mu(role).tolist() for role in BOUND_ROLES}
            data['schedule'] = schedule
        else:
            data['schedule'] = None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> BilevelSolution:
        if data.get('schema') != SOLUTION_SCHEMA:
            raise ModelFormatError(f"unsupported solution schema {data.get('schema')!r}")
        try:
            kappa = ScalingMap.from_dict(data['kappa']) if data.get('kappa') else None
            envelope = None
            if data.get('envelope'):
                envelope = AevEnvelope(**{role.value: np.asarray(data['envelope'][role.value], dtype=float)
                                          for role in BOUND_ROLES}, source="aev")
            schedule = None
            if data.get('schedule'):
                raw = data['schedule']
                duals = None
                if 'lambda' in raw:
                    duals = StorageDuals(
                        balance=np.asarray(raw['lambda'], dtype=float),
                        bound={BoundRole(k): np.asarray(v, dtype=float) for k, v in raw['mu'].items()})
                schedule = DispatchSchedule(
                    owner="aev",
                    charge=raw['charge'],
                    discharge=raw['discharge'],
                    soc=raw['soc'],
                    objective=data.get('inner_objective'),
                    duals=duals,
                )
            return cls(
                status=BnbStatus(data['status']),
                group_width=int(data['group_width']),
                objective=_number(data['objective']),
                best_bound=_number(data['best_bound']),
                gap=_number(data['gap']),
                nodes=int(data['nodes']),
                wall_time=float(data['wall_time']),
                kappa=kappa,
                envelope=envelope,
                schedule=schedule,
                m_activity={k: float(v) for k, v in dict(data.get('m_activity', {})).items()},
                soc_min_source=SocMinSource(data.get('soc_min_source', SocMinSource.SOC_MIN)),
                source=str(data.get('source', "")),
                warnings=[str(w) for w in data.get('warnings', [])],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed solution: {e}") from e


def _number(value) -> float:
    return math.nan if value is None else float(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def write_solution_json(solution: BilevelSolution, path: Union[str, Path],
                        digest: Optional[str] = None) -> Path:
    path = Path(path)
    data = _jsonable(solution.to_dict())
    if digest is not None:
        data['digest'] = digest
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2) + "\n", encoding='utf-8')
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e
    return path


def read_solution_json(path: Union[str, Path]) -> BilevelSolution:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"cannot read solution {path}: {e}") from e
    return BilevelSolution.from_dict(data)
