from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import GridMismatchError, ProfileParseError
from ..tables import read_table, write_table

if TYPE_CHECKING:
    from ..lp_core import DualityReport
    from .storage import StorageBounds, StorageDuals

SCHEDULE_COLUMNS = ('owner', 't', 'charge', 'discharge', 'soc')


@dataclass(eq=False)
class DispatchSchedule:
    """
    Charge, discharge (MWh/h) and start-of-step state of charge (MWh) of one
    storage unit. soc[t] is the energy held when step t begins.
    """
    owner: str
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    objective: Optional[float] = None
    duals: Optional[StorageDuals] = None
    duality: Optional[DualityReport] = None

    def __post_init__(self):
        self.charge = np.asarray(self.charge, dtype=float)
        self.discharge = np.asarray(self.discharge, dtype=float)
        self.soc = np.asarray(self.soc, dtype=float)
        if not self.charge.shape == self.discharge.shape == self.soc.shape:
            raise GridMismatchError(f"schedule '{self.owner}': series lengths differ")

    @property
    def steps(self) -> int:
        return self.charge.size

    def final_soc(self, params, demand: np.ndarray) -> float:
        """Energy held after the last step"""
        return float(params.rho * self.soc[-1] + params.eta_c * self.charge[-1]
                     - self.discharge[-1] / params.eta_d - demand[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'owner': self.owner,
            't': np.arange(self.steps),
            'charge': self.charge,
            'discharge': self.discharge,
            'soc': self.soc,
        })


@dataclass
class ScheduleCheck:
    """Constraint evaluation of a schedule against bounds and storage dynamics"""
    owner: str
    issues: List[str] = field(default_factory=list)
    violating_steps: List[int] = field(default_factory=list)
    max_violation: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.issues

    @property
    def first_step(self) -> Optional[int]:
        return min(self.violating_steps) if self.violating_steps else None


def check_schedule(schedule: DispatchSchedule, bounds: StorageBounds, params,
                   demand: np.ndarray, feas_tol: float = 1e-8,
                   terminal: bool = True) -> ScheduleCheck:
    """
    Evaluate bound, continuity and (optionally) terminal constraints. Each
    violation is measured relative to max(1, |bound|).
    """
    if schedule.steps != bounds.steps or np.size(demand) != bounds.steps:
        raise GridMismatchError(
            f"schedule '{schedule.owner}' has {schedule.steps} steps, bounds {bounds.steps}")
    check = ScheduleCheck(schedule.owner)

    def record(label: str, excess: np.ndarray, scale: np.ndarray):
        relative = excess / np.maximum(1.0, np.abs(scale))
        bad = np.flatnonzero(relative > feas_tol)
        if bad.size:
            check.issues.append(f"{label} violated at steps {bad[:5].tolist()}"
                                + (" ..." if bad.size > 5 else ""))
            check.violating_steps.extend(int(t) for t in bad)
        check.max_violation = max(check.max_violation, float(np.max(relative, initial=0.0)))

    series = {'charge': schedule.charge, 'discharge': schedule.discharge, 'soc': schedule.soc}
    for name, values in series.items():
        lower = getattr(bounds, f"{name}_min")
        upper = getattr(bounds, f"{name}_max")
        record(f"{name}_min", lower - values, lower)
        record(f"{name}_max", values - upper, upper)

    nxt = (params.rho * schedule.soc + params.eta_c * schedule.charge
           - schedule.discharge / params.eta_d - demand)
    record("soc continuity", np.abs(schedule.soc[1:] - nxt[:-1]), schedule.soc[1:])
    if terminal:
        gap = np.abs(np.array([nxt[-1] - params.final_soc_target]))
        relative = gap / max(1.0, abs(params.final_soc_target))
        if relative[0] > feas_tol:
            check.issues.append(f"terminal soc {nxt[-1]:.6g} != target {params.final_soc_target:.6g}")
            check.violating_steps.append(schedule.steps - 1)
        check.max_violation = max(check.max_violation, float(relative[0]))
    check.violating_steps = sorted(set(check.violating_steps))
    return check


def write_schedules_csv(schedules: Sequence[DispatchSchedule], path: Union[str, Path],
                        digest: Optional[str] = None) -> Path:
    frames = [s.to_frame() for s in schedules]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SCHEDULE_COLUMNS)
    return write_table(frame, path, digest)


def read_schedules_csv(path: Union[str, Path]) -> List[DispatchSchedule]:
    frame, _ = read_table(path, SCHEDULE_COLUMNS, dtype={'owner': str})
    schedules: Dict[str, DispatchSchedule] = {}
    for owner, rows in frame.groupby('owner', sort=False):
        rows = rows.sort_values('t')
        if not np.array_equal(rows['t'].to_numpy(), np.arange(len(rows))):
            raise ProfileParseError(f"schedule '{owner}' has gaps in its steps", column='t')
        schedules[owner] = DispatchSchedule(
            owner=owner,
            charge=rows['charge'].to_numpy(dtype=float),
            discharge=rows['discharge'].to_numpy(dtype=float),
            soc=rows['soc'].to_numpy(dtype=float),
        )
    return list(schedules.values())
