from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, GridMismatchError
from ..event_bus import broadcast
from ..lp_core import DEFAULT_TOLERANCES, ToleranceConfig
from ..signals import Signals
from ..tables import read_table, write_table
from .individual import Anchor, solve_individual
from .schedule import DispatchSchedule

if TYPE_CHECKING:
    from ..profiles import EvProfile

logger = logging.getLogger('pyaev.dispatch')

REFERENCE_COLUMNS = ('t', 'agg_charge', 'agg_discharge', 'agg_soc')


@dataclass(eq=False)
class FleetReference:
    """Summed member schedules; the targets the aggregated unit is fitted to"""
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    objective: float
    members: Tuple[str, ...]

    @property
    def steps(self) -> int:
        return self.charge.size

    def as_schedule(self, owner: str = "reference") -> DispatchSchedule:
        return DispatchSchedule(owner, self.charge.copy(), self.discharge.copy(),
                                self.soc.copy(), objective=self.objective)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': np.arange(self.steps),
            'agg_charge': self.charge,
            'agg_discharge': self.discharge,
            'agg_soc': self.soc,
        })


def build_reference(schedules: Sequence[DispatchSchedule]) -> FleetReference:
    if not schedules:
        raise ConfigurationError("a fleet reference needs at least one schedule")
    steps = schedules[0].steps
    for schedule in schedules:
        if schedule.steps != steps:
            raise GridMismatchError(
                f"schedule '{schedule.owner}' has {schedule.steps} steps, expected {steps}")
    return FleetReference(
        charge=np.sum([s.charge for s in schedules], axis=0),
        discharge=np.sum([s.discharge for s in schedules], axis=0),
        soc=np.sum([s.soc for s in schedules], axis=0),
        objective=float(sum(s.objective or 0.0 for s in schedules)),
        members=tuple(s.owner for s in schedules),
    )


def default_threads() -> int:
    return int(os.environ.get('PYAEV_THREADS', 0)) or min(8, os.cpu_count() or 1)


def dispatch_fleet(fleet: Sequence[EvProfile], prices,
                   anchors: Optional[Sequence[Anchor]] = None,
                   tol: ToleranceConfig = DEFAULT_TOLERANCES,
                   threads: Optional[int] = None) -> List[DispatchSchedule]:
    """Solve every vehicle independently; results keep fleet order"""
    if anchors is not None and len(anchors) != len(fleet):
        raise ConfigurationError(f"{len(anchors)} anchors for {len(fleet)} vehicles")
    threads = threads or default_threads()

    def run(index: int) -> DispatchSchedule:
        profile = fleet[index]
        schedule = solve_individual(profile, prices, anchors[index] if anchors else None, tol)
        broadcast(Signals.VEHICLE_DISPATCHED, profile.vehicle_id,
                  objective=schedule.objective, index=index, total=len(fleet))
        return schedule

    if threads <= 1 or len(fleet) <= 1:
        return [run(i) for i in range(len(fleet))]
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="dispatch") as pool:
        return list(pool.map(run, range(len(fleet))))


def write_reference_csv(reference: FleetReference, path: Union[str, Path],
                        digest: Optional[str] = None) -> Path:
    return write_table(reference.to_frame(), path, digest,
                       objective=repr(reference.objective), members=",".join(reference.members))


def read_reference_csv(path: Union[str, Path]) -> FleetReference:
    frame, meta = read_table(path, REFERENCE_COLUMNS)
    frame = frame.sort_values('t')
    members = tuple(m for m in meta.get('members', "").split(",") if m)
    return FleetReference(
        charge=frame['agg_charge'].to_numpy(dtype=float),
        discharge=frame['agg_discharge'].to_numpy(dtype=float),
        soc=frame['agg_soc'].to_numpy(dtype=float),
        objective=float(meta.get('objective', 'nan')),
        members=members,
    )
