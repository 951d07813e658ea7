from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from ..errors import ConfigurationError, GridMismatchError, InfeasibleError, SolverLimitError
from ..lp_core import (DEFAULT_TOLERANCES, SolveStatus, ToleranceConfig, check_duality,
                       find_infeasibility, solve_lp, solve_qp)
from ..lp_core.model import ModelBuilder
from .schedule import DispatchSchedule
from .storage import StorageBounds, StorageLp, build_storage_lp, extract_schedule

if TYPE_CHECKING:
    from ..profiles import EvParams, EvProfile

logger = logging.getLogger('pyaev.dispatch')


@dataclass(frozen=True, eq=False)
class Anchor:
    """Quadratic pull weight * sum_t (xc_t - charge_t)^2 towards a given charging trajectory"""
    weight: float
    charge: np.ndarray

    def __post_init__(self):
        if self.weight < 0:
            raise ConfigurationError(f"anchor weight must be nonnegative, got {self.weight}")
        object.__setattr__(self, 'charge', np.asarray(self.charge, dtype=float).reshape(-1))

    @classmethod
    def from_schedule(cls, weight: float, schedule: DispatchSchedule) -> Anchor:
        return cls(weight, schedule.charge)


def _anchored(lp: StorageLp, anchor: Anchor) -> StorageLp:
    if anchor.charge.size != lp.steps:
        raise GridMismatchError(f"anchor has {anchor.charge.size} steps, model {lp.steps}")
    builder = ModelBuilder.from_model(lp.model)
    for t, col in enumerate(lp.charge):
        builder.add_square([col], [1.0], target=anchor.charge[t], weight=anchor.weight)
    return StorageLp(builder.build(), lp.charge, lp.discharge, lp.soc, lp.balance_rows)


def _raise_infeasible(lp: StorageLp, owner: str, tol: ToleranceConfig):
    report = find_infeasibility(lp.model, tol)
    if report.bound_conflicts:
        step = min(lp.step_of_column(j) for j in report.bound_conflicts)
    else:
        step = report.first_row()
    raise InfeasibleError(f"dispatch of '{owner}' is infeasible", step=step,
                          certificate=report.certificate)


def solve_storage(bounds: StorageBounds, params: EvParams, demand: np.ndarray, prices,
                  owner: str, anchor: Optional[Anchor] = None,
                  tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DispatchSchedule:
    """
    Cost-minimal dispatch of one storage unit. Pure LPs go to HiGHS; an
    anchor term makes the problem a convex QP for the interior point solver.
    The returned schedule carries its duals and duality certificate.
    """
    lp = build_storage_lp(bounds, params, demand, prices, name=f"dispatch_{owner}")
    if anchor is not None and anchor.weight > 0:
        lp = _anchored(lp, anchor)
        solution = solve_qp(lp.model, tol)
    else:
        solution = solve_lp(lp.model, tol)

    if solution.status == SolveStatus.INFEASIBLE:
        _raise_infeasible(lp, owner, tol)
    if not solution.is_optimal:
        raise SolverLimitError(f"dispatch of '{owner}' ended with {solution.status}: "
                               f"{solution.message}")

    schedule = extract_schedule(lp, solution, owner)
    schedule.duality = check_duality(lp.model, solution, tol)
    if not schedule.duality.passed:
        logger.warning("%s: duality check failed: %s", owner, "; ".join(schedule.duality.issues))
    return schedule


def solve_individual(profile: EvProfile, prices, anchor: Optional[Anchor] = None,
                     tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DispatchSchedule:
    return solve_storage(profile.bounds, profile.params, profile.demand, prices,
                         owner=profile.vehicle_id, anchor=anchor, tol=tol)
