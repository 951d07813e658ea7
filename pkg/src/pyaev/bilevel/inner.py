"""Dispatch of an aggregated unit on a given envelope"""
from __future__ import annotations

from typing import Optional, Tuple

from ..aggregate import AggregateProfile
from ..dispatch import DispatchSchedule, StorageBounds, StorageLp, build_storage_lp, extract_schedule, solve_storage
from ..lp_core import DEFAULT_TOLERANCES, LpSolution, ToleranceConfig, solve_lp


def solve_aev(envelope: StorageBounds, agg: AggregateProfile, prices, owner: str = "aev",
              tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DispatchSchedule:
    """Cost-minimal dispatch of the aggregated unit; raises on infeasible envelopes"""
    return solve_storage(envelope, agg.params, agg.demand, prices, owner=owner, tol=tol)


def try_inner(envelope: StorageBounds, agg: AggregateProfile, prices, owner: str = "aev",
              tol: ToleranceConfig = DEFAULT_TOLERANCES
              ) -> Optional[Tuple[StorageLp, LpSolution, DispatchSchedule]]:
    """Like solve_aev, but returns None instead of diagnosing infeasible envelopes"""
    lp = build_storage_lp(envelope, agg.params, agg.demand, prices, name=f"inner_{owner}")
    solution = solve_lp(lp.model, tol)
    if not solution.is_optimal:
        return None
    return lp, solution, extract_schedule(lp, solution, owner)
