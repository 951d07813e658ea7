"""
Bilevel-feasible points for the branch-and-bound incumbent.

Every candidate is an envelope together with an optimal inner dispatch of
it, so its objective is an upper bound on the bilevel optimum. Candidates
come from seed maps, a bounded Powell search over the free factors scored by
the inner LP, and active-set polishing: fix each complementarity pair to the
side the point realises and re-optimise the factors with the resulting
convex QP.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..aggregate import ScalingMap, apply_scaling
from ..dispatch import DispatchSchedule
from ..lp_core import DEFAULT_TOLERANCES, LinearModel, LpSolution, ToleranceConfig, solve_lp, solve_qp
from .bigm import node_model
from .inner import try_inner
from .kkt import SingleLevelModel

logger = logging.getLogger('pyaev.bilevel')

PENALTY = 1e12


@dataclass(eq=False)
class Candidate:
    objective: float
    kappa: ScalingMap
    schedule: DispatchSchedule
    point: Optional[np.ndarray]
    source: str


def solve_relaxation(model: LinearModel, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> LpSolution:
    return solve_qp(model, tol) if model.has_quadratic else solve_lp(model, tol)


def evaluate(slm: SingleLevelModel, kappa: ScalingMap,
             tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Tuple[float, Optional[DispatchSchedule]]:
    """Outer objective of the inner LP dispatch on kappa's envelope; PENALTY if it has none"""
    envelope = apply_scaling(slm.agg, kappa, slm.config.soc_min_source)
    result = try_inner(envelope, slm.agg, slm.prices, tol=tol)
    if result is None:
        return PENALTY, None
    schedule = result[2]
    return slm.outer_objective(schedule), schedule


def assemble_point(slm: SingleLevelModel, kappa: ScalingMap, schedule: DispatchSchedule,
                   strict: bool = True) -> Optional[np.ndarray]:
    """
    Full model point for an envelope and an inner dispatch carrying duals.
    With strict, returns None when a multiplier or slack exceeds its big-M.
    """
    if schedule.duals is None:
        return None
    model = slm.model
    x = np.zeros(model.n_vars)
    for role, cols in slm.kappa.items():
        active = np.flatnonzero(cols >= 0)
        col = cols[active]
        x[col] = np.clip(kappa.factor(role)[active], model.lower[col], model.upper[col])
    envelope = apply_scaling(slm.agg, kappa, slm.config.soc_min_source)
    for role, cols in slm.envelope.items():
        x[cols] = envelope.role(role)
    x[slm.charge] = schedule.charge
    x[slm.discharge] = schedule.discharge
    x[slm.soc] = schedule.soc
    x[slm.balance] = schedule.duals.balance
    for role, cols in slm.mu.items():
        x[cols] = schedule.duals.mu(role)

    if slm.reformulated:
        mu = x[slm.mu_columns]
        slack = np.maximum(slm.slacks(x), 0.0)
        if strict and (np.any(mu > slm.m_dual) or np.any(slack > slm.m_primal)):
            return None
        x[slm.binaries] = (slack / slm.m_primal <= mu / slm.m_dual).astype(float)

    targets = {'charge': slm.reference.charge, 'discharge': slm.reference.discharge,
               'soc': slm.reference.soc}
    for quantity, (pos, neg) in slm.deviation.items():
        gap = getattr(schedule, quantity) - targets[quantity]
        x[pos] = np.maximum(gap, 0.0)
        x[neg] = np.maximum(-gap, 0.0)
    return x


def candidate_from(slm: SingleLevelModel, kappa: ScalingMap, source: str,
                   schedule: Optional[DispatchSchedule] = None,
                   tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Optional[Candidate]:
    """Candidate for a map on the model's width, reusing a stored inner dispatch if given"""
    n = slm.group_width
    if kappa.group_width != n:
        if kappa.group_width % n:
            logger.debug("seed '%s' of width %d does not refine to %d", source, kappa.group_width, n)
            return None
        kappa = kappa.refine(n)
    if not kappa.bounded(slm.config.kappa_max):
        logger.debug("seed '%s' exceeds kappa_max %.3g", source, slm.config.kappa_max)
        return None
    if schedule is None or schedule.duals is None:
        objective, schedule = evaluate(slm, kappa, tol)
        if schedule is None:
            return None
    else:
        objective = slm.outer_objective(schedule)
    return Candidate(objective, kappa, schedule, assemble_point(slm, kappa, schedule), source)


def _free_factors(slm: SingleLevelModel) -> List[Tuple[object, int]]:
    model = slm.model
    free = []
    for role, cols in slm.kappa.items():
        for g, col in enumerate(cols):
            if col >= 0 and model.upper[col] > model.lower[col]:
                free.append((role, g))
    return free


def kappa_search(slm: SingleLevelModel, start: Candidate, evaluations: int,
                 tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Candidate:
    """Bounded Powell search over the free factors, starting from a candidate's map"""
    free = _free_factors(slm)
    if not free or evaluations <= 0:
        return start
    kappa_max = slm.config.kappa_max
    best = [start]

    def unpack(values: np.ndarray) -> ScalingMap:
        factors = {role: f.copy() for role, f in start.kappa.factors.items()}
        for (role, g), value in zip(free, np.clip(values, 0.0, kappa_max)):
            factors[role][g] = value
        return ScalingMap(slm.group_width, factors)

    def score(values: np.ndarray) -> float:
        kappa = unpack(values)
        objective, schedule = evaluate(slm, kappa, tol)
        if schedule is not None and objective < best[0].objective:
            best[0] = Candidate(objective, kappa, schedule, None, "search")
        return objective

    x0 = np.array([start.kappa.factor(role)[g] for role, g in free])
    minimize(score, x0, method="Powell", bounds=[(0.0, kappa_max)] * len(free),
             options={'maxfev': evaluations, 'xtol': 1e-4, 'ftol': 1e-9})
    found = best[0]
    if found is not start:
        found.point = assemble_point(slm, found.kappa, found.schedule)
        logger.debug("kappa search: %.6g -> %.6g", start.objective, found.objective)
    return found


def active_set(slm: SingleLevelModel, point: np.ndarray) -> Dict[int, int]:
    """Side realised by each complementarity pair: 1 where the bound binds, 0 where mu is released"""
    mu = point[slm.mu_columns] / slm.m_dual
    slack = np.maximum(slm.slacks(point), 0.0) / slm.m_primal
    return {k: int(s <= m) for k, (s, m) in enumerate(zip(slack, mu))}


def polish(slm: SingleLevelModel, candidate: Candidate, rounds: int,
           tol: ToleranceConfig = DEFAULT_TOLERANCES,
           solve: Callable[[LinearModel, ToleranceConfig], LpSolution] = solve_relaxation) -> Candidate:
    for _ in range(rounds):
        if candidate.point is None:
            break
        solution = solve(node_model(slm, active_set(slm, candidate.point)), tol)
        if not solution.is_optimal:
            break
        kappa = slm.kappa_map(solution.x)
        schedule = slm.schedule(solution.x)
        objective = slm.outer_objective(schedule)
        if np.isfinite(candidate.objective) and not (
                objective < candidate.objective - tol.duality_tol * (1.0 + abs(candidate.objective))):
            break
        lp_objective, lp_schedule = evaluate(slm, kappa, tol)
        if lp_schedule is not None and lp_objective <= objective + tol.duality_tol * (1.0 + abs(objective)):
            objective, schedule = lp_objective, lp_schedule
            point = assemble_point(slm, kappa, schedule)
        else:
            point = solution.x
        logger.debug("polish: %.6g -> %.6g", candidate.objective, objective)
        candidate = Candidate(objective, kappa, schedule, point, "polish")
    return candidate


def seed_candidates(slm: SingleLevelModel, seeds: Sequence[object] = (),
                    tol: ToleranceConfig = DEFAULT_TOLERANCES) -> List[Candidate]:
    """
    Candidates for the unit map and every seed. A seed is a ScalingMap or any
    object with `kappa` and `schedule` attributes (a stored bilevel solution).
    """
    found = []
    unit = candidate_from(slm, ScalingMap.unit(slm.group_width), "unit", tol=tol)
    if unit is not None:
        found.append(unit)
    for k, seed in enumerate(seeds):
        if isinstance(seed, ScalingMap):
            candidate = candidate_from(slm, seed, f"seed_{k}", tol=tol)
        elif getattr(seed, 'kappa', None) is not None:
            candidate = candidate_from(slm, seed.kappa, f"seed_n{seed.kappa.group_width}",
                                       schedule=getattr(seed, 'schedule', None), tol=tol)
        else:
            candidate = None
        if candidate is not None:
            found.append(candidate)
    return sorted(found, key=lambda c: c.objective)
