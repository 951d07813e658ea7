from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import ModelFormatError
from .model import LinearModel, Sense
from .scaling import ModelScaling, compute_scaling
from .solution import DEFAULT_TOLERANCES, LpSolution, SolveStatus, ToleranceConfig

logger = logging.getLogger('pyaev.lp_core')

_HIGHS_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
    4: SolveStatus.ITERATION_LIMIT,
}


def highs_bounds(lower: np.ndarray, upper: np.ndarray) -> List[Tuple[Optional[float], Optional[float]]]:
    return [
        (None if np.isneginf(lo) else float(lo), None if np.isposinf(up) else float(up))
        for lo, up in zip(lower, upper)
    ]


@dataclass
class _HighsProblem:
    ub_rows: np.ndarray
    ub_sign: np.ndarray
    eq_rows: np.ndarray
    kwargs: dict = field(default_factory=dict)


def _highs_problem(model: LinearModel, scaling: ModelScaling, cost: np.ndarray) -> _HighsProblem:
    A = scaling.matrix(model).tocsr()
    b = scaling.rhs(model)
    le = model.sense_mask(Sense.LE)
    ge = model.sense_mask(Sense.GE)
    ub_rows = np.flatnonzero(le | ge)
    ub_sign = np.where(ge[ub_rows], -1.0, 1.0)
    eq_rows = np.flatnonzero(model.sense_mask(Sense.EQ))

    kwargs = {'c': cost, 'bounds': highs_bounds(model.lower, model.upper)}
    if ub_rows.size:
        kwargs['A_ub'] = sp.diags(ub_sign) @ A[ub_rows]
        kwargs['b_ub'] = ub_sign * b[ub_rows]
    if eq_rows.size:
        kwargs['A_eq'] = A[eq_rows]
        kwargs['b_eq'] = b[eq_rows]
    return _HighsProblem(ub_rows, ub_sign, eq_rows, kwargs)


def _highs_options(tol: ToleranceConfig) -> dict:
    return {
        'primal_feasibility_tolerance': 0.1 * tol.feas_tol,
        'dual_feasibility_tolerance': 0.1 * tol.feas_tol,
        'presolve': True,
    }


def solve_lp(model: LinearModel, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> LpSolution:
    """Solve a continuous LP with the HiGHS dual simplex, returning unscaled duals"""
    if model.has_quadratic:
        raise ModelFormatError(f"'{model.name}' has quadratic terms; use solve_qp")
    if model.has_integers:
        raise ModelFormatError(f"'{model.name}' has integer columns; relax it first")

    if np.any(model.lower > model.upper):
        return LpSolution.empty(SolveStatus.INFEASIBLE, model.n_vars, model.n_rows,
                                "crossed variable bounds")

    scaling = compute_scaling(model)
    problem = _highs_problem(model, scaling, scaling.cost(model))
    result = linprog(method='highs-ds', options=_highs_options(tol), **problem.kwargs)
    status = _HIGHS_STATUS.get(result.status, SolveStatus.ITERATION_LIMIT)
    logger.debug("%s: HiGHS status %s (%s)", model.name, result.status, result.message)

    if status != SolveStatus.OPTIMAL:
        return LpSolution.empty(status, model.n_vars, model.n_rows, str(result.message))

    y_scaled = np.zeros(model.n_rows)
    if problem.ub_rows.size:
        y_scaled[problem.ub_rows] = problem.ub_sign * result.ineqlin.marginals
    if problem.eq_rows.size:
        y_scaled[problem.eq_rows] = result.eqlin.marginals
    z_scaled = result.lower.marginals + result.upper.marginals

    x = np.asarray(result.x, dtype=float)
    return LpSolution(
        status=SolveStatus.OPTIMAL,
        x=x,
        row_duals=scaling.unscale_row_duals(y_scaled),
        reduced_costs=scaling.unscale_reduced_costs(z_scaled),
        objective=model.objective_value(x),
        iterations=int(getattr(result, 'nit', 0)),
        message=str(result.message),
    )


def is_feasible(model: LinearModel, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
    """Zero-objective HiGHS solve over the constraints of model, ignoring its objective"""
    if np.any(model.lower > model.upper):
        return False
    scaling = compute_scaling(model)
    problem = _highs_problem(model, scaling, np.zeros(model.n_vars))
    result = linprog(method='highs', options=_highs_options(tol), **problem.kwargs)
    return result.status != 2


@dataclass(eq=False)
class InfeasibilityReport:
    """Elastic diagnosis of an infeasible model"""
    violated_rows: List[int]
    row_violation: np.ndarray
    certificate: Optional[np.ndarray]
    bound_conflicts: List[int]

    def first_row(self) -> Optional[int]:
        return min(self.violated_rows) if self.violated_rows else None


def find_infeasibility(model: LinearModel,
                       tol: ToleranceConfig = DEFAULT_TOLERANCES) -> InfeasibilityReport:
    """
    Minimise the total row violation with elastic columns. Rows whose elastic
    columns stay positive are reported, and the row duals of the elastic
    problem serve as the infeasibility certificate.
    """
    conflicts = [int(j) for j in np.flatnonzero(model.lower > model.upper)]
    if conflicts:
        return InfeasibilityReport([], np.zeros(model.n_rows), None, conflicts)

    m, n = model.n_rows, model.n_vars
    add = np.array([s in (Sense.EQ, Sense.GE) for s in model.senses], dtype=bool)
    sub = np.array([s in (Sense.EQ, Sense.LE) for s in model.senses], dtype=bool)
    add_rows, sub_rows = np.flatnonzero(add), np.flatnonzero(sub)
    k_add, k_sub = add_rows.size, sub_rows.size

    names = list(model.var_names)
    names += [f"elastic_up_{i}" for i in add_rows]
    names += [f"elastic_down_{i}" for i in sub_rows]
    total = n + k_add + k_sub
    elastic = LinearModel(
        name=f"{model.name}_elastic",
        var_names=tuple(names),
        row_names=model.row_names,
        cost=np.concatenate([np.zeros(n), np.ones(k_add + k_sub)]),
        lower=np.concatenate([model.lower, np.zeros(k_add + k_sub)]),
        upper=np.concatenate([model.upper, np.full(k_add + k_sub, np.inf)]),
        integer=np.zeros(total, dtype=bool),
        senses=model.senses,
        rhs=model.rhs.copy(),
        a_rows=np.concatenate([model.a_rows, add_rows, sub_rows]),
        a_cols=np.concatenate([model.a_cols, n + np.arange(k_add),
                               n + k_add + np.arange(k_sub)]),
        a_vals=np.concatenate([model.a_vals, np.ones(k_add), -np.ones(k_sub)]),
    )
    solution = solve_lp(elastic, tol)
    if not solution.is_optimal:
        logger.warning("%s: elastic diagnosis ended with %s", model.name, solution.status)
        return InfeasibilityReport([], np.zeros(m), None, [])

    violation = np.zeros(m)
    violation[add_rows] += solution.x[n:n + k_add]
    violation[sub_rows] += solution.x[n + k_add:]
    threshold = tol.feas_tol * (1.0 + np.abs(model.rhs))
    violated = [int(i) for i in np.flatnonzero(violation > threshold)]
    return InfeasibilityReport(violated, violation, solution.row_duals, [])
