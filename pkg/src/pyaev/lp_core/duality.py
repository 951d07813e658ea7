from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .model import LinearModel, Sense
from .scaling import compute_scaling
from .solution import DEFAULT_TOLERANCES, LpSolution, ToleranceConfig


@dataclass
class DualityReport:
    """
    Optimality certificate of a primal-dual pair.

    Residuals are normalised: row violations by max(1, |b_i|, max_j |a_ij|),
    stationarity and complementarity by the objective scale, the gap by
    1 + |primal objective|.
    """
    primal_residual: float
    dual_residual: float
    complementarity_residual: float
    duality_gap: float
    primal_objective: float
    dual_objective: float
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    @property
    def issues(self) -> List[str]:
        tol = self.tolerances
        found = []
        if not self.primal_residual <= tol.feas_tol:
            found.append(f"primal residual {self.primal_residual:.3e} > {tol.feas_tol:.1e}")
        if not self.dual_residual <= tol.feas_tol:
            found.append(f"dual residual {self.dual_residual:.3e} > {tol.feas_tol:.1e}")
        if not self.complementarity_residual <= tol.comp_tol:
            found.append(f"complementarity residual {self.complementarity_residual:.3e}"
                         f" > {tol.comp_tol:.1e}")
        if not self.duality_gap <= tol.duality_tol:
            found.append(f"duality gap {self.duality_gap:.3e} > {tol.duality_tol:.1e}")
        return found

    @property
    def passed(self) -> bool:
        return not self.issues

    def to_dict(self) -> Dict[str, object]:
        return {
            'primal_residual': self.primal_residual,
            'dual_residual': self.dual_residual,
            'complementarity_residual': self.complementarity_residual,
            'duality_gap': self.duality_gap,
            'primal_objective': self.primal_objective,
            'dual_objective': self.dual_objective,
            'passed': self.passed,
        }


def _row_norms(model: LinearModel) -> np.ndarray:
    norms = np.maximum(1.0, np.abs(model.rhs))
    np.maximum.at(norms, model.a_rows, np.abs(model.a_vals))
    return norms


def dual_objective(model: LinearModel, solution: LpSolution) -> float:
    """b'y + l'z+ - u'z- - 1/2 x'Hx + constant"""
    x, y, z = solution.x, solution.row_duals, solution.reduced_costs
    at_lower = np.where(np.isfinite(model.lower), model.lower, x)
    at_upper = np.where(np.isfinite(model.upper), model.upper, x)
    value = float(model.rhs @ y) + model.obj_constant
    value += float(np.where(z > 0, z * at_lower, z * at_upper).sum())
    if model.has_quadratic:
        value -= 0.5 * float(x @ (model.hessian @ x))
    return value


def check_duality(model: LinearModel, solution: LpSolution,
                  tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DualityReport:
    x, y, z = solution.x, solution.row_duals, solution.reduced_costs
    scale = compute_scaling(model).objective_scale

    activity = model.row_activity(x)
    row_slack = activity - model.rhs
    violation = model.row_violation(x)
    bound_violation = np.maximum(model.lower - x, x - model.upper)
    primal_residual = max(float(np.max(violation / _row_norms(model), initial=0.0)),
                          float(np.max(bound_violation, initial=0.0)))

    gradient = model.cost + (model.hessian @ x if model.has_quadratic else 0.0)
    stationarity = gradient - model.matrix.T @ y - z
    ge = model.sense_mask(Sense.GE)
    le = model.sense_mask(Sense.LE)
    wrong_sign_rows = np.concatenate([np.maximum(-y[ge], 0.0), np.maximum(y[le], 0.0)])
    wrong_sign_cols = np.concatenate([
        np.maximum(z[~np.isfinite(model.lower)], 0.0),
        np.maximum(-z[~np.isfinite(model.upper)], 0.0),
    ])
    dual_residual = max(float(np.max(np.abs(stationarity), initial=0.0)),
                        float(np.max(wrong_sign_rows, initial=0.0)),
                        float(np.max(wrong_sign_cols, initial=0.0))) / scale

    row_products = np.abs(y * row_slack)[~model.sense_mask(Sense.EQ)]
    lower_gap = np.where(np.isfinite(model.lower), x - model.lower, 0.0)
    upper_gap = np.where(np.isfinite(model.upper), model.upper - x, 0.0)
    bound_products = np.concatenate([
        np.abs(np.maximum(z, 0.0) * lower_gap),
        np.abs(np.minimum(z, 0.0) * upper_gap),
    ])
    complementarity = max(float(np.max(row_products, initial=0.0)),
                          float(np.max(bound_products, initial=0.0))) / scale

    primal = model.objective_value(x)
    dual = dual_objective(model, solution)
    gap = abs(primal - dual) / (1.0 + abs(primal))

    return DualityReport(
        primal_residual=primal_residual,
        dual_residual=dual_residual,
        complementarity_residual=complementarity,
        duality_gap=gap,
        primal_objective=primal,
        dual_objective=dual,
        tolerances=tol,
    )
