from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import LinearModel


def _power_of_two(values: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(values)))


@dataclass(frozen=True, eq=False)
class ModelScaling:
    """
    Row equilibration and objective scaling, both by powers of two so that
    scaling and unscaling are exact in floating point.
    """
    row_scale: np.ndarray
    objective_scale: float

    def matrix(self, model: LinearModel) -> sp.csr_matrix:
        return sp.diags(self.row_scale) @ model.matrix

    def rhs(self, model: LinearModel) -> np.ndarray:
        return self.row_scale * model.rhs

    def cost(self, model: LinearModel) -> np.ndarray:
        return model.cost / self.objective_scale

    def hessian(self, model: LinearModel) -> sp.csr_matrix:
        return (model.hessian / self.objective_scale).tocsr()

    def unscale_row_duals(self, y_scaled: np.ndarray) -> np.ndarray:
        return self.objective_scale * self.row_scale * y_scaled

    def unscale_reduced_costs(self, z_scaled: np.ndarray) -> np.ndarray:
        return self.objective_scale * z_scaled


def compute_scaling(model: LinearModel) -> ModelScaling:
    row_max = np.zeros(model.n_rows)
    np.maximum.at(row_max, model.a_rows, np.abs(model.a_vals))
    row_scale = np.ones(model.n_rows)
    filled = row_max > 0
    row_scale[filled] = 1.0 / _power_of_two(row_max[filled])

    largest = max(float(np.max(np.abs(model.cost), initial=0.0)),
                  float(np.max(np.abs(model.q_vals), initial=0.0)))
    objective_scale = float(_power_of_two(np.array([largest]))[0]) if largest > 1.0 else 1.0
    return ModelScaling(row_scale=row_scale, objective_scale=objective_scale)
