from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from typing import Optional

import numpy as np

from ..errors import ConfigurationError


class SolveStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class ToleranceConfig:
    """Solver and certificate tolerances, shared by LP, QP and duality checks"""
    feas_tol: float = 1e-8
    comp_tol: float = 1e-7
    duality_tol: float = 1e-7
    max_iter: int = 200

    def __post_init__(self):
        for name in ('feas_tol', 'comp_tol', 'duality_tol'):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigurationError(f"tolerances.{name} must lie in (0, 1), got {value}")
        if self.max_iter < 1:
            raise ConfigurationError("tolerances.max_iter must be positive")


DEFAULT_TOLERANCES = ToleranceConfig()


@dataclass(eq=False)
class LpSolution:
    """
    Primal-dual result of an LP or QP solve.

    Duals follow c + Hx - A'y - z = 0: y_i is the sensitivity of the optimum to
    b_i (>= 0 on >= rows, <= 0 on <= rows) and z_j is the reduced cost
    (>= 0 at a lower bound, <= 0 at an upper bound).
    """
    status: SolveStatus
    x: np.ndarray
    row_duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int = 0
    certificate: Optional[np.ndarray] = None
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL

    @staticmethod
    def empty(status: SolveStatus, n_vars: int, n_rows: int, message: str = "",
              certificate: Optional[np.ndarray] = None) -> LpSolution:
        return LpSolution(
            status=status,
            x=np.full(n_vars, np.nan),
            row_duals=np.zeros(n_rows),
            reduced_costs=np.zeros(n_vars),
            objective=np.nan,
            certificate=certificate,
            message=message,
        )
