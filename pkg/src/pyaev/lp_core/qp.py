from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import ModelFormatError
from .lp import is_feasible
from .model import LinearModel, Sense
from .scaling import ModelScaling, compute_scaling
from .solution import DEFAULT_TOLERANCES, LpSolution, SolveStatus, ToleranceConfig

logger = logging.getLogger('pyaev.lp_core')

STEP_FRACTION = 0.995
PRIMAL_REGULARIZATION = 1e-9
DUAL_REGULARIZATION = 1e-10


def _is_fixed(lower: float, upper: float) -> bool:
    return upper - lower <= 1e-12 * max(1.0, abs(lower))


@dataclass(eq=False)
class _Reduction:
    """
    Presolved standard form: fixed columns eliminated, singleton rows turned
    into bounds, remaining inequality rows closed with slack columns.
    """
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    H: sp.csr_matrix
    lower: np.ndarray
    upper: np.ndarray
    free: np.ndarray
    active_rows: np.ndarray
    fixed_value: np.ndarray
    fixed_order: List[int]
    lower_src: np.ndarray
    upper_src: np.ndarray
    source_coef: np.ndarray
    infeasible: bool = False

    @property
    def n_free(self) -> int:
        return self.free.size


def _presolve(model: LinearModel, scaling: ModelScaling, tol: ToleranceConfig) -> _Reduction:
    n, m = model.n_vars, model.n_rows
    A = scaling.matrix(model).tocsr()
    A.sort_indices()
    b = scaling.rhs(model)
    c = scaling.cost(model)
    H = scaling.hessian(model)
    senses = model.senses

    lower = model.lower.astype(float).copy()
    upper = model.upper.astype(float).copy()
    lower_src = -np.ones(n, dtype=np.int64)
    upper_src = -np.ones(n, dtype=np.int64)
    source_coef = np.zeros(m)
    fixed = np.zeros(n, dtype=bool)
    fixed_value = np.zeros(n)
    fixed_order: List[int] = []
    row_active = np.ones(m, dtype=bool)
    infeasible = False

    def fix(j: int, value: float):
        fixed[j] = True
        fixed_value[j] = value
        fixed_order.append(j)

    for j in range(n):
        if _is_fixed(lower[j], upper[j]):
            fix(j, 0.5 * (lower[j] + upper[j]))

    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data)
    while not infeasible:
        counts = pattern @ (~fixed).astype(float)
        residual = b - A @ fixed_value
        for i in np.flatnonzero(row_active & (counts == 0)):
            slack = residual[i]
            limit = tol.feas_tol * max(1.0, abs(b[i]))
            bad = ((senses[i] == Sense.LE and slack < -limit)
                   or (senses[i] == Sense.GE and slack > limit)
                   or (senses[i] == Sense.EQ and abs(slack) > limit))
            if bad:
                logger.debug("%s: row %s is empty and violated", model.name, model.row_names[i])
                infeasible = True
            row_active[i] = False

        singles = np.flatnonzero(row_active & (counts == 1))
        if singles.size == 0 or infeasible:
            break

        for i in singles:
            start, end = A.indptr[i], A.indptr[i + 1]
            cols, vals = A.indices[start:end], A.data[start:end]
            open_cols = ~fixed[cols]
            if np.count_nonzero(open_cols) != 1:
                continue
            j = int(cols[open_cols][0])
            a = float(vals[open_cols][0])
            bound = (b[i] - vals[~open_cols] @ fixed_value[cols[~open_cols]]) / a
            row_active[i] = False
            source_coef[i] = a

            sense = senses[i]
            tightens_lower = sense == Sense.EQ or ((sense == Sense.GE) == (a > 0))
            tightens_upper = sense == Sense.EQ or not ((sense == Sense.GE) == (a > 0))
            if tightens_lower and bound > lower[j]:
                lower[j], lower_src[j] = bound, i
            if tightens_upper and bound < upper[j]:
                upper[j], upper_src[j] = bound, i

            if lower[j] > upper[j] + tol.feas_tol * max(1.0, abs(lower[j])):
                infeasible = True
                break
            if _is_fixed(lower[j], upper[j]) or lower[j] > upper[j]:
                fix(j, 0.5 * (lower[j] + upper[j]))

    free = np.flatnonzero(~fixed)
    active_rows = np.flatnonzero(row_active)
    residual = b - A @ fixed_value
    A_free = A[active_rows][:, free]

    ineq = np.array([senses[i] != Sense.EQ for i in active_rows], dtype=bool)
    slack_rows = np.flatnonzero(ineq)
    slack_sign = np.array([1.0 if senses[active_rows[k]] == Sense.LE else -1.0
                           for k in slack_rows])
    n_slack = slack_rows.size
    S = sp.csr_matrix((slack_sign, (slack_rows, np.arange(n_slack))),
                      shape=(active_rows.size, n_slack))

    fixed_idx = np.flatnonzero(fixed)
    c_free = c[free] + H[free][:, fixed_idx] @ fixed_value[fixed_idx]
    H_free = H[free][:, free]

    if n_slack:
        A_std = sp.hstack([A_free, S], format='csr')
        H_std = sp.block_diag([H_free, sp.csr_matrix((n_slack, n_slack))], format='csr')
    else:
        A_std, H_std = A_free.tocsr(), H_free.tocsr()

    return _Reduction(
        A=A_std,
        b=residual[active_rows],
        c=np.concatenate([c_free, np.zeros(n_slack)]),
        H=H_std,
        lower=np.concatenate([lower[free], np.zeros(n_slack)]),
        upper=np.concatenate([upper[free], np.full(n_slack, np.inf)]),
        free=free,
        active_rows=active_rows,
        fixed_value=fixed_value,
        fixed_order=fixed_order,
        lower_src=lower_src,
        upper_src=upper_src,
        source_coef=source_coef,
        infeasible=infeasible,
    )


@dataclass(eq=False)
class _Iterate:
    v: np.ndarray
    y: np.ndarray
    zl: np.ndarray
    zu: np.ndarray
    iterations: int
    converged: bool


def _max_step(w: np.ndarray, dw: np.ndarray, mask: np.ndarray, fraction: float) -> float:
    shrinking = mask & (dw < 0)
    if not np.any(shrinking):
        return 1.0
    return min(1.0, fraction * float(np.min(-w[shrinking] / dw[shrinking])))


def _interior_point(red: _Reduction, objective_scale: float, constant: float,
                    tol: ToleranceConfig) -> _Iterate:
    """Mehrotra predictor-corrector on the presolved form"""
    A, b, c, H = red.A, red.b, red.c, red.H
    N, M = A.shape[1], A.shape[0]
    lo, up = red.lower, red.upper
    has_l, has_u = np.isfinite(lo), np.isfinite(up)
    l0 = np.where(has_l, lo, 0.0)
    u0 = np.where(has_u, up, 0.0)
    n_comp = max(1, int(np.count_nonzero(has_l) + np.count_nonzero(has_u)))
    At = A.T.tocsr()

    v = np.zeros(N)
    both = has_l & has_u
    v[both] = 0.5 * (lo[both] + up[both])
    only_l = has_l & ~has_u
    v[only_l] = lo[only_l] + 1.0
    only_u = ~has_l & has_u
    v[only_u] = up[only_u] - 1.0
    y = np.zeros(M)
    zl = np.where(has_l, 1.0, 0.0)
    zu = np.where(has_u, 1.0, 0.0)

    row_norm = np.maximum(1.0, np.abs(b))
    reg = sp.eye(M, format='csc') * DUAL_REGULARIZATION

    for it in range(tol.max_iter):
        wl = np.where(has_l, v - l0, 1.0)
        wu = np.where(has_u, u0 - v, 1.0)
        r_d = H @ v + c - At @ y - zl + zu
        r_p = A @ v - b
        prod_l = np.where(has_l, wl * zl, 0.0)
        prod_u = np.where(has_u, wu * zu, 0.0)
        mu = (prod_l.sum() + prod_u.sum()) / n_comp

        objective = objective_scale * (c @ v + 0.5 * v @ (H @ v)) + constant
        primal_ok = float(np.max(np.abs(r_p) / row_norm, initial=0.0)) <= 0.1 * tol.feas_tol
        dual_ok = float(np.max(np.abs(r_d), initial=0.0)) <= 0.1 * tol.feas_tol
        comp_ok = (max(float(prod_l.max(initial=0.0)), float(prod_u.max(initial=0.0)))
                   <= 0.1 * tol.comp_tol)
        gap_ok = (objective_scale * (prod_l.sum() + prod_u.sum())
                  <= 0.5 * tol.duality_tol * (1.0 + abs(objective)))
        if primal_ok and dual_ok and comp_ok and gap_ok:
            return _Iterate(v, y, zl, zu, it, True)

        D = np.where(has_l, zl / wl, 0.0) + np.where(has_u, zu / wu, 0.0)
        block = H + sp.diags(D + PRIMAL_REGULARIZATION)
        if M:
            K = sp.bmat([[block, At], [A, -reg]], format='csc')
        else:
            K = sp.csc_matrix(block)
        try:
            lu = splu(K)
        except RuntimeError as e:
            logger.debug("KKT factorization failed at iteration %d: %s", it, e)
            return _Iterate(v, y, zl, zu, it, False)

        def direction(target_l, target_u):
            rhs = (-r_d
                   + np.where(has_l, target_l / wl - zl, 0.0)
                   - np.where(has_u, target_u / wu - zu, 0.0))
            step = lu.solve(np.concatenate([rhs, -r_p]))
            dv = step[:N]
            dy = -step[N:]
            dzl = np.where(has_l, (target_l - wl * zl - zl * dv) / wl, 0.0)
            dzu = np.where(has_u, (target_u - wu * zu + zu * dv) / wu, 0.0)
            return dv, dy, dzl, dzu

        def step_length(dv, dzl, dzu, fraction):
            alpha_p = min(_max_step(wl, dv, has_l, fraction),
                          _max_step(wu, -dv, has_u, fraction))
            alpha_d = min(_max_step(zl, dzl, has_l, fraction),
                          _max_step(zu, dzu, has_u, fraction))
            return min(alpha_p, alpha_d)

        zero = np.zeros(N)
        dv, dy, dzl, dzu = direction(zero, zero)
        alpha = step_length(dv, dzl, dzu, 1.0)
        mu_aff = (np.where(has_l, (wl + alpha * dv) * (zl + alpha * dzl), 0.0).sum()
                  + np.where(has_u, (wu - alpha * dv) * (zu + alpha * dzu), 0.0).sum()) / n_comp
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        target_l = np.where(has_l, sigma * mu - dv * dzl, 0.0)
        target_u = np.where(has_u, sigma * mu + dv * dzu, 0.0)
        dv, dy, dzl, dzu = direction(target_l, target_u)
        alpha = step_length(dv, dzl, dzu, STEP_FRACTION)

        v = v + alpha * dv
        y = y + alpha * dy
        zl = np.where(has_l, zl + alpha * dzl, 0.0)
        zu = np.where(has_u, zu + alpha * dzu, 0.0)

    return _Iterate(v, y, zl, zu, tol.max_iter, False)


def _postsolve(model: LinearModel, scaling: ModelScaling, red: _Reduction,
               state: Optional[_Iterate]):
    n, m = model.n_vars, model.n_rows
    x = red.fixed_value.copy()
    y_s = np.zeros(m)
    z_s = np.zeros(n)

    if state is not None and red.n_free:
        nf = red.n_free
        x[red.free] = state.v[:nf]
        y_s[red.active_rows] = state.y
        zl, zu = state.zl[:nf], state.zu[:nf]
        for k, j in enumerate(red.free):
            src = red.lower_src[j]
            if src >= 0:
                y_s[src] += zl[k] / red.source_coef[src]
            else:
                z_s[j] += zl[k]
            src = red.upper_src[j]
            if src >= 0:
                y_s[src] -= zu[k] / red.source_coef[src]
            else:
                z_s[j] -= zu[k]

    A_csc = scaling.matrix(model).tocsc()
    gradient = scaling.cost(model) + scaling.hessian(model) @ x
    for j in reversed(red.fixed_order):
        start, end = A_csc.indptr[j], A_csc.indptr[j + 1]
        rows, vals = A_csc.indices[start:end], A_csc.data[start:end]
        r = gradient[j] - vals @ y_s[rows]
        src = red.lower_src[j] if r > 0 else red.upper_src[j]
        if src >= 0:
            y_s[src] += r / red.source_coef[src]
        else:
            z_s[j] = r

    return x, scaling.unscale_row_duals(y_s), scaling.unscale_reduced_costs(z_s)


def solve_qp(model: LinearModel, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> LpSolution:
    """
    Solve a convex QP (or LP) with a sparse primal-dual interior point method.

    Feasibility is screened with HiGHS first; the interior point iteration
    itself assumes a nonempty feasible set.
    """
    if model.has_integers:
        raise ModelFormatError(f"'{model.name}' has integer columns; relax or fix them first")

    if not is_feasible(model, tol):
        return LpSolution.empty(SolveStatus.INFEASIBLE, model.n_vars, model.n_rows,
                                "constraints admit no point")

    scaling = compute_scaling(model)
    red = _presolve(model, scaling, tol)
    if red.infeasible:
        return LpSolution.empty(SolveStatus.INFEASIBLE, model.n_vars, model.n_rows,
                                "presolve found conflicting bounds")

    state = None
    status = SolveStatus.OPTIMAL
    iterations = 0
    if red.n_free:
        x_fixed = red.fixed_value
        constant = model.obj_constant + scaling.objective_scale * (
            scaling.cost(model) @ x_fixed
            + 0.5 * x_fixed @ (scaling.hessian(model) @ x_fixed))
        state = _interior_point(red, scaling.objective_scale, constant, tol)
        iterations = state.iterations
        if not state.converged:
            status = SolveStatus.ITERATION_LIMIT
            logger.warning("%s: interior point stopped after %d iterations",
                           model.name, iterations)

    x, y, z = _postsolve(model, scaling, red, state)
    return LpSolution(
        status=status,
        x=x,
        row_duals=y,
        reduced_costs=z,
        objective=model.objective_value(x),
        iterations=iterations,
    )
