"""
Single-level recast of the AEV fitting problem.

The inner dispatch LP is replaced by its KKT system. With the continuity rows
written as xs_{t+1} - rho xs_t - eta_c xc_t + xd_t / eta_d + demand_t = 0
(multiplier lambda_t, the last one closing on the terminal target) and one
nonnegative mu per bound row, stationarity reads

    xc_t:  -eta_c lambda_t - mu_cmin_t + mu_cmax_t = -price_t
    xd_t:  lambda_t / eta_d - mu_dmin_t + mu_dmax_t = price_t
    xs_t:  lambda_{t-1} - rho lambda_t - mu_smin_t + mu_smax_t = 0   (no lambda_{t-1} at t = 0)

Each mu is complementary to the slack of its bound row; the pairs are carried
as metadata until big_m_reformulate turns them into disjunctions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp

from ..aggregate import AggregateProfile, ScalingMap, base_series, group_coverage, step_groups
from ..dispatch import BOUND_ROLES, BoundRole, DispatchSchedule, FleetReference, StorageDuals, price_array
from ..errors import GridMismatchError
from ..event_bus import warn
from ..lp_core import LinearModel, ModelBuilder, Sense
from .config import BilevelConfig, ObjectiveNorm

logger = logging.getLogger('pyaev.bilevel')

QUANTITIES = ('charge', 'discharge', 'soc')


@dataclass(frozen=True)
class ComplementarityPair:
    """mu column against the slack of its bound row; big-M fields are set by reformulation"""
    role: BoundRole
    step: int
    mu: int
    slack_row: int
    binary: int = -1
    dual_row: int = -1
    primal_row: int = -1
    m_dual: float = float('nan')
    m_primal: float = float('nan')

    @property
    def name(self) -> str:
        return f"{self.role}_{self.step}"


@dataclass(frozen=True, eq=False)
class SingleLevelModel:
    model: LinearModel
    reference: FleetReference
    agg: AggregateProfile
    prices: np.ndarray
    config: BilevelConfig
    kappa: Dict[BoundRole, np.ndarray]
    envelope: Dict[BoundRole, np.ndarray]
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    balance: np.ndarray
    mu: Dict[BoundRole, np.ndarray]
    pairs: Tuple[ComplementarityPair, ...]
    deviation: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    reformulated: bool = False
    warnings: Tuple[str, ...] = ()

    @property
    def steps(self) -> int:
        return self.agg.grid.steps

    @property
    def group_width(self) -> int:
        return self.config.group_width

    def pair_index(self, role: BoundRole, step: int) -> int:
        return BOUND_ROLES.index(BoundRole(role)) * self.steps + step

    def primal_columns(self, quantity: str) -> np.ndarray:
        return {'charge': self.charge, 'discharge': self.discharge, 'soc': self.soc}[quantity]

    @cached_property
    def mu_columns(self) -> np.ndarray:
        return np.array([p.mu for p in self.pairs], dtype=np.int64)

    @cached_property
    def slack_rows(self) -> np.ndarray:
        return np.array([p.slack_row for p in self.pairs], dtype=np.int64)

    @cached_property
    def m_dual(self) -> np.ndarray:
        return np.array([p.m_dual for p in self.pairs])

    @cached_property
    def m_primal(self) -> np.ndarray:
        return np.array([p.m_primal for p in self.pairs])

    @cached_property
    def binaries(self) -> np.ndarray:
        return np.array([p.binary for p in self.pairs], dtype=np.int64)

    @cached_property
    def _slack_matrix(self) -> sp.csr_matrix:
        return self.model.matrix[self.slack_rows]

    def slacks(self, x: np.ndarray) -> np.ndarray:
        return self._slack_matrix @ x

    def kappa_map(self, x: np.ndarray) -> ScalingMap:
        """Scaling factors of a model point, clipped to [0, kappa_max]; empty groups read 1"""
        factors = {}
        for role, cols in self.kappa.items():
            values = np.ones(cols.size)
            active = cols >= 0
            values[active] = np.clip(x[cols[active]], 0.0, self.config.kappa_max)
            factors[role] = values
        return ScalingMap(self.group_width, factors)

    def schedule(self, x: np.ndarray, owner: str = "aev") -> DispatchSchedule:
        charge, discharge = x[self.charge].copy(), x[self.discharge].copy()
        return DispatchSchedule(
            owner=owner,
            charge=charge,
            discharge=discharge,
            soc=x[self.soc].copy(),
            objective=float(self.prices @ (charge - discharge)),
            duals=StorageDuals(balance=x[self.balance].copy(),
                               bound={role: x[cols].copy() for role, cols in self.mu.items()}),
        )

    def outer_objective(self, schedule: DispatchSchedule) -> float:
        return outer_objective(schedule, self.reference, self.config)


def outer_objective(schedule: DispatchSchedule, reference: FleetReference, cfg: BilevelConfig) -> float:
    """Weighted squared (or absolute) deviation of a unit schedule from the fleet reference"""
    total = 0.0
    targets = {'charge': reference.charge, 'discharge': reference.discharge, 'soc': reference.soc}
    for quantity, gamma in cfg.gammas.items():
        if gamma == 0:
            continue
        gap = getattr(schedule, quantity) - targets[quantity]
        total += gamma * (float(gap @ gap) if cfg.objective_norm == ObjectiveNorm.L2
                          else float(np.abs(gap).sum()))
    return total


def _add_objective(builder: ModelBuilder, cfg: BilevelConfig, reference: FleetReference,
                   primal: Dict[str, np.ndarray]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    targets = {'charge': reference.charge, 'discharge': reference.discharge, 'soc': reference.soc}
    deviation = {}
    for quantity, gamma in cfg.gammas.items():
        if gamma == 0:
            continue
        cols, target = primal[quantity], targets[quantity]
        if cfg.objective_norm == ObjectiveNorm.L2:
            for t, col in enumerate(cols):
                builder.add_square([col], [1.0], target=target[t], weight=gamma)
            continue
        pos = builder.add_vars(f"dev_{quantity}_pos", cols.size, 0.0, np.inf, gamma)
        neg = builder.add_vars(f"dev_{quantity}_neg", cols.size, 0.0, np.inf, gamma)
        for t, col in enumerate(cols):
            builder.add_row(f"dev_{quantity}_{t}", [col, pos[t], neg[t]], [1.0, -1.0, 1.0],
                            Sense.EQ, target[t])
        deviation[quantity] = (pos, neg)
    return deviation


def build_single_level(reference: FleetReference, agg: AggregateProfile, cfg: BilevelConfig,
                       prices) -> SingleLevelModel:
    steps = agg.grid.steps
    if reference.steps != steps:
        raise GridMismatchError(f"reference has {reference.steps} steps, aggregate {steps}")
    prices = price_array(prices, steps)
    n = cfg.group_width
    coverage = group_coverage(agg.grid, n, announce=True)
    source_note = f"lower SOC factor scales the summed {cfg.soc_min_source} series (n={n})"
    warn(source_note, soc_min_source=str(cfg.soc_min_source), group_width=n)
    tau = step_groups(agg.grid, n)
    p = agg.params
    builder = ModelBuilder(f"aev_n{n}")

    bases = {role: base_series(agg, role, cfg.soc_min_source) for role in BOUND_ROLES}
    kappa = {}
    for role in BOUND_ROLES:
        cols = -np.ones(coverage.sizes.size, dtype=np.int64)
        for g in np.flatnonzero(coverage.active):
            # a factor on an all-zero series has no effect; pin it
            degenerate = not np.any(bases[role][tau == g] != 0)
            lo, up = (1.0, 1.0) if degenerate else (0.0, cfg.kappa_max)
            cols[g] = builder.add_var(f"kappa_{role}_{g}", lo, up)
        kappa[role] = cols

    envelope = {role: builder.add_vars(f"env_{role}", steps, 0.0,
                                       np.where(bases[role] != 0, np.inf, 0.0))
                for role in BOUND_ROLES}
    xc = builder.add_vars("xc", steps, -np.inf, np.inf)
    xd = builder.add_vars("xd", steps, -np.inf, np.inf)
    xs = builder.add_vars("xs", steps, -np.inf, np.inf)
    lam = builder.add_vars("lambda", steps, -np.inf, np.inf)
    mu = {role: builder.add_vars(f"mu_{role}", steps, 0.0, np.inf) for role in BOUND_ROLES}
    primal = {'charge': xc, 'discharge': xd, 'soc': xs}

    for role in BOUND_ROLES:
        base = bases[role]
        for t in np.flatnonzero(base != 0):
            builder.add_row(f"link_{role}_{t}", [envelope[role][t], kappa[role][tau[t]]],
                            [1.0, -base[t]], Sense.EQ, 0.0)

    pairs = []
    for role in BOUND_ROLES:
        x, e = primal[role.quantity], envelope[role]
        sign = 1.0 if role.is_lower else -1.0
        for t in range(steps):
            row = builder.add_row(f"bound_{role}_{t}", [x[t], e[t]], [sign, -sign], Sense.GE, 0.0)
            pairs.append(ComplementarityPair(role, t, int(mu[role][t]), row))

    for t in range(steps):
        cols = [xs[t], xc[t], xd[t]]
        vals = [-p.rho, -p.eta_c, 1.0 / p.eta_d]
        if t < steps - 1:
            builder.add_row(f"balance_{t}", cols + [xs[t + 1]], vals + [1.0], Sense.EQ, -agg.demand[t])
        else:
            builder.add_row("terminal", cols, vals, Sense.EQ, -agg.demand[t] - p.final_soc_target)

    mu_c = (mu[BoundRole.CHARGE_MIN], mu[BoundRole.CHARGE_MAX])
    mu_d = (mu[BoundRole.DISCHARGE_MIN], mu[BoundRole.DISCHARGE_MAX])
    mu_s = (mu[BoundRole.SOC_MIN], mu[BoundRole.SOC_MAX])
    for t in range(steps):
        builder.add_row(f"stat_charge_{t}", [lam[t], mu_c[0][t], mu_c[1][t]],
                        [-p.eta_c, -1.0, 1.0], Sense.EQ, -prices[t])
        builder.add_row(f"stat_discharge_{t}", [lam[t], mu_d[0][t], mu_d[1][t]],
                        [1.0 / p.eta_d, -1.0, 1.0], Sense.EQ, prices[t])
        cols = [lam[t], mu_s[0][t], mu_s[1][t]]
        vals = [-p.rho, -1.0, 1.0]
        if t > 0:
            cols.append(lam[t - 1])
            vals.append(1.0)
        builder.add_row(f"stat_soc_{t}", cols, vals, Sense.EQ, 0.0)

    deviation = _add_objective(builder, cfg, reference, primal)
    model = builder.build()
    logger.debug("single-level model %s: %s", model.name, model.summary())
    return SingleLevelModel(
        model=model,
        reference=reference,
        agg=agg,
        prices=prices,
        config=cfg,
        kappa=kappa,
        envelope=envelope,
        charge=xc,
        discharge=xd,
        soc=xs,
        balance=lam,
        mu=mu,
        pairs=tuple(pairs),
        deviation=deviation,
        warnings=(*coverage.warnings(), source_note),
    )


def pin_kappa(slm: SingleLevelModel, value: float = 1.0) -> SingleLevelModel:
    """Fix every scaling factor; the model then encodes the inner KKT system of one envelope"""
    lower, upper = slm.model.lower.copy(), slm.model.upper.copy()
    for cols in slm.kappa.values():
        active = cols[cols >= 0]
        lower[active] = upper[active] = value
    return replace(slm, model=slm.model.with_bounds(lower, upper))
