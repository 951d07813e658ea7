"""
Storage dispatch LP shared by single vehicles and aggregated units.

    min  sum_t price_t (xc_t - xd_t)
    s.t. xs_{t+1} = rho xs_t + eta_c xc_t - xd_t / eta_d - demand_t   (t < T-1)
         target   = rho xs_T-1 + eta_c xc_T-1 - xd_T-1 / eta_d - demand_T-1
         charge/discharge/soc bounds as column bounds

The continuity multipliers lambda_t belong to the rows written as
xs_{t+1} - rho xs_t - eta_c xc_t + xd_t / eta_d + demand_t = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Dict, List, Mapping, Tuple

import numpy as np

from ..errors import GridMismatchError
from ..lp_core import LinearModel, LpSolution, ModelBuilder, Sense
from .schedule import DispatchSchedule

if TYPE_CHECKING:
    from ..profiles import EvParams


class BoundRole(StrEnum):
    CHARGE_MIN = "charge_min"
    CHARGE_MAX = "charge_max"
    DISCHARGE_MIN = "discharge_min"
    DISCHARGE_MAX = "discharge_max"
    SOC_MIN = "soc_min"
    SOC_MAX = "soc_max"

    @property
    def quantity(self) -> str:
        return self.value.split("_")[0]

    @property
    def is_lower(self) -> bool:
        return self.value.endswith("_min")

    @property
    def partner(self) -> BoundRole:
        quantity = self.quantity
        return BoundRole(f"{quantity}_max" if self.is_lower else f"{quantity}_min")


BOUND_ROLES: Tuple[BoundRole, ...] = tuple(BoundRole)


@dataclass(frozen=True, eq=False)
class StorageBounds:
    """Per-step charge, discharge (MWh/h) and state-of-charge (MWh) limits"""
    charge_min: np.ndarray
    charge_max: np.ndarray
    discharge_min: np.ndarray
    discharge_max: np.ndarray
    soc_min: np.ndarray
    soc_max: np.ndarray

    def __post_init__(self):
        lengths = set()
        for role in BOUND_ROLES:
            values = np.asarray(getattr(self, role.value), dtype=float).reshape(-1)
            object.__setattr__(self, role.value, values)
            lengths.add(values.size)
        if len(lengths) != 1:
            raise GridMismatchError(f"bound series have different lengths {sorted(lengths)}")

    @property
    def steps(self) -> int:
        return self.charge_min.size

    def role(self, role: BoundRole) -> np.ndarray:
        return getattr(self, BoundRole(role).value)

    def as_dict(self) -> Dict[BoundRole, np.ndarray]:
        return {role: self.role(role) for role in BOUND_ROLES}

    @classmethod
    def from_roles(cls, values: Mapping[str, np.ndarray]) -> StorageBounds:
        return cls(**{role.value: values[role] for role in BOUND_ROLES})

    @classmethod
    def zeros(cls, steps: int) -> StorageBounds:
        return cls(**{role.value: np.zeros(steps) for role in BOUND_ROLES})

    def crossed_steps(self) -> Dict[str, List[int]]:
        """Steps where a lower bound exceeds its upper bound, by quantity"""
        crossed = {}
        for quantity in ('charge', 'discharge', 'soc'):
            bad = np.flatnonzero(getattr(self, f"{quantity}_min") > getattr(self, f"{quantity}_max"))
            if bad.size:
                crossed[quantity] = bad.tolist()
        return crossed

    def equals(self, other: StorageBounds) -> bool:
        return all(np.array_equal(self.role(r), other.role(r)) for r in BOUND_ROLES)


@dataclass(eq=False)
class StorageDuals:
    """lambda on continuity/terminal rows, one nonnegative mu series per bound role"""
    balance: np.ndarray
    bound: Dict[BoundRole, np.ndarray] = field(default_factory=dict)

    def mu(self, role: BoundRole) -> np.ndarray:
        return self.bound[BoundRole(role)]


@dataclass(frozen=True, eq=False)
class StorageLp:
    model: LinearModel
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    balance_rows: np.ndarray

    @property
    def steps(self) -> int:
        return self.charge.size

    def step_of_column(self, col: int) -> int:
        return int(col) % self.steps


def price_array(prices, steps: int) -> np.ndarray:
    """Price values from a PriceSeries or any array-like, checked against the grid"""
    values = np.asarray(getattr(prices, 'values', prices), dtype=float).reshape(-1)
    if values.size != steps:
        raise GridMismatchError(f"{values.size} prices for {steps} steps")
    return values


def build_storage_lp(bounds: StorageBounds, params: EvParams, demand: np.ndarray,
                     prices: np.ndarray, name: str = "storage") -> StorageLp:
    steps = bounds.steps
    demand = np.asarray(demand, dtype=float).reshape(-1)
    prices = price_array(prices, steps)
    if demand.size != steps:
        raise GridMismatchError(f"{demand.size} demand values for {steps} steps")

    builder = ModelBuilder(name)
    xc = builder.add_vars("xc", steps, bounds.charge_min, bounds.charge_max, prices)
    xd = builder.add_vars("xd", steps, bounds.discharge_min, bounds.discharge_max, -prices)
    xs = builder.add_vars("xs", steps, bounds.soc_min, bounds.soc_max)

    rows = []
    for t in range(steps):
        cols = [xs[t], xc[t], xd[t]]
        vals = [-params.rho, -params.eta_c, 1.0 / params.eta_d]
        if t < steps - 1:
            cols.append(xs[t + 1])
            vals.append(1.0)
            rows.append(builder.add_row(f"balance_{t}", cols, vals, Sense.EQ, -demand[t]))
        else:
            rows.append(builder.add_row("terminal", cols, vals, Sense.EQ,
                                        -demand[t] - params.final_soc_target))
    return StorageLp(builder.build(), xc, xd, xs, np.asarray(rows, dtype=np.int64))


def split_reduced_costs(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Lower-bound and upper-bound multipliers from signed reduced costs"""
    return np.maximum(z, 0.0), np.maximum(-z, 0.0)


def extract_duals(lp: StorageLp, solution: LpSolution) -> StorageDuals:
    z = solution.reduced_costs
    bound = {}
    for role, cols in ((BoundRole.CHARGE_MIN, lp.charge), (BoundRole.DISCHARGE_MIN, lp.discharge),
                       (BoundRole.SOC_MIN, lp.soc)):
        lower, upper = split_reduced_costs(z[cols])
        bound[role] = lower
        bound[role.partner] = upper
    return StorageDuals(balance=-solution.row_duals[lp.balance_rows], bound=bound)


def extract_schedule(lp: StorageLp, solution: LpSolution, owner: str) -> DispatchSchedule:
    x = solution.x
    return DispatchSchedule(
        owner=owner,
        charge=x[lp.charge].copy(),
        discharge=x[lp.discharge].copy(),
        soc=x[lp.soc].copy(),
        objective=solution.objective,
        duals=extract_duals(lp, solution),
    )
