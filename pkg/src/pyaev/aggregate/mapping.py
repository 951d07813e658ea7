"""
Weekly group mapping for scaling factors: step t belongs to group
tau = ((t + 24 * start_weekday) mod 168) // n, so group 0 always starts on a
Monday midnight and the mapping repeats every week.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from ..dispatch.storage import BOUND_ROLES, BoundRole
from ..errors import ConfigurationError
from ..event_bus import warn
from ..profiles import HOURS_PER_DAY, HOURS_PER_WEEK, TimeGrid

DEFAULT_MAPPINGS = (1, 2, 4, 6, 24)


def check_group_width(n: int) -> int:
    if int(n) != n or n < 1 or HOURS_PER_DAY % int(n):
        raise ConfigurationError(f"group width must divide 24, got {n}")
    return int(n)


def groups_per_week(n: int) -> int:
    return HOURS_PER_WEEK // check_group_width(n)


def mapping_index(t: Union[int, np.ndarray], n: int, start_weekday: int = 0) -> Union[int, np.ndarray]:
    """Group index of step t (0-based) for group width n"""
    n = check_group_width(n)
    if isinstance(t, np.ndarray):
        return ((t + HOURS_PER_DAY * start_weekday) % HOURS_PER_WEEK) // n
    return ((int(t) + HOURS_PER_DAY * start_weekday) % HOURS_PER_WEEK) // n


def step_groups(grid: TimeGrid, n: int) -> np.ndarray:
    return mapping_index(np.arange(grid.steps), n, grid.start_weekday)


@dataclass
class GroupCoverage:
    """How many steps of a grid fall in each weekly group"""
    group_width: int
    sizes: np.ndarray

    @property
    def empty(self) -> List[int]:
        return np.flatnonzero(self.sizes == 0).tolist()

    @property
    def underpopulated(self) -> List[int]:
        return np.flatnonzero(self.sizes == 1).tolist()

    @property
    def active(self) -> np.ndarray:
        return self.sizes > 0

    @property
    def empty_warning(self) -> Optional[str]:
        if not self.empty:
            return None
        return (f"{len(self.empty)} of {self.sizes.size} scaling groups (n={self.group_width}) "
                f"contain no step of the horizon")

    @property
    def single_step_warning(self) -> Optional[str]:
        if not self.underpopulated:
            return None
        return f"scaling groups {self.underpopulated} (n={self.group_width}) cover a single step"

    def warnings(self) -> List[str]:
        return [w for w in (self.empty_warning, self.single_step_warning) if w]


def group_coverage(grid: TimeGrid, n: int, announce: bool = False) -> GroupCoverage:
    coverage = GroupCoverage(n, np.bincount(step_groups(grid, n), minlength=groups_per_week(n)))
    if announce:
        if coverage.empty:
            warn(coverage.empty_warning, group_width=n, groups=coverage.empty)
        if coverage.underpopulated:
            warn(coverage.single_step_warning, group_width=n, groups=coverage.underpopulated)
    return coverage


def _factor_array(values, count: int, label: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).reshape(-1)
    if array.size != count:
        raise ConfigurationError(f"{label}: expected {count} factors, got {array.size}")
    if np.any(~np.isfinite(array)) or np.any(array < 0):
        raise ConfigurationError(f"{label}: factors must be finite and nonnegative")
    return array


@dataclass(frozen=True, eq=False)
class ScalingMap:
    """Nonnegative factors per bound role and weekly group of width `group_width` hours"""
    group_width: int
    factors: Dict[BoundRole, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = check_group_width(self.group_width)
        object.__setattr__(self, 'group_width', n)
        count = HOURS_PER_WEEK // n
        factors = {}
        for role in BOUND_ROLES:
            if role not in self.factors:
                raise ConfigurationError(f"scaling map lacks factors for {role}")
            factors[role] = _factor_array(self.factors[role], count, f"kappa[{role}]")
        object.__setattr__(self, 'factors', factors)

    @property
    def n_groups(self) -> int:
        return HOURS_PER_WEEK // self.group_width

    @classmethod
    def unit(cls, n: int) -> ScalingMap:
        return cls.constant(n, {role: 1.0 for role in BOUND_ROLES})

    @classmethod
    def constant(cls, n: int, values: Mapping[BoundRole, float]) -> ScalingMap:
        count = groups_per_week(n)
        return cls(n, {role: np.full(count, float(values.get(role, 1.0))) for role in BOUND_ROLES})

    def factor(self, role: BoundRole) -> np.ndarray:
        return self.factors[BoundRole(role)]

    def per_step(self, role: BoundRole, grid: TimeGrid) -> np.ndarray:
        return self.factor(role)[step_groups(grid, self.group_width)]

    def with_factor(self, role: BoundRole, values: np.ndarray) -> ScalingMap:
        factors = dict(self.factors)
        factors[BoundRole(role)] = np.asarray(values, dtype=float)
        return ScalingMap(self.group_width, factors)

    def refine(self, n: int) -> ScalingMap:
        """Equivalent map on a finer width n, which must divide group_width"""
        n = check_group_width(n)
        if self.group_width % n:
            raise ConfigurationError(f"width {n} does not refine width {self.group_width}")
        repeat = self.group_width // n
        return ScalingMap(n, {role: np.repeat(f, repeat) for role, f in self.factors.items()})

    def bounded(self, kappa_max: float) -> bool:
        return all(np.all(f <= kappa_max) for f in self.factors.values())

    def equals(self, other: ScalingMap) -> bool:
        return self.group_width == other.group_width and all(
            np.array_equal(self.factors[r], other.factors[r]) for r in BOUND_ROLES)

    def to_dict(self) -> Dict[str, object]:
        return {
            'group_width': self.group_width,
            'factors': {role.value: self.factors[role].tolist() for role in BOUND_ROLES},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object], n: Optional[int] = None) -> ScalingMap:
        try:
            factors = {BoundRole(k): v for k, v in dict(data['factors']).items()}
            return cls(int(data.get('group_width', n)), factors)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"malformed scaling map: {e}") from e
