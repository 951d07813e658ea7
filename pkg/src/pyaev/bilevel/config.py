from __future__ import annotations

from dataclasses import dataclass, replace
from enum import StrEnum
from typing import Optional

from ..aggregate import SocMinSource, check_group_width
from ..errors import ConfigurationError


class ObjectiveNorm(StrEnum):
    L2 = "l2"
    L1 = "l1"


@dataclass(frozen=True)
class BilevelConfig:
    """
    Outer deviation weights, mapping width, big-M policy and search limits.

    M_primal for a pair is primal_headroom * kappa_max * (summed upper bound of
    its quantity at that step); M_dual is max|price| * (1 + 1/eta_d) *
    dual_headroom. big_m_primal / big_m_dual replace the derived values with
    a constant when set.

    node_batch open nodes are taken per round and pruned against the incumbent
    of the round before; threads only sets how many of them solve at once.
    """
    gamma_charge: float = 1.0
    gamma_discharge: float = 0.0
    gamma_soc: float = 0.0
    group_width: int = 24
    kappa_max: float = 2.0
    primal_headroom: float = 1.1
    dual_headroom: float = 2.0
    big_m_primal: Optional[float] = None
    big_m_dual: Optional[float] = None
    gap: float = 0.01
    node_limit: int = 500
    time_limit: float = 600.0
    soc_min_source: SocMinSource = SocMinSource.SOC_MIN
    objective_norm: ObjectiveNorm = ObjectiveNorm.L2
    threads: int = 0
    node_batch: int = 4
    search_evaluations: int = 300
    polish_rounds: int = 5

    def __post_init__(self):
        gammas = (self.gamma_charge, self.gamma_discharge, self.gamma_soc)
        if any(g < 0 for g in gammas) or not any(g > 0 for g in gammas):
            raise ConfigurationError("bilevel deviation weights must be >= 0 with at least one > 0")
        check_group_width(self.group_width)
        if not self.kappa_max >= 1.0:
            raise ConfigurationError(f"bilevel.kappa_max must be at least 1, got {self.kappa_max}")
        if self.primal_headroom < 1.0 or self.dual_headroom < 1.0:
            raise ConfigurationError("bilevel big-M headrooms must be at least 1")
        for name in ('big_m_primal', 'big_m_dual'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"bilevel.{name} must be positive, got {value}")
        if not 0.0 < self.gap < 1.0:
            raise ConfigurationError(f"bilevel.gap must lie in (0, 1), got {self.gap}")
        if self.node_limit < 1 or not self.time_limit > 0:
            raise ConfigurationError("bilevel node and time limits must be positive")
        if self.node_batch < 1:
            raise ConfigurationError(f"bilevel.node_batch must be at least 1, got {self.node_batch}")
        if self.threads < 0 or self.search_evaluations < 0 or self.polish_rounds < 0:
            raise ConfigurationError("bilevel threads, search_evaluations and polish_rounds must be >= 0")
        try:
            object.__setattr__(self, 'soc_min_source', SocMinSource(self.soc_min_source))
            object.__setattr__(self, 'objective_norm', ObjectiveNorm(self.objective_norm))
        except ValueError as e:
            raise ConfigurationError(str(e)) from None

    @property
    def gammas(self) -> dict:
        return {'charge': self.gamma_charge, 'discharge': self.gamma_discharge, 'soc': self.gamma_soc}

    def with_group_width(self, n: int) -> BilevelConfig:
        return replace(self, group_width=n)
