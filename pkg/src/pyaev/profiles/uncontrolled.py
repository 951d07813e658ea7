from __future__ import annotations

from typing import Optional

import numpy as np

from ..dispatch.schedule import DispatchSchedule
from ..errors import InfeasibleError
from .types import EvProfile, UncontrolledMode, UncontrolledVariant

SOC_TOL = 1e-9


def _outside(value: float, lower: float, upper: float) -> bool:
    slack = SOC_TOL * max(1.0, abs(lower), abs(upper))
    return value < lower - slack or value > upper + slack


def uncontrolled_schedule(profile: EvProfile, mode: Optional[UncontrolledMode] = None,
                          prices=None) -> DispatchSchedule:
    """
    Step-forward simulation of rule-based charging. The charging decision at
    step t uses the SOC at the start of t; the amount fills the battery up to
    the next step's soc_max without exceeding charge_max. Discharge is zero.
    """
    mode = mode or UncontrolledMode()
    p = profile.params
    steps = profile.grid.steps
    demand = profile.demand
    charge = np.zeros(steps)
    soc = np.zeros(steps)

    s = mode.initial_soc_fraction * profile.soc_max[0]
    latched = False
    for t in range(steps):
        soc[t] = s
        if _outside(s, profile.soc_min[t], profile.soc_max[t]):
            raise InfeasibleError(f"uncontrolled charging of '{profile.vehicle_id}' leaves the SOC range",
                                  step=t)
        plugged = profile.charge_max[t] > 0
        match mode.variant:
            case UncontrolledVariant.DIRECT:
                wants = plugged and s < profile.soc_max[t]
            case UncontrolledVariant.LOW_SOC:
                if not plugged:
                    latched = False
                elif s < mode.anxiety_fraction * profile.soc_max[t]:
                    latched = True
                wants = latched

        cap = profile.soc_max[t + 1] if t + 1 < steps else profile.soc_max[t]
        drift = p.rho * s - demand[t]
        amount = min(profile.charge_max[t], max(0.0, (cap - drift) / p.eta_c)) if wants else 0.0
        charge[t] = max(amount, profile.charge_min[t])
        s = drift + p.eta_c * charge[t]
        if latched and s >= cap - SOC_TOL * max(1.0, cap):
            latched = False

    if s < profile.soc_min[-1] - SOC_TOL * max(1.0, profile.soc_min[-1]):
        raise InfeasibleError(f"uncontrolled charging of '{profile.vehicle_id}' ends below soc_min",
                              step=steps - 1)

    objective = None
    if prices is not None:
        objective = float(np.asarray(getattr(prices, 'values', prices)) @ charge)
    return DispatchSchedule(profile.vehicle_id, charge, np.zeros(steps), soc, objective=objective)
