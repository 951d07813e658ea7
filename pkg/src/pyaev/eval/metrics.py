from __future__ import annotations

from typing import Dict

import numpy as np

from ..dispatch import DispatchSchedule, FleetReference
from ..errors import GridMismatchError


def rmse(a, b) -> float:
    """Root mean squared difference of two equally long series"""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size:
        raise GridMismatchError(f"rmse of series with {a.size} and {b.size} values")
    if a.size == 0:
        raise GridMismatchError("rmse of empty series")
    diff = a - b
    return float(np.sqrt(np.mean(diff * diff)))


def deviation_rmse(schedule: DispatchSchedule, reference: FleetReference) -> Dict[str, float]:
    return {
        'rmse_charge': rmse(schedule.charge, reference.charge),
        'rmse_discharge': rmse(schedule.discharge, reference.discharge),
        'rmse_soc': rmse(schedule.soc, reference.soc),
    }
