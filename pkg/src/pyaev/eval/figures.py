"""Tidy tables for plotting; no rendering happens here"""
from __future__ import annotations

from enum import StrEnum
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd

from ..aggregate import ScalingMap
from ..dispatch import BOUND_ROLES, DispatchSchedule, FleetReference, StorageBounds, price_array
from ..errors import GridMismatchError, ReportError
from ..profiles import HOURS_PER_DAY, WEEKDAY_NAMES
from ..tables import write_table


class FigureKind(StrEnum):
    PRICE_SOC_CHARGE = "price_soc_charge"
    SCALING_FACTORS = "scaling_factors"
    ENVELOPES = "envelopes"


REQUIRED_INPUTS = {
    FigureKind.PRICE_SOC_CHARGE: ('prices', 'reference', 'schedules'),
    FigureKind.SCALING_FACTORS: ('maps',),
    FigureKind.ENVELOPES: ('envelopes', 'reference'),
}


def price_soc_charge_frame(prices, reference: FleetReference,
                           schedules: Mapping[str, DispatchSchedule]) -> pd.DataFrame:
    """Long table (t, series, value): price, the reference and every approach's charge and SOC"""
    steps = reference.steps
    series = {
        'price': price_array(prices, steps),
        'reference_charge': reference.charge,
        'reference_soc': reference.soc,
    }
    for name, schedule in schedules.items():
        if schedule.steps != steps:
            raise GridMismatchError(f"schedule '{name}' has {schedule.steps} steps, reference {steps}")
        series[f"{name}_charge"] = schedule.charge
        series[f"{name}_soc"] = schedule.soc
    return pd.concat([
        pd.DataFrame({'t': np.arange(steps), 'series': label, 'value': values})
        for label, values in series.items()
    ], ignore_index=True)


def scaling_factors_frame(maps: Mapping[str, ScalingMap]) -> pd.DataFrame:
    frames = []
    for mapping, kappa in maps.items():
        n = kappa.group_width
        tau = np.arange(kappa.n_groups)
        start = tau * n
        for role in BOUND_ROLES:
            frames.append(pd.DataFrame({
                'mapping': mapping,
                'group_width': n,
                'role': role.value,
                'tau': tau,
                'weekday': [WEEKDAY_NAMES[h // HOURS_PER_DAY] for h in start],
                'hour': start % HOURS_PER_DAY,
                'value': kappa.factor(role),
            }))
    if not frames:
        return pd.DataFrame(columns=['mapping', 'group_width', 'role', 'tau', 'weekday', 'hour', 'value'])
    return pd.concat(frames, ignore_index=True)


def envelopes_frame(envelopes: Mapping[str, StorageBounds], reference: FleetReference) -> pd.DataFrame:
    """Per-mapping bound series with the reference trajectory alongside"""
    frames = []
    for mapping, envelope in envelopes.items():
        if envelope.steps != reference.steps:
            raise GridMismatchError(f"envelope '{mapping}' has {envelope.steps} steps, reference {reference.steps}")
        frame = pd.DataFrame({role.value: envelope.role(role) for role in BOUND_ROLES})
        frame.insert(0, 't', np.arange(envelope.steps))
        frame.insert(0, 'mapping', mapping)
        frame['reference_charge'] = reference.charge
        frame['reference_discharge'] = reference.discharge
        frame['reference_soc'] = reference.soc
        frames.append(frame)
    if not frames:
        raise ReportError("envelope figure data needs at least one envelope")
    return pd.concat(frames, ignore_index=True)


def emit_figure_data(kind: Union[str, FigureKind], path: Union[str, Path],
                     digest: Optional[str] = None, **inputs) -> Path:
    try:
        kind = FigureKind(kind)
    except ValueError:
        raise ReportError(f"unknown figure kind '{kind}'") from None
    missing = [name for name in REQUIRED_INPUTS[kind] if inputs.get(name) is None]
    if missing:
        raise ReportError(f"figure data '{kind}' lacks inputs: {', '.join(missing)}")

    match kind:
        case FigureKind.PRICE_SOC_CHARGE:
            frame = price_soc_charge_frame(inputs['prices'], inputs['reference'], inputs['schedules'])
        case FigureKind.SCALING_FACTORS:
            frame = scaling_factors_frame(inputs['maps'])
        case FigureKind.ENVELOPES:
            frame = envelopes_frame(inputs['envelopes'], inputs['reference'])
    return write_table(frame, path, digest, kind=kind.value)
