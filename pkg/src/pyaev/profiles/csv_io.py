"""
Fleet CSV: one row per (vehicle_id, t) with the eight profile series, plus a
`<stem>_params.csv` sidecar holding per-vehicle parameters and grid.
Row numbers in parse errors count data rows from 1.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, ProfileParseError
from ..tables import read_table, write_table
from .types import SERIES_FIELDS, VEHICLE_ID, EvParams, EvProfile, TimeGrid

logger = logging.getLogger('pyaev.profiles')

PROFILE_COLUMNS = ('vehicle_id', 't') + SERIES_FIELDS
PARAM_COLUMNS = ('vehicle_id', 'rho', 'eta_c', 'eta_d', 'final_soc_target', 'start_weekday', 'steps')


def params_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_params.csv")


def write_profiles_csv(fleet: Sequence[EvProfile], path: Union[str, Path],
                       digest: Optional[str] = None) -> Path:
    frames = []
    for profile in fleet:
        frame = pd.DataFrame({name: getattr(profile, name) for name in SERIES_FIELDS})
        frame.insert(0, 't', np.arange(profile.grid.steps))
        frame.insert(0, 'vehicle_id', profile.vehicle_id)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=PROFILE_COLUMNS)
    params = pd.DataFrame([{
        'vehicle_id': p.vehicle_id,
        'rho': p.params.rho,
        'eta_c': p.params.eta_c,
        'eta_d': p.params.eta_d,
        'final_soc_target': p.params.final_soc_target,
        'start_weekday': p.grid.start_weekday,
        'steps': p.grid.steps,
    } for p in fleet], columns=PARAM_COLUMNS)
    write_table(params, params_path(path), digest)
    return write_table(table, path, digest)


def _read_params(path: Path) -> Optional[Dict[str, dict]]:
    sidecar = params_path(path)
    if not sidecar.exists():
        return None
    frame, _ = read_table(sidecar, PARAM_COLUMNS, dtype={'vehicle_id': str})
    return {row['vehicle_id']: row for row in frame.to_dict('records')}


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ProfileParseError("value is not a finite number", row=int(bad[0]) + 1, column=column)
    return values


def _profile(vehicle: str, rows: pd.DataFrame, params: Optional[dict]) -> EvProfile:
    t = rows['t'].to_numpy()
    if not np.array_equal(t, np.arange(t.size)):
        raise ProfileParseError(f"vehicle '{vehicle}': steps must run 0..T-1 without gaps",
                                row=int(rows.index[0]) + 1, column='t')
    series = {name: rows[name].to_numpy(dtype=float) for name in SERIES_FIELDS}

    for name, values in series.items():
        negative = np.flatnonzero(values < 0)
        if negative.size:
            k = int(negative[0])
            raise ProfileParseError(f"vehicle '{vehicle}': negative value at step {k}",
                                    row=int(rows.index[k]) + 1, column=name)
    for quantity in ('charge', 'discharge', 'soc'):
        crossed = np.flatnonzero(series[f"{quantity}_min"] > series[f"{quantity}_max"])
        if crossed.size:
            k = int(crossed[0])
            raise ProfileParseError(
                f"vehicle '{vehicle}': {quantity}_min exceeds {quantity}_max at step {k}",
                row=int(rows.index[k]) + 1, column=f"{quantity}_min")

    if params is None:
        grid, ev = TimeGrid(t.size), EvParams()
    else:
        if int(params['steps']) != t.size:
            raise ProfileParseError(f"vehicle '{vehicle}': {t.size} rows but the parameters "
                                    f"declare {int(params['steps'])} steps",
                                    row=int(rows.index[-1]) + 1, column='t')
        try:
            grid = TimeGrid(int(params['steps']), int(params['start_weekday']))
            ev = EvParams(float(params['rho']), float(params['eta_c']), float(params['eta_d']),
                          float(params['final_soc_target']))
        except ConfigurationError as e:
            raise ProfileParseError(f"vehicle '{vehicle}' parameters: {e.message}") from e
    return EvProfile(vehicle, grid, ev, **series)


def load_profiles_csv(path: Union[str, Path]) -> List[EvProfile]:
    """One profile per vehicle id, in order of first appearance"""
    path = Path(path)
    frame, _ = read_table(path, PROFILE_COLUMNS, dtype={'vehicle_id': str})
    ids = frame['vehicle_id'].fillna("").map(lambda v: VEHICLE_ID.fullmatch(v) is not None)
    bad = np.flatnonzero(~ids.to_numpy(dtype=bool))
    if bad.size:
        raise ProfileParseError("vehicle id is empty or holds whitespace, commas, '#' or quotes",
                                row=int(bad[0]) + 1, column='vehicle_id')
    for column in ('t',) + SERIES_FIELDS:
        frame[column] = _numeric(frame, column)
    frame['t'] = frame['t'].astype(np.int64)

    params = _read_params(path)
    if params is None:
        logger.warning("%s: no parameter sidecar, using default vehicle parameters", path.name)

    fleet = []
    lengths = set()
    for vehicle, rows in frame.groupby('vehicle_id', sort=False):
        if params is not None and vehicle not in params:
            raise ProfileParseError(f"vehicle '{vehicle}' is missing from {params_path(path).name}",
                                    row=int(rows.index[0]) + 1, column='vehicle_id')
        profile = _profile(vehicle, rows.sort_values('t', kind='stable'),
                           None if params is None else params[vehicle])
        lengths.add(profile.grid.steps)
        if len(lengths) > 1:
            raise ProfileParseError(f"vehicle '{vehicle}' has {profile.grid.steps} steps, "
                                    f"other vehicles {sorted(lengths - {profile.grid.steps})}",
                                    row=int(rows.index[0]) + 1, column='t')
        fleet.append(profile)
    if not fleet:
        raise ProfileParseError(f"{path.name} contains no vehicles")
    return fleet
