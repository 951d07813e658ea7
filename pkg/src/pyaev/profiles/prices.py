from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..errors import ProfileParseError
from ..tables import read_table, write_table
from .types import HOURS_PER_DAY, PriceGenSpec, PriceSeries, TimeGrid

PRICE_COLUMNS = ('t', 'price_eur_mwh')


def generate_prices(seed: int, grid: TimeGrid, spec: Optional[PriceGenSpec] = None) -> PriceSeries:
    """Half-day sinusoid peaking at peak_hour and peak_hour + 12, lowered on weekends"""
    spec = spec or PriceGenSpec()
    rng = np.random.default_rng(seed)
    hours = grid.hours.astype(float)
    level = np.where(grid.weekend, spec.base * spec.weekend_factor, spec.base)
    daily = spec.daily_amplitude * np.cos(2.0 * np.pi * (hours - spec.peak_hour) / (HOURS_PER_DAY / 2))
    noise = rng.normal(0.0, spec.noise_std, grid.steps) if spec.noise_std > 0 else 0.0
    return PriceSeries(grid, np.maximum(level + daily + noise, spec.floor))


def write_prices_csv(prices: PriceSeries, path: Union[str, Path], digest: Optional[str] = None) -> Path:
    frame = pd.DataFrame({'t': np.arange(prices.grid.steps), 'price_eur_mwh': prices.values})
    return write_table(frame, path, digest, start_weekday=prices.grid.start_weekday)


def load_prices_csv(path: Union[str, Path], grid: Optional[TimeGrid] = None) -> PriceSeries:
    frame, meta = read_table(path, PRICE_COLUMNS)
    frame = frame.sort_values('t', kind='stable')
    if not np.array_equal(frame['t'].to_numpy(), np.arange(len(frame))):
        raise ProfileParseError(f"{Path(path).name}: steps must run 0..T-1 without gaps", column='t')
    values = pd.to_numeric(frame['price_eur_mwh'], errors='coerce').to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ProfileParseError(f"{Path(path).name}: price is not a number at step {bad[0]}",
                                row=int(frame.index[bad[0]]) + 1, column='price_eur_mwh')
    if grid is None:
        grid = TimeGrid(len(values), int(meta.get('start_weekday', 0)))
    elif grid.steps > len(values):
        raise ProfileParseError(f"{Path(path).name}: {len(values)} prices for a {grid.steps}-step grid")
    return PriceSeries(grid, values[:grid.steps])
