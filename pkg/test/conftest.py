from __future__ import annotations

import numpy as np
import pytest

from pyaev.aggregate import sum_profiles
from pyaev.dispatch import build_reference, solve_individual
from pyaev.event_bus import EventCollector, events
from pyaev.profiles import EvParams, EvProfile, TimeGrid

UNIT_PARAMS = EvParams(rho=1.0, eta_c=1.0, eta_d=1.0)


def make_profile(vehicle_id="ev", charge_max=(1.0, 1.0, 1.0), soc_max=None, soc_min=None,
                 demand=None, params=UNIT_PARAMS, discharge_max=None, charge_min=None,
                 start_weekday=0) -> EvProfile:
    charge_max = np.asarray(charge_max, dtype=float)
    steps = charge_max.size
    zeros = np.zeros(steps)
    return EvProfile(
        vehicle_id=vehicle_id,
        grid=TimeGrid(steps, start_weekday),
        params=params,
        demand_drive=zeros if demand is None else np.asarray(demand, dtype=float),
        demand_thermal=zeros,
        charge_min=zeros if charge_min is None else np.asarray(charge_min, dtype=float),
        charge_max=charge_max,
        discharge_min=zeros,
        discharge_max=zeros if discharge_max is None else np.asarray(discharge_max, dtype=float),
        soc_min=zeros if soc_min is None else np.asarray(soc_min, dtype=float),
        soc_max=np.full(steps, 10.0) if soc_max is None else np.asarray(soc_max, dtype=float),
    )


# The small battery cannot hold its trip energy plus its final target, so it
# recharges at step 2; the summed unit fits everything into steps 0 and 1.
# Reference charge is [2, 1, 1, 0], the unit-factor dispatch [2, 2, 0, 0].
PAIR_PRICES = np.array([10.0, 20.0, 30.0, 40.0])


def pair_fleet():
    small = make_profile("small", charge_max=[1, 1, 1, 1], soc_max=[0, 1, 1, 1], demand=[0, 0, 1, 0],
                         params=EvParams(1.0, 1.0, 1.0, final_soc_target=1.0))
    large = make_profile("large", charge_max=[1, 1, 1, 1], soc_max=[0, 4, 4, 4],
                         params=EvParams(1.0, 1.0, 1.0, final_soc_target=2.0))
    return [small, large]


@pytest.fixture
def fleet_pair():
    return pair_fleet()


@pytest.fixture
def pair_case():
    fleet = pair_fleet()
    reference = build_reference([solve_individual(p, PAIR_PRICES) for p in fleet])
    return fleet, sum_profiles(fleet), reference, PAIR_PRICES


@pytest.fixture
def collector():
    recorder = EventCollector()
    events.forward_to(recorder)
    yield recorder
    events.remove_forwarding(recorder)
