"""Desk-scale runs on a seeded commuter fleet"""
import numpy as np
import pytest

from pyaev.aggregate import DEFAULT_MAPPINGS, apply_scaling, simple_aggregation, sum_profiles
from pyaev.bilevel import BilevelConfig, build_single_level, solve_aev, solve_bilevel
from pyaev.dispatch import BoundRole, build_reference, dispatch_fleet
from pyaev.eval import rmse
from pyaev.profiles import (
    HOURS_PER_WEEK,
    TimeGrid,
    UncontrolledMode,
    generate_commuter_fleet,
    generate_prices,
    uncontrolled_schedule,
)

GAP = 0.03


def simulate(profile, variant, anxiety, initial):
    """Plain loop over the charging rules, one vehicle at a time"""
    p = profile.params
    s = initial * profile.soc_max[0]
    latched = False
    charge, soc = [], []
    for t in range(profile.grid.steps):
        soc.append(s)
        plugged = profile.charge_max[t] > 0
        if variant == "direct":
            on = plugged and s < profile.soc_max[t]
        else:
            if not plugged:
                latched = False
            elif s < anxiety * profile.soc_max[t]:
                latched = True
            on = latched
        top = profile.soc_max[min(t + 1, profile.grid.steps - 1)]
        after = p.rho * s - profile.demand[t]
        c = min(profile.charge_max[t], max(0.0, (top - after) / p.eta_c)) if on else 0.0
        c = max(c, profile.charge_min[t])
        charge.append(c)
        s = after + p.eta_c * c
        if latched and s >= top - 1e-9 * max(1.0, top):
            latched = False
    return np.array(charge), np.array(soc)


@pytest.mark.parametrize("variant", ["direct", "low_soc"])
def test_uncontrolled_matches_plain_simulation(variant):
    grid = TimeGrid(HOURS_PER_WEEK, start_weekday=3)
    mode = UncontrolledMode(variant, anxiety_fraction=0.95, initial_soc_fraction=0.8)
    for profile in generate_commuter_fleet(31, 10, grid):
        schedule = uncontrolled_schedule(profile, mode)
        charge, soc = simulate(profile, variant, 0.95, 0.8)
        np.testing.assert_array_equal(schedule.charge, charge)
        np.testing.assert_array_equal(schedule.soc, soc)


@pytest.fixture(scope='module')
def week():
    grid = TimeGrid(HOURS_PER_WEEK)
    fleet = generate_commuter_fleet(1, 20, grid)
    prices = generate_prices(1, grid)
    schedules = dispatch_fleet(fleet, prices)
    assert all(s.duality.passed for s in schedules)
    reference = build_reference(schedules)
    agg = sum_profiles(fleet)
    sa = solve_aev(simple_aggregation(agg), agg, prices, owner="sa")
    return reference, agg, prices, sa


@pytest.fixture(scope='module')
def solved(week):
    reference, agg, prices, _ = week
    solutions = {}
    for n in DEFAULT_MAPPINGS[::-1]:
        cfg = BilevelConfig(group_width=n, gap=GAP, time_limit=300.0)
        seeds = [solutions[m] for m in solutions if m % n == 0]
        solutions[n] = solve_bilevel(build_single_level(reference, agg, cfg, prices), seeds=seeds)
    return solutions


@pytest.mark.slow
@pytest.mark.parametrize("n", [24, 6])
def test_fitted_factors_halve_the_charging_error(week, solved, n):
    reference, _, _, sa = week
    solution = solved[n]
    assert solution.has_incumbent
    assert solution.gap <= GAP
    fitted = rmse(solution.schedule.charge, reference.charge)
    assert fitted <= 0.5 * rmse(sa.charge, reference.charge)


@pytest.mark.slow
def test_finer_mappings_do_not_lose(solved):
    for coarse in DEFAULT_MAPPINGS:
        for fine in DEFAULT_MAPPINGS:
            if fine < coarse and coarse % fine == 0:
                assert solved[fine].objective <= solved[coarse].objective * (1 + 2 * GAP)


@pytest.mark.slow
def test_day_factors_are_sane(week, solved):
    _, agg, _, _ = week
    solution = solved[24]
    kappa_max = BilevelConfig().kappa_max
    for role in BoundRole:
        factors = solution.kappa.factor(role)
        assert np.all(factors >= 0) and np.all(factors <= kappa_max)
    assert np.any(solution.kappa.factor(BoundRole.CHARGE_MAX) < 1)
    rebuilt = apply_scaling(agg, solution.kappa, solution.soc_min_source)
    assert rebuilt.equals(solution.envelope)
