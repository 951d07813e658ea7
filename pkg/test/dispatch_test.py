import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyaev.dispatch import (
    Anchor,
    BoundRole,
    StorageBounds,
    build_reference,
    check_schedule,
    dispatch_fleet,
    read_reference_csv,
    read_schedules_csv,
    solve_individual,
    write_reference_csv,
    write_schedules_csv,
)
from pyaev.errors import ConfigurationError, GridMismatchError, InfeasibleError
from pyaev.profiles import EvParams
from pyaev.signals import Signals

from conftest import PAIR_PRICES, make_profile, pair_fleet

LATTICE = np.arange(0, 5) * 0.25


def brute_force_cost(charge_max, soc_max, demand, target, prices):
    """Grid search over c0, c1 with c2 fixed by the terminal balance; s0 = 0"""
    grid = np.round(np.arange(0, 101) * 0.01, 2)
    c0, c1 = np.meshgrid(grid, grid, indexing='ij')
    s1 = c0 - demand[0]
    s2 = s1 + c1 - demand[1]
    c2 = target - s2 + demand[2]
    eps = 1e-9
    ok = ((c0 <= charge_max[0] + eps) & (c1 <= charge_max[1] + eps)
          & (c2 >= -eps) & (c2 <= charge_max[2] + eps)
          & (s1 >= -eps) & (s1 <= soc_max[1] + eps)
          & (s2 >= -eps) & (s2 <= soc_max[2] + eps))
    if not ok.any():
        return None
    cost = prices[0] * c0 + prices[1] * c1 + prices[2] * c2
    return float(cost[ok].min())


def test_dispatch_matches_brute_force():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(25):
        charge_max = rng.choice(LATTICE, 3)
        soc_max = np.concatenate([[0.0], rng.choice(LATTICE[1:] * 2, 2)])
        demand = np.array([0.0, *rng.choice(LATTICE[:3], 2)])
        target = float(rng.choice(LATTICE))
        prices = rng.uniform(5.0, 50.0, 3)
        profile = make_profile("oracle", charge_max=charge_max, soc_max=soc_max, demand=demand,
                               params=EvParams(1.0, 1.0, 1.0, final_soc_target=target))

        expected = brute_force_cost(charge_max, soc_max, demand, target, prices)
        if expected is None:
            with pytest.raises(InfeasibleError):
                solve_individual(profile, prices)
            continue
        schedule = solve_individual(profile, prices)
        assert schedule.objective == pytest.approx(expected, abs=1e-3)
        assert schedule.duality.passed, schedule.duality.issues
        assert check_schedule(schedule, profile.bounds, profile.params, profile.demand).passed
        checked += 1
    assert checked > 0


def test_pair_individual_dispatch(fleet_pair):
    small, large = (solve_individual(p, PAIR_PRICES) for p in fleet_pair)
    np.testing.assert_allclose(small.charge, [1, 0, 1, 0], atol=1e-9)
    np.testing.assert_allclose(small.soc, [0, 1, 1, 1], atol=1e-9)
    assert small.objective == pytest.approx(40.0)
    np.testing.assert_allclose(large.charge, [1, 1, 0, 0], atol=1e-9)
    assert large.objective == pytest.approx(30.0)

    reference = build_reference([small, large])
    np.testing.assert_allclose(reference.charge, [2, 1, 1, 0], atol=1e-9)
    np.testing.assert_allclose(reference.soc, [0, 2, 3, 3], atol=1e-9)
    assert reference.objective == pytest.approx(70.0)
    assert reference.members == ("small", "large")


def test_duals_price_the_marginal_step():
    # c0 sits on its cap and c1 is interior, so both balance rows cost the step-1 price
    profile = make_profile("m", charge_max=[1, 2], soc_max=[0, 10],
                           params=EvParams(1.0, 1.0, 1.0, final_soc_target=1.5))
    schedule = solve_individual(profile, [10.0, 20.0])
    np.testing.assert_allclose(schedule.charge, [1.0, 0.5], atol=1e-9)
    np.testing.assert_allclose(schedule.duals.balance, [20.0, 20.0], atol=1e-7)
    np.testing.assert_allclose(schedule.duals.mu(BoundRole.CHARGE_MAX), [10.0, 0.0], atol=1e-7)
    np.testing.assert_allclose(schedule.duals.mu(BoundRole.CHARGE_MIN), [0.0, 0.0], atol=1e-7)
    for role in BoundRole:
        assert np.all(schedule.duals.mu(role) >= 0)


def test_infeasible_dispatch_names_the_step():
    profile = make_profile("x", charge_max=[1, 1, 1, 1], soc_min=[0, 0, 5, 0], soc_max=[3, 3, 3, 3])
    with pytest.raises(InfeasibleError) as info:
        solve_individual(profile, PAIR_PRICES)
    assert info.value.step == 2
    assert info.value.exit_code == 3


def test_anchor_pulls_towards_trajectory(fleet_pair):
    large = fleet_pair[1]
    anchored = solve_individual(large, PAIR_PRICES, Anchor(1e3, [0.0, 0.0, 1.0, 1.0]))
    np.testing.assert_allclose(anchored.charge, [0, 0, 1, 1], atol=0.05)
    assert anchored.charge.sum() == pytest.approx(2.0, abs=1e-5)

    free = solve_individual(large, PAIR_PRICES, Anchor(0.0, np.zeros(4)))
    np.testing.assert_allclose(free.charge, [1, 1, 0, 0], atol=1e-9)

    with pytest.raises(GridMismatchError):
        solve_individual(large, PAIR_PRICES, Anchor(1.0, np.zeros(3)))
    with pytest.raises(ConfigurationError):
        Anchor(-1.0, np.zeros(4))


def test_check_schedule_flags_violations(fleet_pair):
    small = fleet_pair[0]
    schedule = solve_individual(small, PAIR_PRICES)
    schedule.charge[2] = 0.0
    check = check_schedule(schedule, small.bounds, small.params, small.demand)
    assert not check.passed
    assert check.first_step == 2
    assert check.max_violation == pytest.approx(1.0)

    schedule.soc[1] = 2.0
    check = check_schedule(schedule, small.bounds, small.params, small.demand, terminal=False)
    assert 1 in check.violating_steps
    assert any(issue.startswith("soc_max") for issue in check.issues)


def test_fleet_dispatch_is_ordered_and_announced(fleet_pair, collector):
    serial = dispatch_fleet(fleet_pair, PAIR_PRICES, threads=1)
    threaded = dispatch_fleet(fleet_pair, PAIR_PRICES, threads=2)
    assert [s.owner for s in threaded] == ["small", "large"]
    for a, b in zip(serial, threaded):
        np.testing.assert_allclose(a.charge, b.charge)
    announced = [e for e in collector.events if e.signal == Signals.VEHICLE_DISPATCHED]
    assert sorted(e.args[0] for e in announced) == ["large", "large", "small", "small"]
    with pytest.raises(ConfigurationError):
        dispatch_fleet(fleet_pair, PAIR_PRICES, anchors=[Anchor(1.0, np.zeros(4))])


def test_reference_and_schedule_files(tmp_path, pair_case):
    fleet, _, reference, _ = pair_case
    loaded = read_reference_csv(write_reference_csv(reference, tmp_path / "reference.csv", digest="abc"))
    np.testing.assert_array_equal(loaded.charge, reference.charge)
    np.testing.assert_array_equal(loaded.soc, reference.soc)
    assert loaded.objective == reference.objective
    assert loaded.members == reference.members

    schedules = [solve_individual(p, PAIR_PRICES) for p in fleet]
    again = read_schedules_csv(write_schedules_csv(schedules, tmp_path / "schedules.csv"))
    assert [s.owner for s in again] == ["small", "large"]
    np.testing.assert_array_equal(again[1].charge, schedules[1].charge)


def test_reference_rejects_mixed_grids():
    a = solve_individual(make_profile("a", charge_max=[1, 1]), [1.0, 2.0])
    b = solve_individual(make_profile("b", charge_max=[1, 1, 1]), [1.0, 2.0, 3.0])
    with pytest.raises(GridMismatchError):
        build_reference([a, b])
    with pytest.raises(ConfigurationError):
        build_reference([])


def test_storage_bounds_helpers():
    bounds = StorageBounds([0, 2], [1, 1], [0, 0], [0, 0], [0, 0], [1, 1])
    assert bounds.crossed_steps() == {'charge': [1]}
    assert StorageBounds.zeros(2).steps == 2
    with pytest.raises(GridMismatchError):
        StorageBounds([0], [1, 1], [0, 0], [0, 0], [0, 0], [1, 1])


@settings(max_examples=20, deadline=None)
@given(shift=st.floats(0.0, 200.0))
def test_price_shift_keeps_the_charged_energy(shift):
    for profile in pair_fleet():
        base = solve_individual(profile, PAIR_PRICES)
        shifted = solve_individual(profile, PAIR_PRICES + shift)
        assert shifted.charge.sum() == pytest.approx(base.charge.sum(), abs=1e-7)
        assert shifted.objective == pytest.approx(base.objective + shift * base.charge.sum(), abs=1e-6)
