import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyaev.aggregate import (
    DEFAULT_MAPPINGS,
    AevEnvelope,
    AggregationParamRule,
    SaHeuristics,
    ScalingMap,
    SocMinSource,
    apply_scaling,
    check_group_width,
    group_coverage,
    groups_per_week,
    mapping_index,
    read_envelope_csv,
    simple_aggregation,
    step_groups,
    sum_profiles,
    write_envelope_csv,
)
from pyaev.dispatch import BOUND_ROLES, BoundRole
from pyaev.errors import ConfigurationError, GridMismatchError
from pyaev.profiles import EvParams, TimeGrid
from pyaev.signals import Signals

from conftest import make_profile


def test_mapping_index_examples():
    assert mapping_index(25, 2) == 12
    assert mapping_index(0, 24, start_weekday=2) == 2
    assert mapping_index(168, 1) == 0
    assert mapping_index(23, 24, start_weekday=6) == 6
    assert mapping_index(24, 24, start_weekday=6) == 0


@pytest.mark.parametrize("n", DEFAULT_MAPPINGS)
def test_mapping_index_repeats_weekly(n):
    for weekday in range(7):
        t = np.arange(2 * 168)
        tau = mapping_index(t, n, weekday)
        assert tau.min() == 0 and tau.max() == groups_per_week(n) - 1
        np.testing.assert_array_equal(tau[:168], tau[168:])
        for step in (0, 5, 23, 24, 100, 167):
            assert mapping_index(step, n, weekday) == tau[step]
        # groups only step forward by one, except where the week wraps around
        step = np.diff(tau)
        wraps = (t[1:] + 24 * weekday) % 168 == 0
        assert np.all((step[~wraps] == 0) | (step[~wraps] == 1))
        assert np.all(tau[1:][wraps] == 0)


def test_group_width_must_divide_a_day():
    for n in (5, 7, 48, 0):
        with pytest.raises(ConfigurationError):
            check_group_width(n)
    assert groups_per_week(6) == 28


def test_step_groups_follow_the_grid():
    grid = TimeGrid(30, start_weekday=1)
    np.testing.assert_array_equal(step_groups(grid, 24)[[0, 23, 24, 29]], [1, 1, 2, 2])


def test_group_coverage_warns_on_sparse_horizons(collector):
    coverage = group_coverage(TimeGrid(25), 24, announce=True)
    assert coverage.sizes.tolist() == [24, 1, 0, 0, 0, 0, 0]
    assert coverage.empty == [2, 3, 4, 5, 6]
    assert coverage.underpopulated == [1]
    warnings = [e for e in collector.events if e.signal == Signals.WARNING]
    assert len(warnings) == 2
    assert warnings[1].kwargs['groups'] == [1]
    assert [w.args[0] for w in warnings] == coverage.warnings()
    assert coverage.warnings() == ["5 of 7 scaling groups (n=24) contain no step of the horizon",
                                   "scaling groups [1] (n=24) cover a single step"]

    quiet = group_coverage(TimeGrid(168), 6, announce=True)
    assert quiet.active.all()


def test_scaling_map_construction():
    unit = ScalingMap.unit(24)
    assert unit.n_groups == 7
    assert all(np.all(unit.factor(role) == 1.0) for role in BOUND_ROLES)
    sa = ScalingMap.constant(6, {BoundRole.CHARGE_MAX: 0.5})
    assert sa.factor('charge_max').tolist() == [0.5] * 28
    assert sa.factor(BoundRole.SOC_MAX).tolist() == [1.0] * 28
    assert sa.bounded(1.0) and not sa.with_factor(BoundRole.SOC_MAX, np.full(28, 2.5)).bounded(2.0)

    with pytest.raises(ConfigurationError):
        ScalingMap(24, {role: np.ones(6) for role in BOUND_ROLES})
    with pytest.raises(ConfigurationError):
        ScalingMap(24, {role: -np.ones(7) for role in BOUND_ROLES})
    with pytest.raises(ConfigurationError):
        ScalingMap(24, {BoundRole.CHARGE_MAX: np.ones(7)})


def test_refine_keeps_the_per_step_factors():
    coarse = ScalingMap.unit(24).with_factor(BoundRole.CHARGE_MAX, np.arange(7) / 7)
    fine = coarse.refine(6)
    assert fine.group_width == 6
    grid = TimeGrid(200, start_weekday=3)
    for role in BOUND_ROLES:
        np.testing.assert_array_equal(fine.per_step(role, grid), coarse.per_step(role, grid))
    assert coarse.refine(24).equals(coarse)
    with pytest.raises(ConfigurationError):
        fine.refine(4)


def test_scaling_map_dict_round_trip():
    kappa = ScalingMap.constant(12, {BoundRole.SOC_MIN: 0.25, BoundRole.SOC_MAX: 1.5})
    again = ScalingMap.from_dict(kappa.to_dict())
    assert again.equals(kappa)
    assert ScalingMap.from_dict({'factors': kappa.to_dict()['factors']}, n=12).equals(kappa)
    with pytest.raises(ConfigurationError):
        ScalingMap.from_dict({'group_width': 12, 'factors': {'charge_cap': [1.0]}})


def test_sum_profiles(fleet_pair):
    agg = sum_profiles(fleet_pair)
    np.testing.assert_array_equal(agg.role(BoundRole.SOC_MAX), [0, 5, 5, 5])
    np.testing.assert_array_equal(agg.role(BoundRole.CHARGE_MAX), [2, 2, 2, 2])
    np.testing.assert_array_equal(agg.demand, [0, 0, 1, 0])
    assert agg.params.final_soc_target == 3.0
    assert agg.params.rho == 1.0
    assert agg.size == 2


def test_parameter_rules():
    a = make_profile("a", soc_max=[1, 1, 1], params=EvParams(1.0, 0.9, 0.9))
    b = make_profile("b", soc_max=[3, 3, 3], params=EvParams(1.0, 0.8, 0.8))
    weighted = sum_profiles([a, b])
    assert weighted.params.eta_c == pytest.approx(0.825)
    plain = sum_profiles([a, b], AggregationParamRule.MEAN)
    assert plain.params.eta_d == pytest.approx(0.85)
    assert plain.param_rule == AggregationParamRule.MEAN


def test_sum_profiles_rejects_bad_fleets():
    with pytest.raises(ConfigurationError):
        sum_profiles([])
    with pytest.raises(GridMismatchError):
        sum_profiles([make_profile("a"), make_profile("b", start_weekday=1)])


def test_apply_scaling_and_soc_min_source(fleet_pair):
    agg = sum_profiles(fleet_pair)
    kappa = ScalingMap.constant(24, {BoundRole.CHARGE_MAX: 0.75, BoundRole.SOC_MIN: 0.1})
    envelope = apply_scaling(agg, kappa)
    np.testing.assert_allclose(envelope.charge_max, [1.5] * 4)
    np.testing.assert_array_equal(envelope.soc_min, [0, 0, 0, 0])
    from_capacity = apply_scaling(agg, kappa, SocMinSource.SOC_MAX)
    np.testing.assert_allclose(from_capacity.soc_min, [0, 0.5, 0.5, 0.5])
    assert envelope.source == "aev"


@settings(max_examples=40, deadline=None)
@given(factors=st.lists(st.floats(0.0, 2.0), min_size=7, max_size=7),
       c=st.floats(0.0, 3.0))
def test_scaling_is_homogeneous(factors, c):
    agg = sum_profiles([make_profile("a", charge_max=np.linspace(0, 1, 48), soc_max=np.full(48, 2.0)),
                        make_profile("b", charge_max=np.full(48, 0.5), soc_max=np.full(48, 3.0))])
    base = ScalingMap.unit(24).with_factor(BoundRole.CHARGE_MAX, factors)
    scaled = base.with_factor(BoundRole.CHARGE_MAX, c * np.asarray(factors))
    np.testing.assert_allclose(apply_scaling(agg, scaled).charge_max,
                               c * apply_scaling(agg, base).charge_max, rtol=1e-12, atol=1e-15)


def test_simple_aggregation(fleet_pair):
    agg = sum_profiles(fleet_pair)
    envelope = simple_aggregation(agg, SaHeuristics(charge_factor=0.5, soc_max_factor=0.8))
    assert envelope.source == "sa"
    np.testing.assert_allclose(envelope.charge_max, [1.0] * 4)
    np.testing.assert_allclose(envelope.soc_max, [0, 4, 4, 4])
    np.testing.assert_array_equal(envelope.charge_min, agg.role(BoundRole.CHARGE_MIN))
    unit = simple_aggregation(agg)
    assert unit.equals(agg.bounds)
    with pytest.raises(ConfigurationError):
        SaHeuristics(charge_factor=-0.1)


def test_envelope_file_round_trip(tmp_path, fleet_pair):
    envelope = simple_aggregation(sum_profiles(fleet_pair), SaHeuristics(soc_max_factor=0.7))
    loaded = read_envelope_csv(write_envelope_csv(envelope, tmp_path / "sa_envelope.csv", "d"))
    assert loaded.equals(envelope)
    assert loaded.source == "sa"
    assert AevEnvelope.zeros(3).source == "aev"
