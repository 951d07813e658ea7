import numpy as np
import pandas as pd
import pytest

from pyaev.errors import ConfigurationError, GridMismatchError, InfeasibleError, ProfileParseError, ReportError
from pyaev.profiles import (
    HOURS_PER_WEEK,
    EvParams,
    FleetGenSpec,
    PriceGenSpec,
    TimeGrid,
    UncontrolledMode,
    generate_commuter_fleet,
    generate_prices,
    load_prices_csv,
    load_profiles_csv,
    params_path,
    uncontrolled_schedule,
    validate_profile,
    write_prices_csv,
    write_profiles_csv,
)
from pyaev.tables import format_header, read_header, read_table, write_table

from conftest import make_profile


def test_time_grid_calendar():
    grid = TimeGrid(48, start_weekday=4)
    assert grid.weekdays[0] == 4 and grid.weekdays[24] == 5
    assert not grid.weekend[23] and grid.weekend[24]
    assert grid.hours[25] == 1
    with pytest.raises(ConfigurationError):
        TimeGrid(0)
    with pytest.raises(ConfigurationError):
        TimeGrid(24, start_weekday=7)


def test_profile_rejects_wrong_length():
    with pytest.raises(GridMismatchError):
        make_profile(charge_max=[1, 1, 1], demand=[0, 0])


def test_ev_params_ranges():
    with pytest.raises(ConfigurationError):
        EvParams(eta_c=0.0)
    with pytest.raises(ConfigurationError):
        EvParams(rho=1.2)
    with pytest.raises(ConfigurationError):
        EvParams(final_soc_target=-1.0)


def test_generated_fleet_is_deterministic():
    grid = TimeGrid(HOURS_PER_WEEK)
    first = generate_commuter_fleet(7, 3, grid)
    again = generate_commuter_fleet(7, 3, grid, threads=2)
    assert all(a.equals(b) for a, b in zip(first, again))
    other = generate_commuter_fleet(8, 3, grid)
    assert not all(a.equals(b) for a, b in zip(first, other))
    assert [p.vehicle_id for p in first] == ["ev0000", "ev0001", "ev0002"]


def test_generated_vehicles_are_consistent():
    spec = FleetGenSpec()
    for profile in generate_commuter_fleet(3, 4, TimeGrid(HOURS_PER_WEEK, start_weekday=2), spec):
        weekly = profile.demand_drive.sum()
        assert spec.weekly_drive_kwh[0] * 1e-3 - 1e-12 <= weekly <= spec.weekly_drive_kwh[1] * 1e-3 + 1e-12
        assert np.all(profile.charge_max[profile.driving] == 0)
        assert np.all(profile.discharge_max == 0)
        assert profile.capacity >= spec.battery_kwh[0] * 1e-3
        assert profile.params.final_soc_target == pytest.approx(spec.final_soc_fraction * profile.capacity)
        assert validate_profile(profile).passed


def test_v2g_fleet_can_discharge_at_home():
    fleet = generate_commuter_fleet(1, 2, TimeGrid(48), FleetGenSpec(v2g=True))
    for profile in fleet:
        np.testing.assert_array_equal(profile.discharge_max, profile.charge_max)


def test_fleet_spec_ranges():
    with pytest.raises(ConfigurationError):
        FleetGenSpec(charger_kw=(22.0,))
    with pytest.raises(ConfigurationError):
        FleetGenSpec(departure_hour=18.0, arrival_hour=8.0)
    with pytest.raises(ConfigurationError):
        generate_commuter_fleet(0, 0, TimeGrid(24))


def test_prices_are_seeded_and_floored():
    grid = TimeGrid(72, start_weekday=5)
    spec = PriceGenSpec(floor=60.0)
    a, b = generate_prices(11, grid, spec), generate_prices(11, grid, spec)
    assert a.equals(b)
    assert np.all(a.values >= 60.0)
    calm = generate_prices(11, grid, PriceGenSpec(noise_std=0.0, daily_amplitude=0.0))
    assert calm.values[0] == pytest.approx(80.0 * 0.8)
    assert calm.values[48] == pytest.approx(80.0)


def test_profiles_csv_reload(tmp_path, fleet_pair):
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv", digest="d1")
    assert params_path(path).exists()
    assert read_header(path)['digest'] == "d1"
    loaded = load_profiles_csv(path)
    assert len(loaded) == 2
    assert all(a.equals(b) for a, b in zip(fleet_pair, loaded))


def test_generated_fleet_csv_reload(tmp_path):
    fleet = generate_commuter_fleet(5, 2, TimeGrid(48, start_weekday=3))
    loaded = load_profiles_csv(write_profiles_csv(fleet, tmp_path / "fleet.csv"))
    assert all(a.equals(b) for a, b in zip(fleet, loaded))


def test_prices_csv_reload(tmp_path):
    prices = generate_prices(2, TimeGrid(30, start_weekday=6))
    loaded = load_prices_csv(write_prices_csv(prices, tmp_path / "prices.csv"))
    assert loaded.equals(prices)
    shorter = load_prices_csv(tmp_path / "prices.csv", TimeGrid(24, start_weekday=6))
    np.testing.assert_array_equal(shorter.values, prices.values[:24])
    with pytest.raises(ProfileParseError):
        load_prices_csv(tmp_path / "prices.csv", TimeGrid(31))


def _corrupt(path, row, column, value):
    lines = path.read_text().splitlines()
    header_at = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    columns = lines[header_at].split(",")
    cells = lines[header_at + row].split(",")
    cells[columns.index(column)] = value
    lines[header_at + row] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")


def test_parse_error_names_row_and_column(tmp_path, fleet_pair):
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    _corrupt(path, 3, 'soc_max', "abc")
    with pytest.raises(ProfileParseError) as info:
        load_profiles_csv(path)
    assert info.value.row == 3
    assert info.value.column == 'soc_max'
    assert info.value.exit_code == 5


def test_price_parse_error_counts_rows_like_the_fleet_loader(tmp_path):
    path = write_prices_csv(generate_prices(1, TimeGrid(24)), tmp_path / "prices.csv")
    _corrupt(path, 3, 'price_eur_mwh', "abc")
    with pytest.raises(ProfileParseError) as info:
        load_prices_csv(path)
    assert (info.value.row, info.value.column) == (3, 'price_eur_mwh')
    assert "step 2" in str(info.value)


def test_parse_error_on_negative_and_crossed_values(tmp_path, fleet_pair):
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    _corrupt(path, 6, 'charge_max', "-1")
    with pytest.raises(ProfileParseError) as info:
        load_profiles_csv(path)
    assert (info.value.row, info.value.column) == (6, 'charge_max')

    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    _corrupt(path, 2, 'soc_min', "5")
    with pytest.raises(ProfileParseError) as info:
        load_profiles_csv(path)
    assert (info.value.row, info.value.column) == (2, 'soc_min')


def test_missing_column_and_missing_file(tmp_path, fleet_pair):
    with pytest.raises(ProfileParseError):
        load_profiles_csv(tmp_path / "absent.csv")
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    text = path.read_text().replace("soc_max", "soc_cap")
    path.write_text(text)
    with pytest.raises(ProfileParseError) as info:
        load_profiles_csv(path)
    assert info.value.column == 'soc_max'


def test_missing_sidecar_uses_default_parameters(tmp_path, fleet_pair):
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    params_path(path).unlink()
    loaded = load_profiles_csv(path)
    assert loaded[0].params == EvParams()
    np.testing.assert_array_equal(loaded[1].soc_max, fleet_pair[1].soc_max)


def commuter():
    # plugged in except at step 2, where it drives
    return make_profile("c", charge_max=[1, 1, 0, 1], soc_max=[3, 3, 3, 3], demand=[0, 0, 1, 0])


def test_direct_uncontrolled_charging():
    schedule = uncontrolled_schedule(commuter(), UncontrolledMode(initial_soc_fraction=1 / 3),
                                     prices=[1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(schedule.charge, [1, 1, 0, 1])
    np.testing.assert_allclose(schedule.soc, [1, 2, 3, 2])
    np.testing.assert_allclose(schedule.discharge, 0.0)
    assert schedule.objective == pytest.approx(7.0)


def test_low_soc_uncontrolled_charging_waits():
    mode = UncontrolledMode('low_soc', anxiety_fraction=0.2, initial_soc_fraction=1 / 3)
    schedule = uncontrolled_schedule(commuter(), mode)
    np.testing.assert_allclose(schedule.charge, [0, 0, 0, 1])
    np.testing.assert_allclose(schedule.soc, [1, 1, 1, 0])
    assert schedule.objective is None


def test_uncontrolled_charging_can_run_empty():
    profile = make_profile("c", charge_max=[1, 1, 0, 1], soc_max=[3, 3, 3, 3], demand=[0, 0, 2, 0])
    mode = UncontrolledMode('low_soc', anxiety_fraction=0.2, initial_soc_fraction=1 / 3)
    with pytest.raises(InfeasibleError) as info:
        uncontrolled_schedule(profile, mode)
    assert info.value.step == 3


def test_uncontrolled_mode_rejects_unknown_variant():
    with pytest.raises(ConfigurationError):
        UncontrolledMode('eager')


def test_validate_profile_reports_every_problem():
    assert validate_profile(commuter()).passed

    driving_plugged = make_profile("d", charge_max=[1, 1, 1], demand=[0, 1, 0])
    result = validate_profile(driving_plugged)
    assert not result.passed and not result.feasible
    assert any("while driving" in v for v in result.violations)

    crossed = make_profile("x", soc_min=[0, 5, 0], soc_max=[3, 3, 3])
    assert any("soc_min exceeds soc_max" in v for v in validate_profile(crossed).violations)

    starved = make_profile("s", charge_max=[0, 0, 0], soc_max=[0, 3, 3],
                           params=EvParams(1.0, 1.0, 1.0, final_soc_target=1.0))
    result = validate_profile(starved)
    assert result.violations == ["demand cannot be met within the charging and SOC limits"]


@pytest.mark.parametrize("vehicle_id", ["ev 1", "ev,1", "ev#1", 'ev"1', ""])
def test_vehicle_ids_must_survive_the_table_format(vehicle_id):
    with pytest.raises(ConfigurationError):
        make_profile(vehicle_id)


def test_fleet_file_rejects_ids_it_cannot_round_trip(tmp_path, fleet_pair):
    path = write_profiles_csv(fleet_pair, tmp_path / "fleet.csv")
    _corrupt(path, 2, 'vehicle_id', '"small#2"')
    with pytest.raises(ProfileParseError) as info:
        load_profiles_csv(path)
    assert (info.value.row, info.value.column) == (2, 'vehicle_id')


def test_hash_inside_a_cell_is_data(tmp_path):
    path = write_table(pd.DataFrame({'note': ["a#b", "c"], 'value': [1.0, 2.0]}), tmp_path / "notes.csv",
                       digest="abc", kind="notes")
    frame, meta = read_table(path, ('note', 'value'))
    assert frame['note'].tolist() == ["a#b", "c"]
    assert meta == {'digest': "abc", 'kind': "notes"}
    with pytest.raises(ReportError):
        format_header("abc", members="a b")
