import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyaev.aggregate import SaHeuristics, ScalingMap, simple_aggregation
from pyaev.bilevel import BnbStatus, solve_aev
from pyaev.dispatch import BoundRole, DispatchSchedule
from pyaev.errors import GridMismatchError, ReportError
from pyaev.eval import (
    REPORT_COLUMNS,
    Approach,
    FigureKind,
    deviation_rmse,
    emit_figure_data,
    emit_report,
    envelopes_frame,
    evaluate,
    price_soc_charge_frame,
    read_report,
    rmse,
    scaling_factors_frame,
)
from pyaev.tables import read_header, read_table

series = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30)


def test_rmse_example():
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(GridMismatchError):
        rmse([1, 2], [1])
    with pytest.raises(GridMismatchError):
        rmse([], [])


@settings(max_examples=60, deadline=None)
@given(data=st.data(), a=series)
def test_rmse_laws(data, a):
    b = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(a), max_size=len(a)))
    shift = data.draw(st.floats(-1e3, 1e3))
    k = data.draw(st.floats(-10, 10))
    a, b = np.array(a), np.array(b)
    assert rmse(a, a) == 0.0
    assert rmse(a, b) == pytest.approx(rmse(b, a))
    assert rmse(a + shift, b + shift) == pytest.approx(rmse(a, b), rel=1e-9, abs=1e-6)
    assert rmse(k * a, k * b) == pytest.approx(abs(k) * rmse(a, b), rel=1e-9, abs=1e-9)
    assert rmse(a, b) <= float(np.max(np.abs(a - b))) * (1 + 1e-12) + 1e-12


def approaches(pair_case):
    fleet, agg, reference, prices = pair_case
    sa = solve_aev(simple_aggregation(agg), agg, prices, owner="sa")
    capped = DispatchSchedule("aev_n24", [1.5, 1.5, 1.0, 0.0], np.zeros(4), [0.0, 1.5, 3.0, 3.0])
    solution = SimpleNamespace(status=BnbStatus.OPTIMAL, objective=0.5, best_bound=0.49, gap=0.01)
    return [Approach("sa", sa), Approach("aev_n24", capped, solution)]


def test_evaluate_rows(pair_case):
    _, _, reference, _ = pair_case
    report = evaluate(approaches(pair_case), reference, {'steps': 4})
    assert report.names == ["sa", "aev_n24"]
    sa = report.row("sa")
    # the summed unit charges [2, 2, 0, 0] against the reference [2, 1, 1, 0]
    assert sa.rmse_charge == pytest.approx(math.sqrt(0.5))
    assert sa.status is None and sa.objective is None
    aev = report.row("aev_n24")
    assert aev.rmse_charge == pytest.approx(math.sqrt(0.125))
    assert aev.status == "optimal" and aev.rel_gap == 0.01
    assert report.to_frame().columns.tolist() == list(REPORT_COLUMNS)
    with pytest.raises(KeyError):
        report.row("aev_n6")


def test_evaluate_rejects_duplicates_and_other_grids(pair_case):
    _, _, reference, _ = pair_case
    rows = approaches(pair_case)
    with pytest.raises(ReportError):
        evaluate(rows + [rows[0]], reference)
    short = DispatchSchedule("short", [1.0], [0.0], [0.0])
    with pytest.raises(GridMismatchError):
        evaluate([Approach("short", short)], reference)


def test_deviation_rmse_of_the_reference_is_zero(pair_case):
    _, _, reference, _ = pair_case
    assert deviation_rmse(reference.as_schedule(), reference) == {
        'rmse_charge': 0.0, 'rmse_discharge': 0.0, 'rmse_soc': 0.0}


@pytest.mark.parametrize("suffix", ["csv", "json"])
def test_report_round_trip(tmp_path, pair_case, suffix):
    _, _, reference, _ = pair_case
    report = evaluate(approaches(pair_case), reference, {'digest': 'abc', 'steps': 4, 'seed': 1})
    loaded = read_report(emit_report(report, tmp_path / f"report.{suffix}"))
    assert loaded.names == report.names
    for row in report.rows:
        again = loaded.row(row.name)
        for column in REPORT_COLUMNS[1:]:
            assert getattr(again, column) == getattr(row, column)
    if suffix == "csv":
        assert read_header(tmp_path / "report.csv")['digest'] == "abc"
        assert loaded.metadata['steps'] == "4"
    else:
        assert loaded.metadata == {'digest': 'abc', 'steps': 4, 'seed': 1}


def test_report_format_errors(tmp_path, pair_case):
    _, _, reference, _ = pair_case
    report = evaluate(approaches(pair_case), reference)
    with pytest.raises(ReportError):
        emit_report(report, tmp_path / "report.xlsx")
    path = tmp_path / "report.json"
    path.write_text('{"schema": 99, "rows": []}')
    with pytest.raises(ReportError):
        read_report(path)


def test_price_soc_charge_frame(pair_case):
    _, _, reference, prices = pair_case
    schedules = {a.name: a.schedule for a in approaches(pair_case)}
    frame = price_soc_charge_frame(prices, reference, schedules)
    assert set(frame['series']) == {'price', 'reference_charge', 'reference_soc', 'sa_charge',
                                    'sa_soc', 'aev_n24_charge', 'aev_n24_soc'}
    assert len(frame) == 7 * 4
    price = frame[frame['series'] == 'price']['value'].to_numpy()
    np.testing.assert_array_equal(price, prices)


def test_scaling_factors_frame():
    kappa = ScalingMap.constant(6, {BoundRole.CHARGE_MAX: 0.5})
    frame = scaling_factors_frame({'aev_n6': kappa})
    assert len(frame) == 6 * 28
    row = frame[(frame['role'] == 'charge_max') & (frame['tau'] == 5)].iloc[0]
    assert (row['weekday'], row['hour'], row['value']) == ('tue', 6, 0.5)


def test_envelopes_frame(pair_case):
    _, agg, reference, _ = pair_case
    envelope = simple_aggregation(agg, SaHeuristics(soc_max_factor=0.6))
    frame = envelopes_frame({'sa': envelope}, reference)
    np.testing.assert_allclose(frame['soc_max'], [0, 3, 3, 3])
    np.testing.assert_array_equal(frame['reference_charge'], reference.charge)
    with pytest.raises(ReportError):
        envelopes_frame({}, reference)


def test_emit_figure_data(tmp_path, pair_case):
    _, agg, reference, prices = pair_case
    path = emit_figure_data(FigureKind.ENVELOPES, tmp_path / "figure_envelopes.csv", digest="d",
                            envelopes={'sa': simple_aggregation(agg)}, reference=reference)
    frame, meta = read_table(path, ('mapping', 't'))
    assert meta == {'digest': 'd', 'kind': 'envelopes'}
    assert len(frame) == 4

    with pytest.raises(ReportError):
        emit_figure_data('price_soc_charge', tmp_path / "x.csv", prices=prices, reference=reference)
    with pytest.raises(ReportError):
        emit_figure_data('heatmap', tmp_path / "x.csv")
