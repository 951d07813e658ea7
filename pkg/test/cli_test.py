import json
import time

import pytest

from pyaev.cli.main import main
from pyaev.cli.pipeline import Pipeline
from pyaev.dispatch import read_reference_csv
from pyaev.errors import InfeasibleError, SolverLimitError
from pyaev.event_bus import read_events
from pyaev.lp_core import load_lp, load_mps
from pyaev.profiles import load_profiles_csv
from pyaev.signals import Signals

SMALL = ["--set", "grid.steps=24", "--set", "fleet.size=2", "--set", "run.mappings=[24]",
         "--set", "bilevel.node_limit=20", "--set", "bilevel.time_limit=60.0"]


def run(out, *args):
    main(["-o", str(out), *SMALL, *args])


def exit_code(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def test_gen_writes_inputs_and_caches(tmp_path, collector):
    run(tmp_path, "gen")
    fleet = load_profiles_csv(tmp_path / "fleet.csv")
    assert len(fleet) == 2 and fleet[0].grid.steps == 24
    assert (tmp_path / "prices.csv").exists()
    marker = json.loads((tmp_path / "stages" / "gen.done.json").read_text())
    assert marker['stage'] == "gen"
    assert json.loads((tmp_path / "manifest.json").read_text())['digest'] == marker['digest']

    run(tmp_path, "gen")
    cached = [e for e in collector.events if e.signal == Signals.STAGE_CACHED]
    assert [e.kwargs['stage'] for e in cached] == ["gen"]

    recorded = [e.signal for e in read_events(tmp_path / "events.jsonl")]
    assert Signals.STAGE_FINISHED in recorded and Signals.STAGE_CACHED in recorded
    first = read_events(tmp_path / "events.jsonl")[0]
    assert first.kwargs['digest'] == first.metadata['run']
    assert first.kwargs['stages']['gen'] == marker['digest']


def test_reference_stage_sums_the_fleet(tmp_path):
    run(tmp_path, "reference")
    reference = read_reference_csv(tmp_path / "reference.csv")
    assert reference.steps == 24
    assert reference.members == ("ev0000", "ev0001")
    assert (tmp_path / "schedules.csv").exists()
    assert (tmp_path / "stages" / "gen.done.json").exists()


def test_sa_and_export(tmp_path, capsys):
    run(tmp_path, "sa")
    assert (tmp_path / "sa_envelope.csv").exists()
    assert (tmp_path / "sa_schedule.csv").exists()

    run(tmp_path, "export", "--n", "24", "--format", "lp")
    path = tmp_path / "aev_n24.lp"
    assert str(path) in capsys.readouterr().out.splitlines()
    model = load_lp(path)
    assert model.has_integers and model.has_quadratic
    assert path.read_text().startswith("\\ pyaev digest=")

    run(tmp_path, "export", "--n", "24")
    assert load_mps(tmp_path / "aev_n24.mps").n_vars == model.n_vars
    stamp = (tmp_path / "aev_n24.mps").read_text().splitlines()[0]
    assert stamp == path.read_text().splitlines()[0].replace("\\", "*", 1)


def test_other_inputs_need_force(tmp_path):
    run(tmp_path, "gen")
    assert exit_code(["-o", str(tmp_path), *SMALL, "--set", "fleet.seed=9", "gen"]) == 2
    before = json.loads((tmp_path / "manifest.json").read_text())["digest"]
    run(tmp_path, "--force", "--set", "fleet.seed=9", "gen")
    assert json.loads((tmp_path / "manifest.json").read_text())["digest"] != before


def test_exit_codes(tmp_path):
    assert exit_code(["-o", str(tmp_path), "--set", "grid.weeks=2", "gen"]) == 2
    assert exit_code(["-c", str(tmp_path / "absent.toml"), "gen"]) == 2
    assert exit_code(["-o", str(tmp_path), *SMALL, "bilevel", "--n", "5"]) == 2

    broken = tmp_path / "broken.csv"
    broken.write_text("vehicle_id,t\nev0000,zero\n")
    out = tmp_path / "broken_run"
    assert exit_code(["-o", str(out), "--set", f"fleet.csv='{broken}'", "gen"]) == 5


def test_unknown_command_is_a_usage_error(tmp_path):
    assert exit_code(["-o", str(tmp_path), "plot"]) == 2


@pytest.mark.slow
def test_full_run(tmp_path):
    run(tmp_path, "full")
    report = json.loads((tmp_path / "report.json").read_text())
    names = [row['name'] for row in report['rows']]
    assert "sa" in names and "aev_n24" in names
    rows = {row['name']: row for row in report['rows']}
    assert all(row["rmse_charge"] >= 0 for row in rows.values())
    for kind in ("price_soc_charge", "scaling_factors", "envelopes"):
        assert (tmp_path / f"figure_{kind}.csv").exists()
    validation = json.loads((tmp_path / "aev_n24_validation.json").read_text())
    assert 'passed' in validation


def test_solver_failures_map_to_exit_codes(tmp_path, mocker, capsys):
    mocker.patch("pyaev.cli.pipeline.dispatch_fleet",
                 side_effect=InfeasibleError("vehicle ev0001 cannot reach its target", step=4))
    assert exit_code(["-o", str(tmp_path), *SMALL, "reference"]) == 3
    assert "first violating step 4" in capsys.readouterr().err
    assert not (tmp_path / "stages" / "reference.done.json").exists()

    mocker.patch.object(Pipeline, "bilevel", side_effect=SolverLimitError("aev_n24 stopped on its node limit"))
    assert exit_code(["-o", str(tmp_path), *SMALL, "bilevel", "--n", "24", "--strict"]) == 4


def test_failed_stage_resumes_from_cache(tmp_path, mocker, collector):
    patched = mocker.patch("pyaev.cli.pipeline.solve_aev",
                           side_effect=InfeasibleError("envelope leaves no feasible dispatch", step=2))
    assert exit_code(["-o", str(tmp_path), *SMALL, "sa"]) == 3
    assert (tmp_path / "stages" / "gen.done.json").exists()
    assert not (tmp_path / "stages" / "sa.done.json").exists()
    assert patched.called
    mocker.stopall()

    collector.event_history.clear()
    run(tmp_path, "sa")
    cached = [e.kwargs['stage'] for e in collector.events if e.signal == Signals.STAGE_CACHED]
    started = [e.kwargs['stage'] for e in collector.events if e.signal == Signals.STAGE_STARTED]
    assert set(cached) == {"gen"}
    assert started == ["sa"]

    collector.event_history.clear()
    run(tmp_path, "--set", "sa.charge_factor=0.8", "sa")
    cached = [e.kwargs['stage'] for e in collector.events if e.signal == Signals.STAGE_CACHED]
    started = [e.kwargs['stage'] for e in collector.events if e.signal == Signals.STAGE_STARTED]
    assert set(cached) == {"gen"}
    assert started == ["sa"]


DETERMINISTIC_OUTPUTS = ("fleet.csv", "fleet_params.csv", "prices.csv", "reference.csv", "schedules.csv",
                         "sa_envelope.csv", "sa_schedule.csv", "aev_n24_envelope.csv",
                         "aev_n24_schedule.csv", "report.csv", "figure_price_soc_charge.csv",
                         "figure_scaling_factors.csv", "figure_envelopes.csv")


def stage_digests(out):
    return {p.name: json.loads(p.read_text())['digest'] for p in (out / "stages").glob("*.done.json")}


@pytest.mark.slow
def test_full_run_is_reproducible(tmp_path, collector):
    first, second = tmp_path / "first", tmp_path / "second"
    run(first, "full")
    solves = [e for e in collector.events if e.signal == Signals.SOLVE_FINISHED]
    assert [e.kwargs['group_width'] for e in solves] == [24]
    started = [e.kwargs['stage'] for e in collector.events if e.signal == Signals.STAGE_STARTED]
    assert [s for s in started if s.startswith("bilevel")] == ["bilevel_n24"]

    run(second, "full")
    assert stage_digests(first) == stage_digests(second)
    for name in DETERMINISTIC_OUTPUTS:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name

    collector.event_history.clear()
    run(first, "full")
    assert not [e for e in collector.events if e.signal in (Signals.STAGE_STARTED, Signals.SOLVE_FINISHED)]


@pytest.mark.slow
def test_small_week_end_to_end(tmp_path):
    started = time.perf_counter()
    main(["-o", str(tmp_path), "--set", "grid.steps=48", "--set", "fleet.size=5",
          "--set", "run.mappings=[24, 6]", "--set", "bilevel.node_limit=50",
          "--set", "bilevel.time_limit=15.0", "full"])
    assert time.perf_counter() - started < 60.0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {row['name'] for row in report['rows']} >= {"sa", "aev_n24", "aev_n6"}
