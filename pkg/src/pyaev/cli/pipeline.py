"""
Stage runner behind the command line.

Stages write their outputs into one directory and finish by writing
`stages/<stage>.done.json` with the digest of the config sections they depend
on. A stage whose marker digest matches and whose outputs all exist is
skipped. The directory's `manifest.json` records the digest of the input
data; a directory made from other data is refused unless forced.
"""
from __future__ import annotations

import json
import logging
import shutil
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence

from ..aggregate import (
    AevEnvelope,
    AggregateProfile,
    ScalingMap,
    read_envelope_csv,
    simple_aggregation,
    sum_profiles,
    write_envelope_csv,
)
from ..bilevel import (
    BilevelSolution,
    BnbStatus,
    big_m_reformulate,
    build_single_level,
    read_solution_json,
    solve_aev,
    solve_bilevel,
    validate_solution,
    write_solution_json,
)
from ..config import STAGE_SECTIONS, AnchorMode, ExportFormat, RunConfig, SolverPath
from ..dispatch import (
    Anchor,
    DispatchSchedule,
    FleetReference,
    build_reference,
    dispatch_fleet,
    read_reference_csv,
    read_schedules_csv,
    write_reference_csv,
    write_schedules_csv,
)
from ..errors import ConfigurationError, InfeasibleError, ReportError, SolverLimitError
from ..eval import Approach, FigureKind, emit_figure_data, emit_report, evaluate
from ..event_bus import EventRecorder, broadcast, event_context, events, log, warn
from ..lp_core import export_model
from ..profiles import (
    EvProfile,
    PriceSeries,
    generate_commuter_fleet,
    generate_prices,
    load_prices_csv,
    load_profiles_csv,
    params_path,
    uncontrolled_schedule,
    write_prices_csv,
    write_profiles_csv,
)
from ..signals import Signals

logger = logging.getLogger('pyaev.cli')

MANIFEST = "manifest.json"
STAGE_DIR = "stages"


def aev_name(n: int) -> str:
    return f"aev_n{n}"


class Pipeline:
    def __init__(self, cfg: RunConfig, force: bool = False):
        self.cfg = cfg
        self.force = force
        self.out = cfg.output_dir
        self._fleet: Optional[List[EvProfile]] = None
        self._prices: Optional[PriceSeries] = None
        self._agg: Optional[AggregateProfile] = None

    # -- files -------------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out / name

    @property
    def fleet_path(self) -> Path:
        return self.path("fleet.csv")

    @property
    def prices_path(self) -> Path:
        return self.path("prices.csv")

    def solution_path(self, n: int) -> Path:
        return self.path(f"{aev_name(n)}_solution.json")

    def _marker(self, stage: str) -> Path:
        return self.out / STAGE_DIR / f"{stage}.done.json"

    def check_directory(self):
        """Claim the output directory for this run's input data"""
        manifest = self.path(MANIFEST)
        digest = self.cfg.stage_digest('gen')
        if manifest.exists():
            try:
                recorded = json.loads(manifest.read_text(encoding='utf-8')).get('digest')
            except (OSError, json.JSONDecodeError) as e:
                raise ReportError(f"unreadable {manifest}: {e}") from e
            if recorded != digest:
                if not self.force:
                    raise ConfigurationError(
                        f"{self.out} holds results of other input data (digest {recorded}, "
                        f"this run {digest}); use --force or another output directory")
                warn(f"discarding cached stages made from digest {recorded}", directory=str(self.out))
                shutil.rmtree(self.out / STAGE_DIR, ignore_errors=True)
        self.out.mkdir(parents=True, exist_ok=True)
        manifest.write_text(json.dumps({'digest': digest, 'config': self.cfg.digest()}, indent=2) + "\n",
                            encoding='utf-8')

    @contextmanager
    def recording(self) -> Iterator[EventRecorder]:
        """Append every event of the run to events.jsonl"""
        self.out.mkdir(parents=True, exist_ok=True)
        recorder = EventRecorder(self.path("events.jsonl"))
        events.forward_to(recorder)
        try:
            with event_context(run=self.cfg.digest()):
                log(f"recording run {self.cfg.digest()}", digest=self.cfg.digest(),
                    stages={stage: self.cfg.stage_digest(stage) for stage in STAGE_SECTIONS})
                yield recorder
        finally:
            events.remove_forwarding(recorder)
            recorder.close()

    # -- stage bookkeeping -------------------------------------------------

    def cached(self, stage: str, digest: str, outputs: Sequence[Path]) -> bool:
        marker = self._marker(stage)
        if self.force or not marker.exists():
            return False
        try:
            recorded = json.loads(marker.read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError):
            return False
        return recorded.get('digest') == digest and all(Path(p).exists() for p in outputs)

    def run_stage(self, stage: str, digest: str, outputs: Sequence[Path], produce: Callable[[], None]):
        if self.cached(stage, digest, outputs):
            broadcast(Signals.STAGE_CACHED, stage=stage, digest=digest)
            return
        broadcast(Signals.STAGE_STARTED, stage=stage, digest=digest)
        started = datetime.now(timezone.utc)
        produce()
        marker = self._marker(stage)
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(json.dumps({
            'stage': stage,
            'digest': digest,
            'outputs': [str(Path(p).name) for p in outputs],
            'started': started.isoformat(),
            'finished': datetime.now(timezone.utc).isoformat(),
        }, indent=2) + "\n", encoding='utf-8')
        broadcast(Signals.STAGE_FINISHED, stage=stage, digest=digest)

    # -- inputs ------------------------------------------------------------

    @property
    def fleet(self) -> List[EvProfile]:
        if self._fleet is None:
            self.gen()
            self._fleet = load_profiles_csv(self.fleet_path)
        return self._fleet

    @property
    def prices(self) -> PriceSeries:
        if self._prices is None:
            self.gen()
            self._prices = load_prices_csv(self.prices_path, self.fleet[0].grid)
        return self._prices

    @property
    def agg(self) -> AggregateProfile:
        if self._agg is None:
            self._agg = sum_profiles(self.fleet, self.cfg.fleet.param_rule)
        return self._agg

    def reference_data(self) -> FleetReference:
        self.reference()
        return read_reference_csv(self.path("reference.csv"))

    # -- stages ------------------------------------------------------------

    def gen(self):
        cfg = self.cfg
        digest = cfg.stage_digest('gen')

        def produce():
            if cfg.fleet.csv:
                fleet = load_profiles_csv(cfg.fleet.csv)
                if fleet and fleet[0].grid != cfg.grid:
                    log(f"fleet file runs on {fleet[0].grid}; it overrides [grid]", path=cfg.fleet.csv)
            else:
                fleet = generate_commuter_fleet(cfg.fleet.seed, cfg.fleet.size, cfg.grid, cfg.fleet_spec,
                                                threads=cfg.run.threads or 1)
            grid = fleet[0].grid
            if cfg.prices.csv:
                prices = load_prices_csv(cfg.prices.csv, grid)
            else:
                prices = generate_prices(cfg.prices.seed, grid, cfg.price_spec)
            write_profiles_csv(fleet, self.fleet_path, digest)
            write_prices_csv(prices, self.prices_path, digest)
            log(f"fleet of {len(fleet)} vehicles over {grid.steps} steps", vehicles=len(fleet), steps=grid.steps)

        self.run_stage('gen', digest, [self.fleet_path, params_path(self.fleet_path), self.prices_path], produce)

    def reference(self):
        cfg = self.cfg
        digest = cfg.stage_digest('reference')
        outputs = [self.path("reference.csv"), self.path("schedules.csv")]

        def produce():
            fleet, prices = self.fleet, self.prices
            uncontrolled = self._uncontrolled(fleet, prices, digest)
            anchors = None
            if cfg.anchor.mode == AnchorMode.UNCONTROLLED:
                anchors = [Anchor.from_schedule(cfg.anchor.weight, s) for s in uncontrolled]
            schedules = dispatch_fleet(fleet, prices, anchors, cfg.tolerances, cfg.threads)
            failed = [s.owner for s in schedules if s.duality is not None and not s.duality.passed]
            if failed:
                warn(f"{len(failed)} dispatch certificates failed the duality check", vehicles=failed[:10])
            reference = build_reference(schedules)
            write_schedules_csv(schedules, outputs[1], digest)
            write_reference_csv(reference, outputs[0], digest)
            log(f"reference cost {reference.objective:.6g}", objective=reference.objective)

        self.run_stage('reference', digest, outputs, produce)

    def _uncontrolled(self, fleet: Sequence[EvProfile], prices: PriceSeries,
                      digest: str) -> Optional[List[DispatchSchedule]]:
        schedules = []
        for profile in fleet:
            try:
                schedules.append(uncontrolled_schedule(profile, self.cfg.uncontrolled, prices))
            except InfeasibleError as e:
                if self.cfg.anchor.mode == AnchorMode.UNCONTROLLED:
                    raise
                warn(f"uncontrolled charging of {profile.vehicle_id} fails: {e.message}",
                     vehicle=profile.vehicle_id)
                self.path("uncontrolled.csv").unlink(missing_ok=True)
                return None
        write_schedules_csv(schedules, self.path("uncontrolled.csv"), digest)
        return schedules

    def sa(self):
        cfg = self.cfg
        digest = cfg.stage_digest('sa')
        outputs = [self.path("sa_envelope.csv"), self.path("sa_schedule.csv")]

        def produce():
            envelope = simple_aggregation(self.agg, cfg.sa, cfg.bilevel.soc_min_source)
            crossed = envelope.crossed_steps()
            for quantity, steps in crossed.items():
                warn(f"SA {quantity} bounds cross at steps {steps[:5]}", quantity=quantity)
            schedule = solve_aev(envelope, self.agg, self.prices, owner="sa", tol=cfg.tolerances)
            write_envelope_csv(envelope, outputs[0], digest)
            write_schedules_csv([schedule], outputs[1], digest)

        self.run_stage('sa', digest, outputs, produce)

    def _seeds(self, n: int) -> List[object]:
        seeds: List[object] = [ScalingMap.constant(24, self.cfg.sa.factors())]
        for m in self.cfg.run.mappings:
            if m > n and m % n == 0 and self.solution_path(m).exists():
                solution = read_solution_json(self.solution_path(m))
                if solution.has_incumbent:
                    seeds.append(solution)
        return seeds

    def bilevel_digest(self, n: int) -> str:
        sections = ('grid', 'fleet', 'prices', 'uncontrolled', 'anchor', 'tolerances', 'bilevel', 'sa')
        return f"{self.cfg.digest(sections)}-n{n}"

    def bilevel(self, n: int, strict: bool = False) -> Optional[BilevelSolution]:
        cfg = self.cfg
        bcfg = cfg.bilevel_for(n)
        name = aev_name(n)
        digest = self.bilevel_digest(n)

        if cfg.run.solver == SolverPath.EXPORT_ONLY:
            self.export(n, cfg.run.export_format)
            return None

        outputs = [self.solution_path(n), self.path(f"{name}_envelope.csv"),
                   self.path(f"{name}_schedule.csv"), self.path(f"{name}_validation.json")]

        def produce():
            reference = self.reference_data()
            slm = build_single_level(reference, self.agg, bcfg, self.prices)
            with event_context(group_width=n):
                solution = solve_bilevel(slm, seeds=self._seeds(n), tol=cfg.tolerances)
                report = validate_solution(slm, solution, reference, cfg.tolerances)
            write_solution_json(solution, outputs[0], digest)
            if solution.has_incumbent:
                write_envelope_csv(solution.envelope, outputs[1], digest)
                write_schedules_csv([solution.schedule], outputs[2], digest)
            else:
                write_schedules_csv([], outputs[2], digest)
                write_envelope_csv(AevEnvelope.zeros(self.agg.grid.steps), outputs[1], digest)
            self.path(f"{name}_validation.json").write_text(
                json.dumps({'digest': digest, **report.to_dict()}, indent=2) + "\n", encoding='utf-8')
            log(f"{name}: {solution.status}, objective {solution.objective:.6g}, gap {solution.gap:.3%}",
                **solution.summary())
            if not report.passed:
                warn(f"{name} validation: {'; '.join(report.issues)}", group_width=n)

        self.run_stage(f"bilevel_n{n}", digest, outputs, produce)
        solution = read_solution_json(self.solution_path(n))
        if strict:
            validation = json.loads(self.path(f"{name}_validation.json").read_text(encoding='utf-8'))
            if solution.status != BnbStatus.OPTIMAL:
                raise SolverLimitError(f"{name} stopped with status {solution.status}, gap {solution.gap:.3%}")
            if not validation.get('passed'):
                raise SolverLimitError(f"{name} failed validation: {'; '.join(validation.get('issues', []))}")
        return solution

    def export(self, n: int, fmt: ExportFormat = ExportFormat.MPS) -> Path:
        reference = self.reference_data()
        slm = big_m_reformulate(build_single_level(reference, self.agg, self.cfg.bilevel_for(n), self.prices))
        fmt = ExportFormat(fmt)
        path = self.path(f"{aev_name(n)}.{fmt.value}")
        path.write_text(export_model(slm.model, fmt.value, self.bilevel_digest(n)), encoding='utf-8')
        log(f"wrote {path.name}", variables=slm.model.n_vars, rows=slm.model.n_rows)
        return path

    def evaluate(self):
        cfg = self.cfg
        digest = cfg.stage_digest('evaluate')
        outputs = [self.path("report.csv"), self.path("report.json")] + [
            self.path(f"figure_{kind.value}.csv") for kind in FigureKind]

        def produce():
            reference = self.reference_data()
            self.sa()
            approaches = [Approach("sa", read_schedules_csv(self.path("sa_schedule.csv"))[0])]
            envelopes: Dict[str, object] = {"sa": read_envelope_csv(self.path("sa_envelope.csv"))}
            maps: Dict[str, ScalingMap] = {}
            uncontrolled = self.path("uncontrolled.csv")
            if uncontrolled.exists():
                approaches.insert(0, Approach("uncontrolled", build_reference(
                    read_schedules_csv(uncontrolled)).as_schedule("uncontrolled")))
            for n in cfg.run.mappings:
                solution = self.bilevel(n)
                if solution is None or not solution.has_incumbent:
                    warn(f"{aev_name(n)} has no incumbent and is left out of the report", group_width=n)
                    continue
                approaches.append(Approach(aev_name(n), solution.schedule, solution))
                envelopes[aev_name(n)] = solution.envelope
                maps[aev_name(n)] = solution.kappa

            metadata = {
                'digest': digest,
                'steps': reference.steps,
                'fleet_size': len(reference.members),
                'seed': cfg.fleet.seed,
                'start_weekday': self.agg.grid.start_weekday,
            }
            report = evaluate(approaches, reference, metadata)
            emit_report(report, outputs[0])
            emit_report(report, outputs[1])
            schedules = {a.name: a.schedule for a in approaches}
            emit_figure_data(FigureKind.PRICE_SOC_CHARGE, outputs[2], digest,
                             prices=self.prices, reference=reference, schedules=schedules)
            emit_figure_data(FigureKind.SCALING_FACTORS, outputs[3], digest, maps=maps)
            emit_figure_data(FigureKind.ENVELOPES, outputs[4], digest, envelopes=envelopes, reference=reference)
            for row in report.rows:
                log(f"{row.name}: rmse charge {row.rmse_charge:.4g}, discharge {row.rmse_discharge:.4g}, "
                    f"soc {row.rmse_soc:.4g}", approach=row.name)

        self.run_stage('evaluate', digest, outputs, produce)

    def full(self):
        self.gen()
        self.reference()
        self.sa()
        for n in self.cfg.run.mappings:
            self.bilevel(n)
        if self.cfg.run.solver == SolverPath.INTERNAL:
            self.evaluate()
