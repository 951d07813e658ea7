from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ..aggregate import apply_scaling
from ..dispatch import FleetReference, check_schedule
from ..event_bus import broadcast, warn
from ..lp_core import DEFAULT_TOLERANCES, ToleranceConfig
from ..signals import Signals
from .bigm import big_m_activity, big_m_reformulate
from .heuristics import assemble_point
from .inner import try_inner
from .kkt import SingleLevelModel, outer_objective
from .solution import BilevelSolution

INNER_TOL = 1e-6
M_MARGIN = 1e-4


@dataclass
class ValidationReport:
    issues: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    m_activity: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.issues

    def fail(self, check: str, message: str):
        self.checks[check] = False
        self.issues.append(message)

    def to_dict(self) -> Dict[str, object]:
        return {
            'passed': self.passed,
            'checks': dict(self.checks),
            'issues': list(self.issues),
            'warnings': list(self.warnings),
            'm_activity': dict(self.m_activity),
        }


def _check_envelope(slm: SingleLevelModel, sol: BilevelSolution, report: ValidationReport):
    report.checks['envelope'] = True
    kappa = sol.kappa
    if kappa.group_width != slm.group_width:
        report.fail('envelope', f"scaling map width {kappa.group_width} != model width {slm.group_width}")
    if any(np.any(f < 0) for f in kappa.factors.values()) or not kappa.bounded(slm.config.kappa_max):
        report.fail('envelope', f"scaling factors outside [0, {slm.config.kappa_max:g}]")
    expected = apply_scaling(slm.agg, kappa, sol.soc_min_source)
    if sol.envelope is None or not expected.equals(sol.envelope):
        report.fail('envelope', "envelope does not match the scaled sums of its factors")


def _check_inner(slm: SingleLevelModel, sol: BilevelSolution, report: ValidationReport,
                 tol: ToleranceConfig):
    report.checks['inner_optimality'] = True
    agg = slm.agg
    feasibility = check_schedule(sol.schedule, sol.envelope, agg.params, agg.demand, feas_tol=INNER_TOL)
    if not feasibility.passed:
        report.fail('inner_optimality', f"schedule infeasible for its envelope: {'; '.join(feasibility.issues)}")
    result = try_inner(sol.envelope, agg, slm.prices, tol=tol)
    if result is None:
        report.fail('inner_optimality', "inner dispatch is infeasible on the envelope")
        return
    optimum = result[1].objective
    realised = float(slm.prices @ (sol.schedule.charge - sol.schedule.discharge))
    if abs(realised - optimum) > INNER_TOL * (1.0 + abs(optimum)):
        report.fail('inner_optimality',
                    f"inner cost {realised:.9g} differs from the re-solved optimum {optimum:.9g}")


def _check_big_m(slm: SingleLevelModel, sol: BilevelSolution, report: ValidationReport,
                 tol: ToleranceConfig):
    report.checks['big_m'] = True
    report.checks['complementarity'] = True
    if sol.schedule.duals is None:
        report.fail('big_m', "schedule carries no multipliers")
        report.checks['complementarity'] = False
        return
    point = assemble_point(slm, sol.kappa, sol.schedule, strict=False)
    mu = np.maximum(point[slm.mu_columns], 0.0)
    slack = np.maximum(slm.slacks(point), 0.0)
    report.m_activity = big_m_activity(slm, point)

    binding = ((mu > 0) & (mu >= (1.0 - M_MARGIN) * slm.m_dual)) | (
        (slack > 0) & (slack >= (1.0 - M_MARGIN) * slm.m_primal))
    if np.any(binding):
        names = [slm.pairs[k].name for k in np.flatnonzero(binding)[:5]]
        report.fail('big_m', f"M binding: enlarge M ({', '.join(names)})")

    residual = float(np.max(mu * slack / (slm.m_dual * slm.m_primal), initial=0.0))
    if residual > tol.comp_tol:
        report.fail('complementarity', f"complementarity residual {residual:.3e} > {tol.comp_tol:.1e}")


def validate_solution(slm: SingleLevelModel, sol: BilevelSolution, reference: FleetReference,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ValidationReport:
    """
    Re-check an incumbent: inner optimality by LP re-solve, distance of every
    multiplier and slack from its big-M, complementarity, consistency of the
    envelope with the factors, and the reported objective.
    """
    report = ValidationReport()
    report.warnings.extend(slm.warnings)
    if not sol.has_incumbent or sol.schedule is None:
        report.fail('incumbent', f"no incumbent to validate (status {sol.status})")
        return report
    if not slm.reformulated:
        slm = big_m_reformulate(slm)

    _check_envelope(slm, sol, report)
    _check_inner(slm, sol, report, tol)
    _check_big_m(slm, sol, report, tol)

    report.checks['objective'] = True
    recomputed = outer_objective(sol.schedule, reference, slm.config)
    if abs(recomputed - sol.objective) > INNER_TOL * (1.0 + abs(recomputed)):
        report.fail('objective', f"reported objective {sol.objective:.9g} != recomputed {recomputed:.9g}")

    if sol.envelope is not None:
        for quantity, steps in sol.envelope.crossed_steps().items():
            message = f"{quantity} bounds cross at steps {steps[:5]}"
            report.warnings.append(message)
            warn(message, group_width=sol.group_width, quantity=quantity)
    for issue in report.issues:
        broadcast(Signals.VALIDATION_ISSUE, issue, group_width=sol.group_width)
    return report

