"""
Comparison reports: one row per approach with its deviation from the fleet
reference. CSV columns are REPORT_COLUMNS in that order, with empty cells
where an approach has no solver statistics; the JSON form carries the same
rows under a versioned schema.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from ..dispatch import DispatchSchedule, FleetReference
from ..errors import GridMismatchError, ReportError
from ..tables import read_table, write_table
from .metrics import deviation_rmse

logger = logging.getLogger('pyaev.eval')

REPORT_SCHEMA = 1
REPORT_COLUMNS = ('name', 'status', 'objective', 'best_bound', 'rel_gap',
                  'rmse_charge', 'rmse_discharge', 'rmse_soc')


@dataclass(frozen=True, eq=False)
class Approach:
    """A named unit dispatch; bilevel approaches also carry their solution"""
    name: str
    schedule: DispatchSchedule
    solution: Optional[object] = None


@dataclass
class ReportRow:
    name: str
    rmse_charge: float
    rmse_discharge: float
    rmse_soc: float
    status: Optional[str] = None
    objective: Optional[float] = None
    best_bound: Optional[float] = None
    rel_gap: Optional[float] = None


@dataclass
class EvalReport:
    rows: List[ReportRow] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def row(self, name: str) -> ReportRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def names(self) -> List[str]:
        return [row.name for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        if not self.rows:
            return pd.DataFrame(columns=list(REPORT_COLUMNS))
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(REPORT_COLUMNS))

    def to_dict(self) -> Dict[str, object]:
        return {
            'schema': REPORT_SCHEMA,
            'metadata': dict(self.metadata),
            'rows': [_clean(asdict(row)) for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> EvalReport:
        if data.get('schema') != REPORT_SCHEMA:
            raise ReportError(f"unsupported report schema {data.get('schema')!r}")
        try:
            rows = [ReportRow(**row) for row in data['rows']]
        except (KeyError, TypeError) as e:
            raise ReportError(f"malformed report: {e}") from e
        return cls(rows, dict(data.get('metadata', {})))


def _clean(values: Dict[str, object]) -> Dict[str, object]:
    return {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in values.items()}


def evaluate(approaches: Sequence[Approach], reference: FleetReference,
             metadata: Optional[Dict[str, object]] = None) -> EvalReport:
    """One row per approach, in the given order"""
    names = [a.name for a in approaches]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ReportError(f"duplicate approach names {duplicates}")

    report = EvalReport(metadata=dict(metadata or {}))
    for approach in approaches:
        if approach.schedule.steps != reference.steps:
            raise GridMismatchError(
                f"approach '{approach.name}' has {approach.schedule.steps} steps, reference {reference.steps}")
        row = ReportRow(name=approach.name, **deviation_rmse(approach.schedule, reference))
        solution = approach.solution
        if solution is not None:
            row.status = str(solution.status)
            row.objective = float(solution.objective)
            row.best_bound = float(solution.best_bound)
            row.rel_gap = float(solution.gap)
        report.rows.append(row)
    return report


def _format_of(path: Path, fmt: Optional[str]) -> str:
    fmt = (fmt or path.suffix.lstrip('.')).lower()
    if fmt not in ('csv', 'json'):
        raise ReportError(f"unknown report format '{fmt}'")
    return fmt


def emit_report(report: EvalReport, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    path = Path(path)
    if _format_of(path, fmt) == 'csv':
        scalar = {k: v for k, v in report.metadata.items()
                  if isinstance(v, (str, int, float)) and ' ' not in str(v)}
        return write_table(report.to_frame(), path, scalar.pop('digest', None),
                           schema=REPORT_SCHEMA, **scalar)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding='utf-8')
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s (%d rows)", path, len(report.rows))
    return path


def read_report(path: Union[str, Path], fmt: Optional[str] = None) -> EvalReport:
    path = Path(path)
    if _format_of(path, fmt) == 'json':
        try:
            return EvalReport.from_dict(json.loads(path.read_text(encoding='utf-8')))
        except (OSError, json.JSONDecodeError) as e:
            raise ReportError(f"cannot read report {path}: {e}") from e

    frame, meta = read_table(path, REPORT_COLUMNS, dtype={'name': str, 'status': str})
    if meta.get('schema') != str(REPORT_SCHEMA):
        raise ReportError(f"{path.name}: unsupported report schema {meta.get('schema')!r}")
    rows = []
    for record in frame.to_dict('records'):
        values = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in record.items()}
        rows.append(ReportRow(**{k: values[k] for k in REPORT_COLUMNS}))
    meta.pop('schema')
    return EvalReport(rows, dict(meta))
