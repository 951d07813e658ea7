from .metrics import deviation_rmse, rmse
from .report import (
    REPORT_COLUMNS,
    REPORT_SCHEMA,
    Approach,
    EvalReport,
    ReportRow,
    emit_report,
    evaluate,
    read_report,
)
from .figures import FigureKind, emit_figure_data, envelopes_frame, price_soc_charge_frame, scaling_factors_frame
