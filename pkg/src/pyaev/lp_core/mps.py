from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..errors import ModelFormatError
from .model import LinearModel, ModelBuilder, Sense

logger = logging.getLogger('pyaev.lp_core')

OBJECTIVE_ROW = "obj"
RHS_SET = "RHS"
BOUND_SET = "BND"


def format_number(value: float) -> str:
    """Shortest text that reads back to the same float"""
    return repr(float(value))


def _field_line(f1: str = "", f2: str = "", f3: str = "", f4: str = "") -> str:
    # Fixed-form columns 2-3, 5-12, 15-22, 25-36; longer names overflow (free form)
    return f" {f1:<2} {f2:<8}  {f3:<8}  {f4}".rstrip()


def write_mps(model: LinearModel) -> str:
    """Render model as MPS text; the quadratic part goes to QMATRIX as 1/2 x'Hx"""
    if OBJECTIVE_ROW in model.row_index:
        raise ModelFormatError(f"row name '{OBJECTIVE_ROW}' is reserved for the objective")
    lines = [f"NAME          {model.name}", "OBJSENSE", "    MIN", "ROWS"]
    lines.append(_field_line("N", OBJECTIVE_ROW))
    for name, sense in zip(model.row_names, model.senses):
        lines.append(_field_line(str(sense), name))

    lines.append("COLUMNS")
    A = model.matrix.tocsc()
    in_integer_block = False
    marker = 0
    for j, name in enumerate(model.var_names):
        if model.integer[j] != in_integer_block:
            kind = "'INTORG'" if model.integer[j] else "'INTEND'"
            lines.append(_field_line("", f"MARKER{marker}", "'MARKER'", kind))
            marker += 1
            in_integer_block = bool(model.integer[j])
        start, end = A.indptr[j], A.indptr[j + 1]
        entries = [(model.row_names[i], v) for i, v in zip(A.indices[start:end], A.data[start:end])]
        if model.cost[j] != 0.0 or not entries:
            entries.insert(0, (OBJECTIVE_ROW, model.cost[j]))
        for row, value in entries:
            lines.append(_field_line("", name, row, format_number(value)))
    if in_integer_block:
        lines.append(_field_line("", f"MARKER{marker}", "'MARKER'", "'INTEND'"))

    lines.append("RHS")
    if model.obj_constant != 0.0:
        lines.append(_field_line("", RHS_SET, OBJECTIVE_ROW, format_number(-model.obj_constant)))
    for name, value in zip(model.row_names, model.rhs):
        if value != 0.0:
            lines.append(_field_line("", RHS_SET, name, format_number(value)))

    lines.append("BOUNDS")
    for j, name in enumerate(model.var_names):
        lo, up = model.lower[j], model.upper[j]
        if model.integer[j] and lo == 0.0 and up == 1.0:
            lines.append(_field_line("BV", BOUND_SET, name))
        elif lo == up:
            lines.append(_field_line("FX", BOUND_SET, name, format_number(lo)))
        elif np.isneginf(lo) and np.isposinf(up):
            lines.append(_field_line("FR", BOUND_SET, name))
        else:
            if np.isneginf(lo):
                lines.append(_field_line("MI", BOUND_SET, name))
            elif lo != 0.0:
                lines.append(_field_line("LO", BOUND_SET, name, format_number(lo)))
            if np.isfinite(up):
                lines.append(_field_line("UP", BOUND_SET, name, format_number(up)))

    if model.has_quadratic:
        lines.append("QMATRIX")
        entries: List[Tuple[int, int, float]] = []
        for i, j, v in zip(model.q_rows, model.q_cols, model.q_vals):
            entries.append((int(i), int(j), v))
            if i != j:
                entries.append((int(j), int(i), v))
        for i, j, v in sorted(entries):
            lines.append(_field_line("", model.var_names[i], model.var_names[j], format_number(v)))

    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _number(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ModelFormatError(f"line {line_no}: expected a number, got '{token}'") from None


def read_mps(text: str) -> LinearModel:
    """Parse MPS text (fixed or free form, whitespace separated names)"""
    name = "model"
    section = None
    objective_row = None
    row_senses: Dict[str, Sense] = {}
    row_order: List[str] = []
    columns: Dict[str, Dict[str, float]] = {}
    col_order: List[str] = []
    integer: Dict[str, bool] = {}
    rhs: Dict[str, float] = {}
    lower: Dict[str, float] = {}
    upper: Dict[str, float] = {}
    quad: Dict[Tuple[str, str], float] = {}
    constant = 0.0
    in_integer_block = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            keyword = tokens[0].upper()
            if keyword == "NAME":
                name = tokens[1] if len(tokens) > 1 else name
                section = None
            elif keyword == "OBJSENSE":
                section = "OBJSENSE"
                if len(tokens) > 1 and tokens[1].upper() not in ("MIN", "MINIMIZE"):
                    raise ModelFormatError(f"line {line_no}: only minimisation is supported")
            elif keyword in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "QMATRIX", "QUADOBJ"):
                section = keyword
            elif keyword == "RANGES":
                section = keyword
            elif keyword == "ENDATA":
                break
            else:
                raise ModelFormatError(f"line {line_no}: unknown section '{tokens[0]}'")
            continue

        if section == "OBJSENSE":
            if tokens[0].upper() not in ("MIN", "MINIMIZE"):
                raise ModelFormatError(f"line {line_no}: only minimisation is supported")
        elif section == "ROWS":
            kind, row = tokens[0].upper(), tokens[1]
            if kind == "N":
                if objective_row is None:
                    objective_row = row
                continue
            if kind not in ("L", "G", "E"):
                raise ModelFormatError(f"line {line_no}: unknown row type '{kind}'")
            row_senses[row] = Sense(kind)
            row_order.append(row)
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                in_integer_block = tokens[2] == "'INTORG'"
                continue
            col = tokens[0]
            if col not in columns:
                columns[col] = {}
                col_order.append(col)
                integer[col] = in_integer_block
            for k in range(1, len(tokens) - 1, 2):
                columns[col][tokens[k]] = columns[col].get(tokens[k], 0.0) + _number(tokens[k + 1], line_no)
        elif section == "RHS":
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            for k in range(0, len(pairs) - 1, 2):
                value = _number(pairs[k + 1], line_no)
                if pairs[k] == objective_row:
                    constant = -value
                else:
                    rhs[pairs[k]] = value
        elif section == "BOUNDS":
            kind, col = tokens[0].upper(), tokens[2]
            value = _number(tokens[3], line_no) if len(tokens) > 3 else None
            if col not in columns:
                raise ModelFormatError(f"line {line_no}: bound on unknown column '{col}'")
            if kind == "UP":
                upper[col] = value
            elif kind == "LO":
                lower[col] = value
            elif kind == "FX":
                lower[col] = upper[col] = value
            elif kind == "FR":
                lower[col], upper[col] = -np.inf, np.inf
            elif kind == "MI":
                lower[col] = -np.inf
            elif kind == "PL":
                upper[col] = np.inf
            elif kind == "BV":
                lower[col], upper[col] = 0.0, 1.0
                integer[col] = True
            else:
                raise ModelFormatError(f"line {line_no}: unsupported bound type '{kind}'")
        elif section in ("QMATRIX", "QUADOBJ"):
            a, b, value = tokens[0], tokens[1], _number(tokens[2], line_no)
            quad[(a, b)] = value
            if section == "QUADOBJ":
                quad[(b, a)] = value
        elif section == "RANGES":
            raise ModelFormatError(f"line {line_no}: RANGES are not supported")

    builder = ModelBuilder(name)
    for col in col_order:
        is_int = integer[col]
        lo = lower.get(col, 0.0)
        up = upper.get(col, 1.0 if is_int and col not in upper else np.inf)
        builder.add_var(col, lo, up, cost=columns[col].get(objective_row, 0.0), integer=is_int)

    by_row: Dict[str, Tuple[List[int], List[float]]] = {row: ([], []) for row in row_order}
    for col in col_order:
        j = builder.var(col)
        for row, value in columns[col].items():
            if row == objective_row:
                continue
            if row not in by_row:
                raise ModelFormatError(f"column '{col}' references unknown row '{row}'")
            by_row[row][0].append(j)
            by_row[row][1].append(value)
    for row in row_order:
        cols, vals = by_row[row]
        builder.add_row(row, cols, vals, row_senses[row], rhs.get(row, 0.0))

    for (a, b), value in quad.items():
        i, j = builder.var(a), builder.var(b)
        if i <= j:
            builder.add_quadratic(i, j, value)
    builder.add_constant(constant)
    return builder.build()


def save_mps(model: LinearModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(write_mps(model), encoding='utf-8')
    logger.info("wrote %s (%s)", path, model.summary())
    return path


def load_mps(path: Union[str, Path]) -> LinearModel:
    return read_mps(Path(path).read_text(encoding='utf-8'))
