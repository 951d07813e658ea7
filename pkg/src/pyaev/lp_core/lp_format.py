from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..errors import ModelFormatError
from .model import LinearModel, ModelBuilder, Sense
from .mps import format_number, write_mps

logger = logging.getLogger('pyaev.lp_core')

TERMS_PER_LINE = 6

_SENSE_TEXT = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
_COMMENT = {'mps': "*", 'lp': "\\", 'lp_text': "\\"}
_TOKEN = re.compile(r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op><=|>=|=<|=>|[<>=:+\-\[\]\^*/])
""", re.VERBOSE)
_SECTIONS = {
    'minimize': 'objective', 'minimise': 'objective', 'minimum': 'objective', 'min': 'objective',
    'subject': 'constraints', 'such': 'constraints', 'st': 'constraints', 's.t.': 'constraints',
    'bounds': 'bounds', 'bound': 'bounds',
    'binaries': 'binaries', 'binary': 'binaries', 'bin': 'binaries',
    'generals': 'generals', 'general': 'generals', 'gen': 'generals',
    'end': 'end',
}


def _signed(value: float) -> str:
    if np.signbit(value):
        return f"- {format_number(-value)}"
    return f"+ {format_number(value)}"


def _wrap(terms: List[str], head: str) -> List[str]:
    lines = []
    for k in range(0, max(len(terms), 1), TERMS_PER_LINE):
        chunk = " ".join(terms[k:k + TERMS_PER_LINE])
        lines.append(f" {head} {chunk}".rstrip() if k == 0 else f"   {chunk}")
    return lines


def write_lp(model: LinearModel) -> str:
    """Render model in CPLEX LP text with the quadratic part as [ ... ] / 2"""
    lines = [f"\\Problem name: {model.name}", "", "Minimize"]

    # Every column is listed so that a reader recovers the column order
    terms = [f"{_signed(model.cost[j])} {name}" for j, name in enumerate(model.var_names)]
    if model.has_quadratic:
        quad = []
        for i, j, v in zip(model.q_rows, model.q_cols, model.q_vals):
            if i == j:
                quad.append(f"{_signed(v)} {model.var_names[i]} ^ 2")
            else:
                quad.append(f"{_signed(2.0 * v)} {model.var_names[i]} * {model.var_names[j]}")
        terms.append("+ [")
        terms.extend(quad)
        terms.append("] / 2")
    if model.obj_constant != 0.0 or not terms:
        terms.append(_signed(model.obj_constant))
    lines.extend(_wrap(terms, "obj:"))

    lines.append("Subject To")
    A = model.matrix
    for i, name in enumerate(model.row_names):
        start, end = A.indptr[i], A.indptr[i + 1]
        row_terms = [f"{_signed(v)} {model.var_names[j]}"
                     for j, v in zip(A.indices[start:end], A.data[start:end])]
        if not row_terms:
            row_terms = [f"+ 0.0 {model.var_names[0]}"] if model.n_vars else []
        row_terms.append(f"{_SENSE_TEXT[model.senses[i]]} {format_number(model.rhs[i])}")
        lines.extend(_wrap(row_terms, f"{name}:"))

    lines.append("Bounds")
    for j, name in enumerate(model.var_names):
        lo, up = model.lower[j], model.upper[j]
        if model.integer[j] and lo == 0.0 and up == 1.0:
            continue
        if lo == up:
            lines.append(f" {name} = {format_number(lo)}")
        elif np.isneginf(lo) and np.isposinf(up):
            lines.append(f" {name} free")
        elif np.isposinf(up):
            if lo != 0.0:
                lines.append(f" {name} >= {format_number(lo)}")
        else:
            low = "-inf" if np.isneginf(lo) else format_number(lo)
            lines.append(f" {low} <= {name} <= {format_number(up)}")

    binaries = [name for j, name in enumerate(model.var_names) if model.integer[j]]
    if binaries:
        lines.append("Binaries")
        for k in range(0, len(binaries), TERMS_PER_LINE):
            lines.append(" " + " ".join(binaries[k:k + TERMS_PER_LINE]))
    lines.append("End")
    return "\n".join(lines) + "\n"


class _Tokens:
    def __init__(self, text: str, line_no: int):
        self.items: List[Tuple[str, str]] = []
        self.line_no = line_no
        pos = 0
        text = text.strip()
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            match = _TOKEN.match(text, pos)
            if not match:
                raise ModelFormatError(f"line {line_no}: unexpected text '{text[pos:pos + 20]}'")
            kind = match.lastgroup
            self.items.append((kind, match.group(kind)))
            pos = match.end()
        self.pos = 0

    def peek(self) -> Optional[Tuple[str, str]]:
        return self.items[self.pos] if self.pos < len(self.items) else None

    def take(self) -> Tuple[str, str]:
        item = self.peek()
        if item is None:
            raise ModelFormatError(f"line {self.line_no}: unexpected end of expression")
        self.pos += 1
        return item

    def done(self) -> bool:
        return self.pos >= len(self.items)


def _parse_value(tokens: _Tokens) -> float:
    sign = 1.0
    while tokens.peek() and tokens.peek()[1] in ("+", "-"):
        sign *= -1.0 if tokens.take()[1] == "-" else 1.0
    kind, text = tokens.take()
    if kind == 'number':
        return sign * float(text)
    if kind == 'name' and text.lower() in ('inf', 'infinity'):
        return sign * np.inf
    raise ModelFormatError(f"line {tokens.line_no}: expected a number, got '{text}'")


def _parse_expression(tokens: _Tokens, stop: Tuple[str, ...]):
    """Parse linear, quadratic and constant terms up to a token in stop"""
    linear: List[Tuple[str, float]] = []
    quad: List[Tuple[str, str, float]] = []
    constant = 0.0
    in_bracket = False
    while not tokens.done() and tokens.peek()[1] not in stop:
        sign = 1.0
        while tokens.peek() and tokens.peek()[1] in ("+", "-"):
            sign *= -1.0 if tokens.take()[1] == "-" else 1.0
        kind, text = tokens.take()
        if text == "[":
            in_bracket = True
            continue
        if text == "]":
            in_bracket = False
            if tokens.peek() and tokens.peek()[1] == "/":
                tokens.take()
                divisor = _parse_value(tokens)
                if divisor != 2.0:
                    raise ModelFormatError(f"line {tokens.line_no}: quadratic block must be / 2")
            continue
        coef = 1.0
        if kind == 'number':
            coef = float(text)
            nxt = tokens.peek()
            if nxt is None or nxt[0] != 'name' or nxt[1] in stop:
                constant += sign * coef
                continue
            kind, text = tokens.take()
        if kind != 'name':
            raise ModelFormatError(f"line {tokens.line_no}: unexpected '{text}'")
        first = text
        if tokens.peek() and tokens.peek()[1] == "^":
            tokens.take()
            if _parse_value(tokens) != 2.0:
                raise ModelFormatError(f"line {tokens.line_no}: only squares are supported")
            quad.append((first, first, sign * coef))
        elif tokens.peek() and tokens.peek()[1] == "*":
            tokens.take()
            second = tokens.take()[1]
            quad.append((first, second, sign * coef))
        else:
            if in_bracket:
                raise ModelFormatError(f"line {tokens.line_no}: linear term inside [ ]")
            linear.append((first, sign * coef))
    return linear, quad, constant


def read_lp(text: str) -> LinearModel:
    """Parse CPLEX LP text as written by write_lp (minimisation only)"""
    name = "model"
    blocks: Dict[str, List[Tuple[int, str]]] = {
        'objective': [], 'constraints': [], 'bounds': [], 'binaries': [], 'generals': []}
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("\\"):
            match = re.match(r"\\\s*Problem name:\s*(\S+)", line)
            if match:
                name = match.group(1)
            continue
        if not line:
            continue
        head = line.split()[0].lower()
        if head in ('maximize', 'maximise', 'maximum', 'max'):
            raise ModelFormatError(f"line {line_no}: only minimisation is supported")
        if head in _SECTIONS and not raw[0].isspace():
            section = _SECTIONS[head]
            if section == 'end':
                break
            continue
        if section is None:
            raise ModelFormatError(f"line {line_no}: text outside any section")
        blocks[section].append((line_no, line))

    def statements(entries: List[Tuple[int, str]]) -> List[Tuple[int, str]]:
        # A labelled line starts a new statement; continuation lines join it
        joined: List[Tuple[int, str]] = []
        for line_no, line in entries:
            if re.match(r"^[A-Za-z_][A-Za-z0-9_.]*\s*:", line) or not joined:
                joined.append((line_no, line))
            else:
                joined[-1] = (joined[-1][0], joined[-1][1] + " " + line)
        return joined

    var_order: List[str] = []
    seen: Dict[str, int] = {}

    def touch(var: str):
        if var not in seen:
            seen[var] = len(var_order)
            var_order.append(var)

    objective_linear: List[Tuple[str, float]] = []
    objective_quad: List[Tuple[str, str, float]] = []
    constant = 0.0
    for line_no, line in statements(blocks['objective']):
        tokens = _Tokens(line, line_no)
        if len(tokens.items) >= 2 and tokens.items[1][1] == ":":
            tokens.pos = 2
        linear, quad, const = _parse_expression(tokens, ())
        objective_linear += linear
        objective_quad += quad
        constant += const
        for var, _ in linear:
            touch(var)
        for a, b, _ in quad:
            touch(a)
            touch(b)

    rows = []
    for line_no, line in statements(blocks['constraints']):
        tokens = _Tokens(line, line_no)
        if len(tokens.items) < 2 or tokens.items[1][1] != ":":
            raise ModelFormatError(f"line {line_no}: constraints must be named")
        row_name = tokens.items[0][1]
        tokens.pos = 2
        linear, quad, const = _parse_expression(tokens, ("<=", ">=", "=<", "=>", "<", ">", "="))
        if quad:
            raise ModelFormatError(f"line {line_no}: quadratic constraints are not supported")
        op = tokens.take()[1]
        sense = Sense.LE if op in ("<=", "=<", "<") else Sense.GE if op in (">=", "=>", ">") else Sense.EQ
        rhs = _parse_value(tokens) - const
        rows.append((row_name, linear, sense, rhs))
        for var, _ in linear:
            touch(var)

    lower: Dict[str, float] = {}
    upper: Dict[str, float] = {}
    for line_no, line in blocks['bounds']:
        parts = line.split()
        ranged = re.match(r"^(\S+)\s*(?:<=|=<)\s*(\S+)\s*(?:<=|=<)\s*(\S+)$", line)
        single = re.match(r"^(\S+)\s*(<=|=<|>=|=>|=)\s*(\S+)$", line)
        try:
            if len(parts) == 2 and parts[1].lower() == 'free':
                var = parts[0]
                lower[var], upper[var] = -np.inf, np.inf
            elif ranged:
                var = ranged.group(2)
                lower[var], upper[var] = float(ranged.group(1)), float(ranged.group(3))
            elif single:
                var, op, value = single.group(1), single.group(2), float(single.group(3))
                if op in (">=", "=>"):
                    lower[var] = value
                elif op in ("<=", "=<"):
                    upper[var] = value
                else:
                    lower[var] = upper[var] = value
            else:
                raise ModelFormatError(f"line {line_no}: unsupported bound '{line}'")
        except ValueError:
            raise ModelFormatError(f"line {line_no}: bad number in bound '{line}'") from None
        touch(var)

    binaries = set()
    for _, line in blocks['binaries'] + blocks['generals']:
        for var in line.split():
            binaries.add(var)
            touch(var)

    builder = ModelBuilder(name)
    cost: Dict[str, float] = {}
    for var, value in objective_linear:
        cost[var] = cost.get(var, 0.0) + value
    for var in var_order:
        if var in binaries:
            builder.add_var(var, lower.get(var, 0.0), upper.get(var, 1.0),
                            cost=cost.get(var, 0.0), integer=True)
        else:
            builder.add_var(var, lower.get(var, 0.0), upper.get(var, np.inf),
                            cost=cost.get(var, 0.0))
    for row_name, linear, sense, rhs in rows:
        builder.add_row(row_name, [builder.var(v) for v, _ in linear],
                        [c for _, c in linear], sense, rhs)
    for a, b, value in objective_quad:
        i, j = builder.var(a), builder.var(b)
        builder.add_quadratic(i, j, value if i == j else 0.5 * value)
    builder.add_constant(constant)
    return builder.build()


def save_lp(model: LinearModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(write_lp(model), encoding='utf-8')
    logger.info("wrote %s (%s)", path, model.summary())
    return path


def load_lp(path: Union[str, Path]) -> LinearModel:
    return read_lp(Path(path).read_text(encoding='utf-8'))


def export_model(model: LinearModel, fmt: str, digest: Optional[str] = None) -> str:
    """Model text in ``mps`` or ``lp`` format, led by a `pyaev digest=...` comment when a digest is given"""
    writers = {'mps': write_mps, 'lp': write_lp, 'lp_text': write_lp}
    fmt = str(getattr(fmt, 'value', fmt)).lower()
    if fmt not in writers:
        raise ModelFormatError(f"unknown model format {fmt!r}, expected mps or lp")
    text = writers[fmt](model)
    if digest is None:
        return text
    return f"{_COMMENT[fmt]} pyaev digest={digest}\n" + text
