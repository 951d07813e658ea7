from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import StrEnum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..errors import ModelFormatError

NAME_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")

ArrayLike = Union[Sequence[float], np.ndarray, float]


class Sense(StrEnum):
    """Row sense, valued with the MPS row-type letter"""
    LE = "L"
    GE = "G"
    EQ = "E"


def _canonical(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort triplets by (row, col), sum duplicates and drop zeros"""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if rows.size == 0:
        return rows, cols, vals

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    starts = np.ones(rows.size, dtype=bool)
    starts[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    group = np.cumsum(starts) - 1
    summed = np.zeros(int(group[-1]) + 1)
    np.add.at(summed, group, vals)
    rows, cols = rows[starts], cols[starts]
    keep = summed != 0.0
    return rows[keep], cols[keep], summed[keep]


@dataclass(frozen=True, eq=False)
class LinearModel:
    """
    Sparse LP/QP/MILP in the form

        min  c'x + 1/2 x'Hx + constant
        s.t. a_i x (<=, >=, =) b_i
             lower <= x <= upper,  x_j in {0, 1} where integer[j]

    H is kept as its upper triangle. Models are immutable; use ModelBuilder
    to assemble one and the with_* helpers to derive variants.
    """
    name: str
    var_names: Tuple[str, ...]
    row_names: Tuple[str, ...]
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    senses: Tuple[Sense, ...]
    rhs: np.ndarray
    a_rows: np.ndarray
    a_cols: np.ndarray
    a_vals: np.ndarray
    q_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    q_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    q_vals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    obj_constant: float = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def has_quadratic(self) -> bool:
        return self.q_vals.size > 0

    @property
    def has_integers(self) -> bool:
        return bool(np.any(self.integer))

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.a_vals, (self.a_rows, self.a_cols)),
                             shape=(self.n_rows, self.n_vars))

    @cached_property
    def hessian(self) -> sp.csr_matrix:
        """Full symmetric Hessian"""
        upper = sp.coo_matrix((self.q_vals, (self.q_rows, self.q_cols)),
                              shape=(self.n_vars, self.n_vars))
        off = self.q_rows != self.q_cols
        lower = sp.coo_matrix((self.q_vals[off], (self.q_cols[off], self.q_rows[off])),
                              shape=(self.n_vars, self.n_vars))
        return (upper + lower).tocsr()

    @cached_property
    def var_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.var_names)}

    @cached_property
    def row_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.row_names)}

    def objective_value(self, x: np.ndarray) -> float:
        value = float(self.cost @ x) + self.obj_constant
        if self.has_quadratic:
            value += 0.5 * float(x @ (self.hessian @ x))
        return value

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def row_violation(self, x: np.ndarray) -> np.ndarray:
        """Nonnegative per-row violation of the constraints at x"""
        gap = self.row_activity(x) - self.rhs
        return np.where(self.sense_mask(Sense.LE), np.maximum(gap, 0.0),
                        np.where(self.sense_mask(Sense.GE), np.maximum(-gap, 0.0),
                                 np.abs(gap)))

    def max_violation(self, x: np.ndarray) -> float:
        bound = np.maximum(self.lower - x, x - self.upper)
        worst = float(np.max(bound, initial=0.0))
        return max(worst, float(np.max(self.row_violation(x), initial=0.0)))

    def sense_mask(self, sense: Sense) -> np.ndarray:
        return np.array([s == sense for s in self.senses], dtype=bool)

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> LinearModel:
        return replace(self, lower=np.asarray(lower, dtype=float).copy(),
                       upper=np.asarray(upper, dtype=float).copy())

    def with_senses(self, changes: Dict[int, Sense]) -> LinearModel:
        senses = list(self.senses)
        for i, sense in changes.items():
            senses[i] = sense
        return replace(self, senses=tuple(senses))

    def relaxed(self) -> LinearModel:
        """Drop integrality, keeping binary bounds"""
        return replace(self, integer=np.zeros(self.n_vars, dtype=bool))

    def without_rows(self, rows: Sequence[int]) -> LinearModel:
        drop = np.zeros(self.n_rows, dtype=bool)
        drop[np.asarray(list(rows), dtype=np.int64)] = True
        keep = np.flatnonzero(~drop)
        renumber = -np.ones(self.n_rows, dtype=np.int64)
        renumber[keep] = np.arange(keep.size)
        mask = ~drop[self.a_rows]
        return replace(
            self,
            row_names=tuple(self.row_names[i] for i in keep),
            senses=tuple(self.senses[i] for i in keep),
            rhs=self.rhs[keep].copy(),
            a_rows=renumber[self.a_rows[mask]],
            a_cols=self.a_cols[mask].copy(),
            a_vals=self.a_vals[mask].copy(),
        )

    def equals(self, other: LinearModel) -> bool:
        """Exact structural and numerical equality"""
        return (
            self.name == other.name
            and self.var_names == other.var_names
            and self.row_names == other.row_names
            and tuple(self.senses) == tuple(other.senses)
            and self.obj_constant == other.obj_constant
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in (
                'cost', 'lower', 'upper', 'integer', 'rhs',
                'a_rows', 'a_cols', 'a_vals', 'q_rows', 'q_cols', 'q_vals'))
        )

    def summary(self) -> Dict[str, int]:
        return {
            'variables': self.n_vars,
            'rows': self.n_rows,
            'nonzeros': int(self.a_vals.size),
            'quadratic_nonzeros': int(self.q_vals.size),
            'integers': int(np.count_nonzero(self.integer)),
        }


def _broadcast(value: Optional[ArrayLike], count: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(count, default)
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return np.full(count, float(array))
    if array.shape != (count,):
        raise ModelFormatError(f"expected {count} values, got shape {array.shape}")
    return array.copy()


class ModelBuilder:
    """Incremental assembly of a LinearModel"""

    def __init__(self, name: str = "model"):
        self.name = name
        self._var_names: List[str] = []
        self._lower: List[float] = []
        self._upper: List[float] = []
        self._cost: List[float] = []
        self._integer: List[bool] = []
        self._row_names: List[str] = []
        self._senses: List[Sense] = []
        self._rhs: List[float] = []
        self._a: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._q: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._constant = 0.0
        self._names: Dict[str, int] = {}
        self._row_lookup: Dict[str, int] = {}

    @classmethod
    def from_model(cls, model: LinearModel) -> ModelBuilder:
        builder = cls(model.name)
        builder._var_names = list(model.var_names)
        builder._lower = list(model.lower)
        builder._upper = list(model.upper)
        builder._cost = list(model.cost)
        builder._integer = list(model.integer)
        builder._row_names = list(model.row_names)
        builder._senses = list(model.senses)
        builder._rhs = list(model.rhs)
        builder._a = [(model.a_rows.copy(), model.a_cols.copy(), model.a_vals.copy())]
        builder._q = [(model.q_rows.copy(), model.q_cols.copy(), model.q_vals.copy())]
        builder._constant = model.obj_constant
        builder._names = dict(model.var_index)
        builder._row_lookup = dict(model.row_index)
        return builder

    @property
    def n_vars(self) -> int:
        return len(self._var_names)

    @property
    def n_rows(self) -> int:
        return len(self._row_names)

    @staticmethod
    def _check_name(name: str):
        if not NAME_PATTERN.match(name):
            raise ModelFormatError(f"invalid name '{name}'")

    def add_var(self, name: str, lower: float = 0.0, upper: float = np.inf,
                cost: float = 0.0, binary: bool = False, integer: bool = False) -> int:
        self._check_name(name)
        if name in self._names:
            raise ModelFormatError(f"duplicate variable name '{name}'")
        if binary:
            lower, upper = 0.0, 1.0
        index = len(self._var_names)
        self._names[name] = index
        self._var_names.append(name)
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        self._cost.append(float(cost))
        self._integer.append(bool(binary or integer))
        return index

    def add_vars(self, prefix: str, count: int, lower: Optional[ArrayLike] = 0.0,
                 upper: Optional[ArrayLike] = np.inf, cost: Optional[ArrayLike] = 0.0,
                 binary: bool = False) -> np.ndarray:
        lower = _broadcast(lower, count, 0.0)
        upper = _broadcast(upper, count, np.inf)
        cost = _broadcast(cost, count, 0.0)
        return np.array([
            self.add_var(f"{prefix}_{i}", lower[i], upper[i], cost[i], binary)
            for i in range(count)
        ], dtype=np.int64)

    def var(self, name: str) -> int:
        return self._names[name]

    def add_row(self, name: str, cols: Sequence[int], vals: Sequence[float],
                sense: Sense, rhs: float) -> int:
        self._check_name(name)
        if name in self._row_lookup:
            raise ModelFormatError(f"duplicate row name '{name}'")
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if cols.shape != vals.shape:
            raise ModelFormatError(f"row '{name}': {cols.size} columns, {vals.size} values")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ModelFormatError(f"row '{name}' references an unknown column")
        index = len(self._row_names)
        self._row_lookup[name] = index
        self._row_names.append(name)
        self._senses.append(Sense(sense))
        self._rhs.append(float(rhs))
        self._a.append((np.full(cols.size, index, dtype=np.int64), cols, vals))
        return index

    def set_cost(self, col: int, value: float):
        self._cost[col] = float(value)

    def add_cost(self, col: int, value: float):
        self._cost[col] += float(value)

    def add_constant(self, value: float):
        self._constant += float(value)

    def set_bounds(self, col: int, lower: float, upper: float):
        self._lower[col] = float(lower)
        self._upper[col] = float(upper)

    def add_quadratic(self, i: int, j: int, value: float):
        """Add value to H[i, j] (and H[j, i])"""
        i, j = min(i, j), max(i, j)
        self._q.append((np.array([i]), np.array([j]), np.array([float(value)])))

    def add_square(self, cols: Sequence[int], coefs: Sequence[float],
                   target: float = 0.0, weight: float = 1.0):
        """Add weight * (sum_k coefs_k x_cols_k - target)^2 to the objective"""
        if weight < 0:
            raise ModelFormatError("squared terms need a nonnegative weight")
        cols = np.asarray(cols, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=float)
        ii, jj = np.meshgrid(np.arange(cols.size), np.arange(cols.size), indexing='ij')
        upper = cols[ii] <= cols[jj]
        rows_q = np.minimum(cols[ii], cols[jj])[upper]
        cols_q = np.maximum(cols[ii], cols[jj])[upper]
        # 1/2 x'Hx with H = 2 w a a'
        vals_q = (2.0 * weight * coefs[ii] * coefs[jj])[upper]
        self._q.append((rows_q, cols_q, vals_q))
        for col, coef in zip(cols, coefs):
            self._cost[col] += -2.0 * weight * target * coef
        self._constant += weight * target * target

    def build(self) -> LinearModel:
        n, m = self.n_vars, self.n_rows
        if self._a:
            a_rows, a_cols, a_vals = (np.concatenate(parts) for parts in zip(*self._a))
        else:
            a_rows = a_cols = np.zeros(0, dtype=np.int64)
            a_vals = np.zeros(0)
        if self._q:
            q_rows, q_cols, q_vals = (np.concatenate(parts) for parts in zip(*self._q))
        else:
            q_rows = q_cols = np.zeros(0, dtype=np.int64)
            q_vals = np.zeros(0)
        a_rows, a_cols, a_vals = _canonical(a_rows, a_cols, a_vals)
        q_rows, q_cols, q_vals = _canonical(q_rows, q_cols, q_vals)
        return LinearModel(
            name=self.name,
            var_names=tuple(self._var_names),
            row_names=tuple(self._row_names),
            cost=np.asarray(self._cost, dtype=float).reshape(n),
            lower=np.asarray(self._lower, dtype=float).reshape(n),
            upper=np.asarray(self._upper, dtype=float).reshape(n),
            integer=np.asarray(self._integer, dtype=bool).reshape(n),
            senses=tuple(self._senses),
            rhs=np.asarray(self._rhs, dtype=float).reshape(m),
            a_rows=a_rows, a_cols=a_cols, a_vals=a_vals,
            q_rows=q_rows, q_cols=q_cols, q_vals=q_vals,
            obj_constant=float(self._constant),
        )
