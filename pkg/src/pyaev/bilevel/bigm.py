"""
Big-M disjunctions for the complementarity pairs of a single-level model.

Each pair (mu, slack) gets a binary z with

    mu    <= M_dual * z
    slack <= M_primal * (1 - z)

so z = 1 lets the bound bind and z = 0 releases its multiplier.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Dict, Mapping

import numpy as np

from ..dispatch import BOUND_ROLES, BoundRole
from ..errors import ConfigurationError, ModelFormatError
from ..lp_core import LinearModel, ModelBuilder, Sense
from .kkt import SingleLevelModel

logger = logging.getLogger('pyaev.bilevel')


def dual_big_m(slm: SingleLevelModel) -> float:
    cfg = slm.config
    if cfg.big_m_dual is not None:
        return float(cfg.big_m_dual)
    peak = float(np.max(np.abs(slm.prices), initial=0.0))
    value = peak * (1.0 + 1.0 / slm.agg.params.eta_d) * cfg.dual_headroom
    return value if value > 0 else 1.0


def primal_big_m(slm: SingleLevelModel) -> Dict[str, np.ndarray]:
    """Per-step bound on the slack of each quantity's bound rows"""
    cfg = slm.config
    values = {}
    for quantity in ('charge', 'discharge', 'soc'):
        if cfg.big_m_primal is not None:
            values[quantity] = np.full(slm.steps, float(cfg.big_m_primal))
            continue
        upper = slm.agg.role(BoundRole(f"{quantity}_max"))
        m = cfg.primal_headroom * cfg.kappa_max * upper
        # steps with a zero upper sum have zero slack; any positive M does
        fallback = float(m.max(initial=0.0)) or 1.0
        values[quantity] = np.where(m > 0, m, fallback)
    return values


def big_m_reformulate(slm: SingleLevelModel) -> SingleLevelModel:
    if slm.reformulated:
        raise ModelFormatError(f"'{slm.model.name}' already carries big-M rows")
    m_dual = dual_big_m(slm)
    m_primal = primal_big_m(slm)
    if not m_dual > 0 or any(np.any(~(m > 0)) for m in m_primal.values()):
        raise ConfigurationError("big-M values must be positive")

    matrix = slm.model.matrix
    builder = ModelBuilder.from_model(slm.model)
    pairs = []
    for pair in slm.pairs:
        mp = float(m_primal[pair.role.quantity][pair.step])
        z = builder.add_var(f"z_{pair.name}", binary=True)
        dual_row = builder.add_row(f"bigm_dual_{pair.name}", [pair.mu, z], [1.0, -m_dual],
                                   Sense.LE, 0.0)
        start, end = matrix.indptr[pair.slack_row], matrix.indptr[pair.slack_row + 1]
        cols = list(matrix.indices[start:end]) + [z]
        vals = list(matrix.data[start:end]) + [mp]
        primal_row = builder.add_row(f"bigm_primal_{pair.name}", cols, vals, Sense.LE, mp)
        pairs.append(replace(pair, binary=z, dual_row=dual_row, primal_row=primal_row,
                             m_dual=m_dual, m_primal=mp))

    model = builder.build()
    logger.info("big-M reformulation of %s: M_dual %.4g, M_primal up to %.4g (%d binaries)",
                model.name, m_dual, max(float(m.max()) for m in m_primal.values()), len(pairs))
    return replace(slm, model=model, pairs=tuple(pairs), reformulated=True)


def node_model(slm: SingleLevelModel, fixings: Mapping[int, int]) -> LinearModel:
    """
    Continuous relaxation with some pairs decided: side 0 forces mu = 0,
    side 1 makes the bound row hold with equality. Decided pairs lose their
    big-M rows; columns keep their indices.
    """
    model = slm.model.relaxed()
    lower, upper = model.lower.copy(), model.upper.copy()
    senses = {}
    drop = []
    for k, side in fixings.items():
        pair = slm.pairs[k]
        if pair.binary >= 0:
            lower[pair.binary] = upper[pair.binary] = float(side)
        if side:
            senses[pair.slack_row] = Sense.EQ
            if pair.primal_row >= 0:
                drop.append(pair.primal_row)
        else:
            upper[pair.mu] = 0.0
            if pair.dual_row >= 0:
                drop.append(pair.dual_row)
    model = model.with_bounds(lower, upper).with_senses(senses)
    return model.without_rows(drop) if drop else model


def big_m_activity(slm: SingleLevelModel, x: np.ndarray) -> Dict[str, float]:
    """Largest mu / M_dual and slack / M_primal per bound role at a model point"""
    if not slm.reformulated:
        raise ModelFormatError("big-M activity needs a reformulated model")
    mu = x[slm.mu_columns] / slm.m_dual
    slack = np.maximum(slm.slacks(x), 0.0) / slm.m_primal
    ratio = np.maximum(mu, slack)
    steps = slm.steps
    return {role.value: float(ratio[i * steps:(i + 1) * steps].max(initial=0.0))
            for i, role in enumerate(BOUND_ROLES)}


def with_big_m(slm: SingleLevelModel, m_dual: np.ndarray, m_primal: np.ndarray) -> SingleLevelModel:
    """Copy of a reformulated model whose pairs record other big-M values; rows are unchanged"""
    pairs = tuple(replace(p, m_dual=float(md), m_primal=float(mp))
                  for p, md, mp in zip(slm.pairs, m_dual, m_primal))
    return replace(slm, pairs=pairs)
