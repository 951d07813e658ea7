"""
Best-first complementarity branch-and-bound over a big-M single-level model.

Each node fixes some pairs to a side and solves the continuous relaxation of
the rest. Nodes are popped in rounds of `node_batch` and solved on up to
`threads` workers; outcomes are merged in pop order, so the search depends on
the configuration and not on the worker count.
"""
from __future__ import annotations

import heapq
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aggregate import apply_scaling
from ..dispatch import default_threads
from ..errors import InfeasibleError
from ..event_bus import broadcast, log
from ..lp_core import DEFAULT_TOLERANCES, SolveStatus, ToleranceConfig, find_infeasibility
from ..signals import Signals
from .bigm import big_m_activity, big_m_reformulate, node_model
from .config import BilevelConfig
from .heuristics import (
    Candidate,
    assemble_point,
    candidate_from,
    kappa_search,
    polish,
    seed_candidates,
    solve_relaxation,
)
from .kkt import SingleLevelModel
from .solution import BilevelSolution, BnbStatus, relative_gap

logger = logging.getLogger('pyaev.bilevel')

COMPLEMENTARY_TOL = 1e-6


@dataclass(order=True)
class Node:
    bound: float
    idx: int
    depth: int = field(compare=False)
    fixings: Dict[int, int] = field(compare=False, default_factory=dict)


class IncumbentStore:
    """Best bilevel-feasible candidate seen so far"""

    def __init__(self):
        self._lock = threading.Lock()
        self._best: Optional[Candidate] = None

    @property
    def best(self) -> Optional[Candidate]:
        with self._lock:
            return self._best

    @property
    def objective(self) -> float:
        best = self.best
        return math.inf if best is None else best.objective

    def offer(self, candidate: Optional[Candidate]) -> bool:
        if candidate is None or not math.isfinite(candidate.objective):
            return False
        with self._lock:
            current = self._best
            if current is not None and not candidate.objective < current.objective - 1e-12 * (
                    1.0 + abs(current.objective)):
                return False
            self._best = candidate
        broadcast(Signals.INCUMBENT_UPDATED, objective=candidate.objective, source=candidate.source)
        return True


@dataclass(eq=False)
class _Outcome:
    node: Node
    status: SolveStatus
    bound: float
    branch: Optional[Tuple[int, int]] = None
    candidates: List[Candidate] = field(default_factory=list)


def branching_pair(slm: SingleLevelModel, x: np.ndarray,
                   fixings: Dict[int, int]) -> Optional[Tuple[int, int]]:
    """
    Most violated free pair and the side its relaxation leans to, or None when
    every free pair is complementary. Violation is min(mu / M_dual,
    slack / M_primal); ties go to the largest mu * slack.
    """
    mu = np.maximum(x[slm.mu_columns], 0.0)
    slack = np.maximum(slm.slacks(x), 0.0)
    mu_ratio, slack_ratio = mu / slm.m_dual, slack / slm.m_primal
    score = np.minimum(mu_ratio, slack_ratio)
    if fixings:
        score[np.fromiter(fixings, dtype=np.int64)] = -1.0
    top = float(score.max(initial=-1.0))
    if top <= COMPLEMENTARY_TOL:
        return None
    tied = np.flatnonzero(score >= top * (1.0 - 1e-9))
    k = int(tied[np.argmax((mu * slack)[tied])])
    return k, int(mu_ratio[k] >= slack_ratio[k])


def _first_free(slm: SingleLevelModel, fixings: Dict[int, int]) -> Optional[int]:
    for k in range(len(slm.pairs)):
        if k not in fixings:
            return k
    return None


def _process(slm: SingleLevelModel, node: Node, incumbent: float, cfg: BilevelConfig,
             tol: ToleranceConfig) -> _Outcome:
    solution = solve_relaxation(node_model(slm, node.fixings), tol)
    if solution.status == SolveStatus.INFEASIBLE:
        return _Outcome(node, solution.status, math.inf)
    if not solution.is_optimal:
        # no point to branch on; split the next free pair and keep the parent bound
        k = _first_free(slm, node.fixings)
        return _Outcome(node, solution.status, node.bound, None if k is None else (k, 1))

    bound = min(max(solution.objective, node.bound, 0.0), incumbent)
    x = solution.x
    outcome = _Outcome(node, solution.status, bound, branching_pair(slm, x, node.fixings))
    kappa = slm.kappa_map(x)
    if outcome.branch is None:
        start = Candidate(math.inf, kappa, slm.schedule(x), x, "relaxation")
        polished = polish(slm, start, max(1, cfg.polish_rounds), tol)
        if math.isfinite(polished.objective):
            outcome.candidates.append(polished)

    rounded = candidate_from(slm, kappa, "node", tol=tol)
    if rounded is not None:
        if rounded.objective < incumbent:
            rounded = polish(slm, rounded, cfg.polish_rounds, tol)
        outcome.candidates.append(rounded)
    return outcome


def _heuristic_incumbents(slm: SingleLevelModel, store: IncumbentStore, seeds: Sequence[object],
                          cfg: BilevelConfig, tol: ToleranceConfig):
    candidates = seed_candidates(slm, seeds, tol)
    for candidate in candidates:
        store.offer(candidate)
    if not candidates:
        log("no seed map admits a feasible inner dispatch", group_width=slm.group_width)
        return
    searched = kappa_search(slm, candidates[0], cfg.search_evaluations, tol)
    store.offer(searched)
    store.offer(polish(slm, searched, cfg.polish_rounds, tol))


def _root_certificate(slm: SingleLevelModel, tol: ToleranceConfig) -> InfeasibleError:
    report = find_infeasibility(node_model(slm, {}).relaxed(), tol)
    row = report.first_row()
    name = slm.model.row_names[row] if row is not None else "bounds"
    return InfeasibleError(f"single-level model {slm.model.name} is infeasible near row '{name}'",
                           certificate=report.certificate)


def solve_bilevel(slm: SingleLevelModel, cfg: Optional[BilevelConfig] = None,
                  seeds: Sequence[object] = (),
                  tol: ToleranceConfig = DEFAULT_TOLERANCES) -> BilevelSolution:
    """
    Solve to the relative gap in cfg (default: the model's own config) or
    until a node or time limit. Seeds are scaling maps or stored solutions of
    coarser widths; they are refined onto the model's width and used as
    starting incumbents. Pairs without big-M rows are reformulated first.
    """
    cfg = cfg or slm.config
    started = time.perf_counter()
    if not slm.reformulated:
        slm = big_m_reformulate(slm)

    store = IncumbentStore()
    _heuristic_incumbents(slm, store, seeds, cfg, tol)

    workers = min(cfg.threads or default_threads(), cfg.node_batch)
    heap: List[Node] = [Node(0.0, 0, 0, {})]
    next_idx = 1
    nodes = 0
    status = None
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="bnb") as pool:
        while heap:
            incumbent = store.objective
            if relative_gap(incumbent, heap[0].bound) <= cfg.gap:
                status = BnbStatus.OPTIMAL
                break
            if nodes >= cfg.node_limit:
                status = BnbStatus.NODE_LIMIT
                break
            if time.perf_counter() - started > cfg.time_limit:
                status = BnbStatus.TIME_LIMIT
                break

            batch = []
            while heap and len(batch) < min(cfg.node_batch, cfg.node_limit - nodes):
                node = heapq.heappop(heap)
                if node.bound < incumbent:
                    batch.append(node)
            if not batch:
                continue

            outcomes = list(pool.map(lambda n: _process(slm, n, incumbent, cfg, tol), batch))
            for outcome in outcomes:
                nodes += 1
                node = outcome.node
                if node.idx == 0 and outcome.status == SolveStatus.INFEASIBLE and store.best is None:
                    raise _root_certificate(slm, tol)
                for candidate in outcome.candidates:
                    store.offer(candidate)
                broadcast(Signals.NODE_PROCESSED, node=node.idx, depth=node.depth,
                          bound=outcome.bound, incumbent=store.objective, open=len(heap))
                if outcome.branch is None or not outcome.bound < store.objective:
                    continue
                k, prefer = outcome.branch
                for side in (prefer, 1 - prefer):
                    heapq.heappush(heap, Node(outcome.bound, next_idx, node.depth + 1,
                                              {**node.fixings, k: side}))
                    next_idx += 1

    best = store.best
    if status is None:
        status = BnbStatus.OPTIMAL if best is not None else BnbStatus.INFEASIBLE
    if best is None and status != BnbStatus.INFEASIBLE:
        status = BnbStatus.NO_INCUMBENT

    open_bound = min((n.bound for n in heap), default=math.inf)
    bound = max(0.0, min(open_bound, store.objective))
    if not math.isfinite(bound):
        bound = max(0.0, min((n.bound for n in heap), default=0.0))
    solution = _solution(slm, best, status, bound, nodes, time.perf_counter() - started)
    broadcast(Signals.SOLVE_FINISHED, **solution.summary())
    logger.info("n=%d: %s after %d nodes, objective %.6g, gap %.3g",
                slm.group_width, status, nodes, solution.objective, solution.gap)
    return solution


def _solution(slm: SingleLevelModel, best: Optional[Candidate], status: BnbStatus,
              bound: float, nodes: int, wall_time: float) -> BilevelSolution:
    cfg = slm.config
    if best is None:
        return BilevelSolution(status=status, group_width=slm.group_width, objective=math.nan,
                               best_bound=bound, gap=math.inf, nodes=nodes, wall_time=wall_time,
                               soc_min_source=cfg.soc_min_source, warnings=list(slm.warnings))
    point = best.point
    if point is None:
        point = assemble_point(slm, best.kappa, best.schedule, strict=False)
    schedule = best.schedule
    schedule.owner = f"aev_n{slm.group_width}"
    return BilevelSolution(
        status=status,
        group_width=slm.group_width,
        objective=best.objective,
        best_bound=min(bound, best.objective),
        gap=relative_gap(best.objective, bound),
        nodes=nodes,
        wall_time=wall_time,
        kappa=best.kappa,
        envelope=apply_scaling(slm.agg, best.kappa, cfg.soc_min_source),
        schedule=schedule,
        m_activity=big_m_activity(slm, point) if point is not None else {},
        soc_min_source=cfg.soc_min_source,
        source=best.source,
        warnings=list(slm.warnings),
    )
