from .config import BilevelConfig, ObjectiveNorm
from .inner import solve_aev, try_inner
from .kkt import ComplementarityPair, SingleLevelModel, build_single_level, outer_objective, pin_kappa
from .bigm import big_m_activity, big_m_reformulate, dual_big_m, node_model, primal_big_m, with_big_m
from .solution import BilevelSolution, BnbStatus, read_solution_json, relative_gap, write_solution_json
from .heuristics import Candidate, assemble_point, evaluate, kappa_search, polish, seed_candidates
from .bnb import IncumbentStore, Node, branching_pair, solve_bilevel
from .validate import ValidationReport, validate_solution
