from .duality import DualityReport, check_duality, dual_objective
from .lp import InfeasibilityReport, find_infeasibility, is_feasible, solve_lp
from .lp_format import export_model, load_lp, read_lp, save_lp, write_lp
from .model import LinearModel, ModelBuilder, Sense
from .mps import load_mps, read_mps, save_mps, write_mps
from .qp import solve_qp
from .scaling import ModelScaling, compute_scaling
from .solution import DEFAULT_TOLERANCES, LpSolution, SolveStatus, ToleranceConfig
