"""Min-max LQ control of multi-model linear systems under stepwise controls."""

from ._errors import NotPositiveDefiniteError
from .discretize import DiscretizationError, DiscretizedPlant, discretize_problem, interval_matrices
from .kernels import BACKEND
from .model import (
    CostSpec,
    MultiModelProblem,
    PlantModel,
    ProblemError,
    ProblemFormatError,
    ProblemValidationError,
    SolverParams,
    SwitchingSequence,
    load_problem,
    loads_problem,
    shipped_problem_path,
    validate,
)
from .riccati import ExtendedSystem, backward_riccati, extend, objective
from .simplex_opt import kw_gradient, project_simplex, simplex_lp_max, solve_mu
from .simulate import cross_cost_table, evaluate_costs, receding_horizon, simulate_plant, single_model_optimal
from .solver import ControlSolution, extract_control, solve_minmax

__version__ = "0.1.0"
