"""Criticality-measure based discretization error studies on the unit interval.

Solve discretized composite control problems min f(u) + beta*||u||_L1 + box
indicator with proximal-gradient or conditional-gradient methods, evaluate
normal-map / fixed-point / gap criticality measures on nested reference
meshes, and verify the measured errors against calibrated budgets and
least-squares convergence rates.
"""

from .criticality import (
    CriticalityReport,
    ErrorBudget,
    canonical_measure,
    canonical_measure_ref,
    gap_measure,
    gap_measure_ref,
    normal_map_measure,
    normal_map_measure_ref,
    normal_map_point,
    reference_feasible_point,
)
from .fe_space import (
    CellFn,
    NodalFn,
    SampledFn,
    integrate,
    l2_distance,
    l2_inner,
    project_dg0,
    projection_error_bound,
)
from .mesh import Mesh1D, common_refinement, is_nested, refine_nested, uniform
from .pde import (
    LinearFunctionalProblem,
    ReducedProblem,
    StateSolveReport,
    estimate_gradient_modulus,
    rho_grad,
)
from .problems import FUNCTION_REGISTRY, PROBLEM_IDS, build_problem, make_function
from .regularizer import (
    CompositeRegularizer,
    discretize_bounds,
    prox_continuous_at_cellfn,
    prox_discrete,
    project_box,
    rho_prox,
)
from .solvers import SolveConfig, SolveResult, frank_wolfe, prox_grad, solve
from .study import RateFit, StudyConfig, StudyOutcome, build_budget, fit_rate, run_study

__version__ = "0.1.0"

__all__ = [
    "Mesh1D",
    "uniform",
    "refine_nested",
    "is_nested",
    "common_refinement",
    "SampledFn",
    "CellFn",
    "NodalFn",
    "project_dg0",
    "l2_inner",
    "l2_distance",
    "integrate",
    "projection_error_bound",
    "CompositeRegularizer",
    "discretize_bounds",
    "prox_discrete",
    "prox_continuous_at_cellfn",
    "project_box",
    "rho_prox",
    "ReducedProblem",
    "LinearFunctionalProblem",
    "StateSolveReport",
    "rho_grad",
    "estimate_gradient_modulus",
    "normal_map_measure",
    "normal_map_measure_ref",
    "canonical_measure",
    "canonical_measure_ref",
    "gap_measure",
    "gap_measure_ref",
    "normal_map_point",
    "reference_feasible_point",
    "ErrorBudget",
    "CriticalityReport",
    "SolveConfig",
    "SolveResult",
    "prox_grad",
    "frank_wolfe",
    "solve",
    "StudyConfig",
    "StudyOutcome",
    "RateFit",
    "fit_rate",
    "build_budget",
    "run_study",
    "build_problem",
    "make_function",
    "FUNCTION_REGISTRY",
    "PROBLEM_IDS",
]
