"""Proximal gradient descent ascent for composite nonconvex-concave minimax problems."""
from ._core import BACKEND
from .oracle import ExactOracle, StochasticOracle, minibatch_grad, sample_grad_x, sample_grad_y
from .problems import (
    IterateState,
    MinimaxProblem,
    ProblemConstants,
    make_bilinear_problem,
    make_dro_logistic_problem,
    make_fair_learning_problem,
    make_problem,
    make_toy_problem,
)
from .prox import ProxMap, project_box, project_simplex
from .solvers import (
    RunResult,
    SolverConfig,
    StepsizePlan,
    TraceRecord,
    alt_gda_step,
    extragradient_step,
    gdmax_step,
    run,
    schedule_nc_concave,
    schedule_nc_concave_stoch,
    schedule_nc_strongly_concave,
    schedule_nc_strongly_concave_stoch,
    sim_gda_step,
)
from .stationarity import (
    best_response,
    danskin_gradient,
    delta_diagnostics,
    max_value,
    moreau_gradient,
    near_stationary_witness,
    prox_residual,
    psi_value,
)

__version__ = "0.1.0"
