"""Globally convergent Levenberg-Marquardt solvers for nonlinear equations."""

from .core import (
    ConfigError,
    InnerLoopFailure,
    LineSearchFailure,
    MeritEval,
    MuKind,
    MuStrategy,
    NlsProblem,
    NumericalBreakdown,
    SolveReport,
    SolverConfig,
    Status,
    check_stop,
    compute_mu,
    eval_merit,
    solve_lm_system,
    xi_schedule,
)
from .lmls import armijo_search, lmls_solve
from .lmtr import lambda_update, lmtr_solve, predicted_reduction, ratio_hat
from .solvers import SOLVER_NAMES, Solver, make_solver

__version__ = "0.1.0"
