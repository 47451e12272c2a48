"""Proximal subgradient solvers for structured fractional programs."""

from .operators import LinearOperator, dense_matrix, grad2d, identity, mini_radon, row_vector
from .problems import (FractionalProblem, ModelViolation, make_ct, make_l1_sk,
                       make_portfolio, make_sharpe, phi, theta)
from .solver import SolverConfig, SolveResult, solve, solve_fixed, solve_linesearch

__version__ = "0.1.0"
