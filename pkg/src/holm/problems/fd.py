"""Finite-difference check of analytic Jacobians."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..core import NlsProblem


def fd_jacobian(problem: NlsProblem, x, step: float | None = None) -> np.ndarray:
    """Central differences (h(x + s e_i) - h(x - s e_i)) / 2s, one column per unknown."""
    x = np.asarray(x, dtype=float)
    s = 1e-6 * max(1.0, float(np.linalg.norm(x))) if step is None else float(step)
    if not s > 0:
        raise ValueError("finite-difference step must be positive")
    J = np.empty((problem.n, problem.m))
    for i in range(problem.m):
        e = np.zeros(problem.m)
        e[i] = s
        J[:, i] = (np.asarray(problem.residual(x + e)) - np.asarray(problem.residual(x - e))) / (2.0 * s)
    return J


def jacobian_error(problem: NlsProblem, x, step: float | None = None) -> float:
    """Relative Frobenius distance between the analytic and FD Jacobians."""
    J = problem.jacobian(np.asarray(x, dtype=float))
    J = J.toarray() if sp.issparse(J) else np.asarray(J, dtype=float)
    Jfd = fd_jacobian(problem, x, step)
    return float(np.linalg.norm(J - Jfd) / max(1.0, np.linalg.norm(Jfd)))


def check_jacobian(problem: NlsProblem, rng: np.random.Generator, points: int = 10,
                   low: float = -1.0, high: float = 1.0) -> float:
    """Largest relative error over ``points`` uniform random points in [low, high]^m."""
    worst = 0.0
    for _ in range(points):
        worst = max(worst, jacobian_error(problem, rng.uniform(low, high, problem.m)))
    return worst
