"""Small analytic test problems with known zeros."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..core import NlsProblem
from .network import BioNetwork

LINEAR_A = np.array([[3.0, 1.0], [1.0, 2.0]])
LINEAR_B = np.array([1.0, 2.0])


def linear() -> NlsProblem:
    """h(x) = A x - b with A nonsingular."""
    return NlsProblem("linear", 2, 2, lambda x: LINEAR_A @ x - LINEAR_B, lambda x: LINEAR_A.copy(),
                      x0=np.zeros(2), meta={"solution": np.linalg.solve(LINEAR_A, LINEAR_B)})


def cubic() -> NlsProblem:
    """h(x) = x^3: the zero is degenerate (J = 0 there), Hoelder order 1/3."""
    return NlsProblem("cubic", 1, 1, lambda x: x ** 3, lambda x: np.array([[3.0 * x[0] ** 2]]),
                      x0=np.ones(1), meta={"solution": np.zeros(1)})


def circle() -> NlsProblem:
    """h(x) = x1^2 + x2^2 - 1, whose zeros form the unit circle."""
    return NlsProblem("circle", 2, 1, lambda x: np.array([x @ x - 1.0]), lambda x: 2.0 * x[None, :],
                      x0=np.array([2.0, 0.0]))


def rosenbrock_residual() -> NlsProblem:
    """h(x) = (10 (x2 - x1^2), 1 - x1); zero residual at (1, 1) with J nonsingular."""
    def res(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    def jac(x):
        return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])

    return NlsProblem("rosenbrock_residual", 2, 2, res, jac, x0=np.array([-1.2, 1.0]),
                      meta={"solution": np.ones(2)})


def exp_monotone(m: int = 3) -> NlsProblem:
    """h(x) = exp(x) - 1 componentwise, a strictly monotone mapping."""
    return NlsProblem("exp_monotone", m, m, lambda x: np.expm1(x), lambda x: np.diag(np.exp(x)),
                      x0=np.linspace(1.0, -1.0, m), meta={"solution": np.zeros(m)})


def ab_network(l0: float = 2.0) -> BioNetwork:
    """A <=> B with unit rate constants."""
    F = sp.csr_matrix(np.array([[1], [0]]))
    R = sp.csr_matrix(np.array([[0], [1]]))
    return BioNetwork("bio_ab", F, R, np.zeros(2), np.array([l0]))


def chain3_network() -> BioNetwork:
    """A <=> B <=> C with unit rate constants and c0 = (1, 1, 1)."""
    F = sp.csr_matrix(np.array([[1, 0], [0, 1], [0, 0]]))
    R = sp.csr_matrix(np.array([[0, 0], [1, 0], [0, 1]]))
    return BioNetwork.from_c0("bio_chain3", F, R, np.zeros(4), np.ones(3))


def bio_ab() -> NlsProblem:
    return ab_network().problem()


def bio_chain3() -> NlsProblem:
    return chain3_network().problem()


BUILTINS = {
    "linear": linear,
    "cubic": cubic,
    "circle": circle,
    "rosenbrock_residual": rosenbrock_residual,
    "exp_monotone": exp_monotone,
    "bio_ab": bio_ab,
    "bio_chain3": bio_chain3,
}


def builtin_problem(name: str) -> NlsProblem:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(BUILTINS)}") from None
