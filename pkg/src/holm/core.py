"""
Shared numerical kernel for the Levenberg-Marquardt drivers.

Notation
--------
m ........ number of unknowns            (columns of J)
n ........ number of residuals           (rows of J)

h(x) ..... residual vector        R^m -> R^n
J(x) ..... Jacobian of h          n x m, rows are dh_i/dx
psi(x) ... merit value            1/2 |h(x)|^2
grad ..... gradient of psi        J^T h
mu ....... regularisation weight added to J^T J
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ConfigError(ValueError):
    """Invalid solver parameter or problem definition."""


class NumericalBreakdown(ArithmeticError):
    """Non-finite residual, Jacobian or merit value encountered."""

    def __init__(self, message: str, x=None):
        super().__init__(message)
        self.x = None if x is None else np.array(x, dtype=float)


class LineSearchFailure(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class InnerLoopFailure(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class Status(str, enum.Enum):
    CONVERGED_RESIDUAL = "ConvergedResidual"
    CONVERGED_GRADIENT = "ConvergedGradient"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH_FAILURE = "LineSearchFailure"
    INNER_LOOP_FAILURE = "InnerLoopFailure"
    NUMERICAL_BREAKDOWN = "NumericalBreakdown"

    @property
    def converged(self) -> bool:
        return self in (Status.CONVERGED_RESIDUAL, Status.CONVERGED_GRADIENT)


# -------------------------------------------------------------------------
#  Problems and evaluations
# -------------------------------------------------------------------------
@dataclass(frozen=True)
class NlsProblem:
    """Residual mapping h: R^m -> R^n with an analytic Jacobian.

    ``jacobian(x)`` returns the n x m matrix whose rows are the gradients
    of the residual components. ``x0`` is the default starting point.
    """

    name: str
    m: int
    n: int
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    x0: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ConfigError(f"{self.name}: dimensions must be positive, got m={self.m}, n={self.n}")

    def start(self) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(self.m)
        return np.array(self.x0, dtype=float)


@dataclass
class Counters:
    nf: int = 0
    nj: int = 0


@dataclass
class MeritEval:
    x: np.ndarray
    h: np.ndarray
    psi: float
    hnorm: float
    J: Optional[np.ndarray] = None
    grad: Optional[np.ndarray] = None
    gnorm: float = math.nan


def _check_finite(arr, what: str, x) -> None:
    data = arr.data if sp.issparse(arr) else arr
    if not np.all(np.isfinite(data)):
        raise NumericalBreakdown(f"non-finite {what}", x)


def eval_residual(problem: NlsProblem, x, counters: Optional[Counters] = None) -> MeritEval:
    """Residual and merit value at ``x``; counts one function evaluation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.m,):
        raise ConfigError(f"{problem.name}: point has shape {x.shape}, expected ({problem.m},)")
    h = np.asarray(problem.residual(x), dtype=float)
    if counters is not None:
        counters.nf += 1
    if h.shape != (problem.n,):
        raise ConfigError(f"{problem.name}: residual has shape {h.shape}, expected ({problem.n},)")
    _check_finite(h, "residual", x)
    hnorm = float(np.linalg.norm(h))
    with np.errstate(over="ignore"):
        psi = 0.5 * float(h @ h)
    if not math.isfinite(psi):
        raise NumericalBreakdown("non-finite merit value", x)
    return MeritEval(x=x, h=h, psi=psi, hnorm=hnorm)


def attach_jacobian(problem: NlsProblem, ev: MeritEval, counters: Optional[Counters] = None) -> MeritEval:
    """Complete a residual-only evaluation with J and grad = J^T h."""
    J = problem.jacobian(ev.x)
    if not sp.issparse(J):
        J = np.asarray(J, dtype=float)
    if counters is not None:
        counters.nj += 1
    if J.shape != (problem.n, problem.m):
        raise ConfigError(f"{problem.name}: Jacobian has shape {J.shape}, expected ({problem.n}, {problem.m})")
    _check_finite(J, "Jacobian", ev.x)
    grad = np.asarray(J.T @ ev.h).ravel()
    _check_finite(grad, "gradient", ev.x)
    ev.J = J
    ev.grad = grad
    ev.gnorm = float(np.linalg.norm(grad))
    return ev


def eval_merit(problem: NlsProblem, x, counters: Optional[Counters] = None, jacobian: bool = True) -> MeritEval:
    """Evaluate h, psi = 1/2 |h|^2 and (optionally) grad psi = J^T h at ``x``."""
    ev = eval_residual(problem, x, counters)
    if jacobian:
        attach_jacobian(problem, ev, counters)
    return ev


# -------------------------------------------------------------------------
#  Regularisation parameter
# -------------------------------------------------------------------------
def xi_schedule(k: int) -> tuple[float, float]:
    """Default (xi_k, omega_k) schedule: hold 0.95, then decay as 0.95^k down to 1e-10."""
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    p = 0.95 ** k
    xi = 0.95 if p > 1e-2 else max(p, 1e-10)
    return xi, 1.0 - xi


class MuKind(str, enum.Enum):
    ADAPTIVE = "adaptive"
    YF = "yf"
    FY = "fy"
    LEVMAR = "levmar"


@dataclass(frozen=True)
class MuStrategy:
    """How mu_k is built from |h(x_k)| and |grad psi(x_k)|.

    ``adaptive`` uses xi_k |h|^eta + omega_k |grad|^eta with (xi_k, omega_k)
    taken from ``schedule``; the baselines are |h|^2 (yf), |h| (fy) and
    |grad| (levmar).
    """

    kind: MuKind = MuKind.ADAPTIVE
    eta: float = 1.2
    schedule: Callable[[int], tuple[float, float]] = xi_schedule
    xi_bounds: tuple[float, float] = (1e-10, 1.0)
    omega_bounds: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", MuKind(self.kind))
        if self.kind is MuKind.ADAPTIVE:
            if not self.eta > 0:
                raise ConfigError(f"eta must be positive, got {self.eta}")
            (xlo, xhi), (wlo, whi) = self.xi_bounds, self.omega_bounds
            if not (0 <= xlo <= xhi and 0 <= wlo <= whi):
                raise ConfigError(f"invalid schedule bounds {self.xi_bounds}, {self.omega_bounds}")
            if not xlo + wlo > 0:
                raise ConfigError("xi_min + omega_min must be positive")

    @classmethod
    def adaptive(cls, eta: float = 1.2, schedule=xi_schedule) -> "MuStrategy":
        return cls(MuKind.ADAPTIVE, eta=eta, schedule=schedule)

    def weights(self, k: int) -> tuple[float, float]:
        xi, omega = self.schedule(k)
        (xlo, xhi), (wlo, whi) = self.xi_bounds, self.omega_bounds
        tol = 1e-15
        if not (xlo - tol <= xi <= xhi + tol and wlo - tol <= omega <= whi + tol):
            raise ConfigError(f"schedule left its range at k={k}: xi={xi}, omega={omega}")
        return xi, omega


def compute_mu(strategy: MuStrategy, k: int, hnorm: float, gnorm: float) -> float:
    if not (math.isfinite(hnorm) and math.isfinite(gnorm)):
        raise NumericalBreakdown("non-finite norm passed to compute_mu")
    if hnorm < 0 or gnorm < 0:
        raise ValueError("norms must be nonnegative")
    kind = strategy.kind
    if kind is MuKind.ADAPTIVE:
        xi, omega = strategy.weights(k)
        return xi * hnorm ** strategy.eta + omega * gnorm ** strategy.eta
    if kind is MuKind.YF:
        return hnorm ** 2
    if kind is MuKind.FY:
        return hnorm
    return gnorm


# -------------------------------------------------------------------------
#  LM subproblem
# -------------------------------------------------------------------------
def solve_lm_system(J, h, mu: float) -> np.ndarray:
    """Solve (J^T J + mu I) d = -J^T h for the LM direction.

    Dense Jacobians go through a Cholesky factorisation; sparse ones
    through conjugate gradients, with a dense fallback if CG stalls.
    """
    if not mu > 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    h = np.asarray(h, dtype=float)
    if sp.issparse(J):
        return _solve_sparse(J, h, mu)
    J = np.asarray(J, dtype=float)
    m = J.shape[1]
    A = J.T @ J
    A[np.diag_indices(m)] += mu
    b = -(J.T @ h)
    try:
        c = la.cho_factor(A, lower=False, check_finite=True)
        d = la.cho_solve(c, b)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalBreakdown(f"LM system factorisation failed: {exc}") from exc
    if not np.all(np.isfinite(d)):
        raise NumericalBreakdown("LM system produced a non-finite direction")
    return d


def _solve_sparse(J, h, mu):
    m = J.shape[1]
    b = -np.asarray(J.T @ h).ravel()
    op = spla.LinearOperator((m, m), matvec=lambda v: np.asarray(J.T @ (J @ v)).ravel() + mu * v, dtype=float)
    d, info = spla.cg(op, b, rtol=1e-12, atol=0.0, maxiter=10 * m)
    res = op.matvec(d) - b
    if info != 0 or np.linalg.norm(res) > 1e-10 * max(1.0, np.linalg.norm(b)):
        return solve_lm_system(J.toarray(), h, mu)
    return d


def lm_objective(J, h, mu, d) -> float:
    """phi(d) = |J d + h|^2 + mu |d|^2, minimised by solve_lm_system."""
    r = np.asarray(J @ d).ravel() + h
    return float(r @ r + mu * (d @ d))


def predicted_reduction(J, h, d) -> float:
    """q(0) - q(d) with q(d) = 1/2 |J d + h|^2."""
    h = np.asarray(h, dtype=float)
    r = np.asarray(J @ d).ravel() + h
    return 0.5 * float(h @ h) - 0.5 * float(r @ r)


# -------------------------------------------------------------------------
#  Stopping rule
# -------------------------------------------------------------------------
STOP_RULES = ("either", "both")


def check_stop(ev: MeritEval, ev0: MeritEval, eps: float, rel: float = 1e-12,
               rule: str = "either") -> Optional[Status]:
    """Termination test, or ``None`` to continue.

    ``either`` stops as soon as |h| or |grad psi| is below its threshold
    max(eps, rel * value at x0). ``both`` keeps iterating until both are,
    and then reports the residual test.
    """
    h_ok = ev.hnorm <= max(eps, rel * ev0.hnorm)
    g_ok = ev.gnorm <= max(eps, rel * ev0.gnorm)
    if rule == "either":
        if h_ok:
            return Status.CONVERGED_RESIDUAL
        if g_ok:
            return Status.CONVERGED_GRADIENT
        return None
    if rule == "both":
        return Status.CONVERGED_RESIDUAL if (h_ok and g_ok) else None
    raise ConfigError(f"unknown stop rule {rule!r}")


# -------------------------------------------------------------------------
#  Configuration and reporting
# -------------------------------------------------------------------------
Schedule = Union[float, Callable[[int], float]]


@dataclass(frozen=True)
class SolverConfig:
    """Every tunable of the two drivers. Defaults are the published settings."""

    eps: float = 1e-6
    rel: float = 1e-12
    max_iter: int = 100_000
    stop_rule: str = "either"
    mu: MuStrategy = field(default_factory=MuStrategy)
    # line search
    alpha_bar: float = 1.0
    rho: float = 0.5
    sigma: float = 1e-2
    max_backtracks: int = 60
    # trust region
    rho1: float = 2.0
    rho2: float = 0.5
    upsilon1: float = 1e-4
    upsilon2: float = 0.9
    lambda0: float = 1e-2
    mu_min: float = 1e-8
    max_inner: int = 60
    # nonmonotone weight
    theta: Schedule = 0.95
    theta_min: float = 0.0
    theta_max: float = 0.95

    def __post_init__(self):
        errors = []
        if not self.eps > 0:
            errors.append("eps > 0")
        if not self.rel >= 0:
            errors.append("rel >= 0")
        if not self.max_iter >= 0:
            errors.append("max_iter >= 0")
        if self.stop_rule not in STOP_RULES:
            errors.append(f"stop_rule in {STOP_RULES}")
        if not self.alpha_bar > 0:
            errors.append("alpha_bar > 0")
        if not 0 < self.rho < 1:
            errors.append("0 < rho < 1")
        if not 0 < self.sigma < 1:
            errors.append("0 < sigma < 1")
        if not self.max_backtracks >= 0:
            errors.append("max_backtracks >= 0")
        if not 0 < self.rho2 < 1 < self.rho1:
            errors.append("0 < rho2 < 1 < rho1")
        if not 0 < self.upsilon1 < self.upsilon2 < 1:
            errors.append("0 < upsilon1 < upsilon2 < 1")
        if not self.lambda0 > 0:
            errors.append("lambda0 > 0")
        if not self.mu_min > 0:
            errors.append("mu_min > 0")
        if not self.max_inner >= 0:
            errors.append("max_inner >= 0")
        if not 0 <= self.theta_min <= self.theta_max < 1:
            errors.append("0 <= theta_min <= theta_max < 1")
        if not callable(self.theta) and not self.theta_min <= self.theta <= self.theta_max:
            errors.append("theta in [theta_min, theta_max]")
        if errors:
            raise ConfigError("invalid solver configuration: " + ", ".join(errors))

    def theta_at(self, k: int) -> float:
        t = self.theta(k) if callable(self.theta) else self.theta
        if not self.theta_min <= t <= self.theta_max:
            raise ConfigError(f"theta schedule left [{self.theta_min}, {self.theta_max}] at k={k}: {t}")
        return float(t)


@dataclass
class TraceRecord:
    """State at x_k and the step taken from it (step fields empty on the last record)."""

    k: int
    psi: float
    hnorm: float
    gnorm: float
    D: float
    theta: float
    mu: float = math.nan
    mu_hat: float = math.nan
    alpha: float = math.nan
    backtracks: int = 0
    grad_dot_d: float = math.nan
    lam: float = math.nan
    lam_next: float = math.nan
    r_hat: float = math.nan
    pred: float = math.nan
    inner: int = 0
    step_norm: float = math.nan


TRACE_FIELDS = [f for f in TraceRecord.__dataclass_fields__]


@dataclass
class SolveReport:
    solver: str
    problem: str
    status: Status
    x_final: np.ndarray
    hnorm_final: float
    gnorm_final: float
    n_iter: int
    n_f: int
    n_j: int
    elapsed: float
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status.converged

    def to_dict(self, with_trace: bool = False) -> dict:
        out = {
            "solver": self.solver,
            "problem": self.problem,
            "status": self.status.value,
            "x_final": [float(v) for v in self.x_final],
            "hnorm_final": _finite_or_none(self.hnorm_final),
            "gnorm_final": _finite_or_none(self.gnorm_final),
            "N_i": self.n_iter,
            "N_f": self.n_f,
            "N_j": self.n_j,
            "elapsed": self.elapsed,
            "message": self.message,
        }
        if with_trace:
            out["trace"] = [_jsonable(asdict(r)) for r in self.trace]
        return out


def _finite_or_none(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def _jsonable(rec: dict) -> dict:
    return {k: _finite_or_none(v) for k, v in rec.items()}


def nonmonotone_update(D_prev: float, theta_prev: float, psi_new: float) -> float:
    """D_k = (1 - theta_{k-1}) psi(x_k) + theta_{k-1} D_{k-1}."""
    assert psi_new <= D_prev, f"merit value {psi_new!r} above reference {D_prev!r}"
    D = (1.0 - theta_prev) * psi_new + theta_prev * D_prev
    # the convex combination can drift one ulp outside [psi_new, D_prev]
    return min(max(D, psi_new), D_prev)
