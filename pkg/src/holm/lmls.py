"""Levenberg-Marquardt direction with a nonmonotone Armijo line search."""

from __future__ import annotations

import logging
import time

import numpy as np

from .core import (
    Counters,
    LineSearchFailure,
    MeritEval,
    NlsProblem,
    NumericalBreakdown,
    SolveReport,
    SolverConfig,
    Status,
    TraceRecord,
    attach_jacobian,
    check_stop,
    compute_mu,
    eval_merit,
    eval_residual,
    nonmonotone_update,
    solve_lm_system,
    xi_schedule,
)

__all__ = ["armijo_search", "lmls_solve", "nonmonotone_update", "xi_schedule"]

log = logging.getLogger(__name__)


def armijo_search(problem: NlsProblem, x, d, grad_dot_d: float, D: float, cfg: SolverConfig,
                  counters: Counters | None = None):
    """Backtrack alpha = rho^l * alpha_bar until psi(x + alpha d) <= D + sigma alpha grad^T d.

    Returns ``(alpha, l, trials)`` where ``trials`` holds every residual
    evaluation made, the accepted one last.
    """
    if not grad_dot_d < 0:
        raise ValueError(f"direction is not a descent direction (grad^T d = {grad_dot_d!r})")
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    trials: list[MeritEval] = []
    for ell in range(cfg.max_backtracks + 1):
        alpha = cfg.rho ** ell * cfg.alpha_bar
        ev = eval_residual(problem, x + alpha * d, counters)
        trials.append(ev)
        if ev.psi <= D + cfg.sigma * alpha * grad_dot_d:
            return alpha, ell, trials
    best = min(trials, key=lambda e: e.psi)
    raise LineSearchFailure(f"no acceptable step after {cfg.max_backtracks} backtracks", best)


def lmls_solve(problem: NlsProblem, x0=None, cfg: SolverConfig | None = None, name: str = "lmls") -> SolveReport:
    cfg = cfg or SolverConfig()
    x0 = problem.start() if x0 is None else np.asarray(x0, dtype=float)
    counters = Counters()
    trace: list[TraceRecord] = []
    state = {"ev": None, "k": 0}

    t0 = time.perf_counter()
    try:
        status = _iterate(problem, x0, cfg, counters, trace, state)
        message = ""
    except LineSearchFailure as exc:
        status, message = Status.LINE_SEARCH_FAILURE, str(exc)
    except NumericalBreakdown as exc:
        status, message = Status.NUMERICAL_BREAKDOWN, str(exc)
    elapsed = time.perf_counter() - t0
    return _report(name, problem, status, message, state, counters, trace, elapsed, x0)


def _iterate(problem, x0, cfg, counters, trace, state):
    ev = eval_merit(problem, x0, counters)
    ev0 = ev
    state["ev"] = ev
    D = ev.psi
    k = 0
    while True:
        theta = cfg.theta_at(k)
        status = check_stop(ev, ev0, cfg.eps, cfg.rel, cfg.stop_rule)
        if status is None and k >= cfg.max_iter:
            status = Status.MAX_ITERATIONS
        if status is not None:
            trace.append(TraceRecord(k, ev.psi, ev.hnorm, ev.gnorm, D, theta))
            return status

        mu = compute_mu(cfg.mu, k, ev.hnorm, ev.gnorm)
        if not mu > 0:
            raise NumericalBreakdown(f"regularisation parameter vanished at k={k}", ev.x)
        d = solve_lm_system(ev.J, ev.h, mu)
        gd = float(ev.grad @ d)
        if not gd < 0:
            raise LineSearchFailure(f"LM direction lost descent at k={k} (grad^T d = {gd!r})")
        alpha, ell, trials = armijo_search(problem, ev.x, d, gd, D, cfg, counters)
        trace.append(TraceRecord(k, ev.psi, ev.hnorm, ev.gnorm, D, theta, mu=mu, alpha=alpha,
                                 backtracks=ell, grad_dot_d=gd, step_norm=alpha * float(np.linalg.norm(d))))

        ev = attach_jacobian(problem, trials[-1], counters)
        D = nonmonotone_update(D, theta, ev.psi)
        k += 1
        state["ev"], state["k"] = ev, k


def _report(name, problem, status, message, state, counters, trace, elapsed, x0):
    ev = state["ev"]
    if ev is None:
        x, hn, gn = np.asarray(x0, dtype=float), float("nan"), float("nan")
    else:
        x, hn, gn = ev.x, ev.hnorm, ev.gnorm
    if message:
        log.info("%s on %s stopped with %s: %s", name, problem.name, status.value, message)
    return SolveReport(
        solver=name, problem=problem.name, status=status, x_final=np.array(x),
        hnorm_final=hn, gnorm_final=gn, n_iter=state["k"], n_f=counters.nf, n_j=counters.nj,
        elapsed=elapsed, trace=trace, message=message,
    )
