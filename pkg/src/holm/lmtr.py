"""Levenberg-Marquardt direction inside a nonmonotone trust-region acceptance loop.

The "trust region" is implicit: rejected trials raise lambda, which scales
the regularisation mu_hat = max(mu_min, lambda * mu) and so shortens d.
"""

from __future__ import annotations

import time

import numpy as np

from .core import (
    Counters,
    InnerLoopFailure,
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
    predicted_reduction,
    solve_lm_system,
)
from .lmls import _report

__all__ = ["lambda_update", "lmtr_solve", "predicted_reduction", "ratio_hat"]

PRED_FLOOR = 1e-300


def ratio_hat(D: float, psi_trial: float, pred: float) -> float:
    """Nonmonotone reduction over predicted reduction, (D - psi_trial) / pred."""
    if not pred > PRED_FLOOR:
        raise InnerLoopFailure(f"predicted reduction {pred!r} is not positive")
    return (D - psi_trial) / pred


def lambda_update(lam: float, r_hat: float, cfg: SolverConfig) -> float:
    if r_hat < cfg.upsilon1:
        return cfg.rho1 * lam
    if r_hat < cfg.upsilon2:
        return lam
    return cfg.rho2 * lam


def lmtr_solve(problem: NlsProblem, x0=None, cfg: SolverConfig | None = None, name: str = "lmtr") -> SolveReport:
    cfg = cfg or SolverConfig()
    x0 = problem.start() if x0 is None else np.asarray(x0, dtype=float)
    counters = Counters()
    trace: list[TraceRecord] = []
    state = {"ev": None, "k": 0}

    t0 = time.perf_counter()
    try:
        status = _iterate(problem, x0, cfg, counters, trace, state)
        message = ""
    except InnerLoopFailure as exc:
        status, message = Status.INNER_LOOP_FAILURE, str(exc)
    except NumericalBreakdown as exc:
        status, message = Status.NUMERICAL_BREAKDOWN, str(exc)
    elapsed = time.perf_counter() - t0
    return _report(name, problem, status, message, state, counters, trace, elapsed, x0)


def _iterate(problem, x0, cfg, counters, trace, state):
    ev = eval_merit(problem, x0, counters)
    ev0 = ev
    state["ev"] = ev
    D = ev.psi
    lam = cfg.lambda0
    k = 0
    while True:
        theta = cfg.theta_at(k)
        status = check_stop(ev, ev0, cfg.eps, cfg.rel, cfg.stop_rule)
        if status is None and k >= cfg.max_iter:
            status = Status.MAX_ITERATIONS
        if status is not None:
            trace.append(TraceRecord(k, ev.psi, ev.hnorm, ev.gnorm, D, theta, lam=lam))
            return status

        mu = compute_mu(cfg.mu, k, ev.hnorm, ev.gnorm)
        p = 0
        while True:
            mu_hat = max(cfg.mu_min, lam * mu)
            d = solve_lm_system(ev.J, ev.h, mu_hat)
            pred = predicted_reduction(ev.J, ev.h, d)
            trial = eval_residual(problem, ev.x + d, counters)
            r_hat = ratio_hat(D, trial.psi, pred)
            if r_hat >= cfg.upsilon1:
                break
            p += 1
            if p > cfg.max_inner:
                raise InnerLoopFailure(f"step still rejected after {cfg.max_inner} increases of lambda at k={k}", trial)
            # one factor rho1 per rejection, so lambda = rho1^p * lambda_k after p rejections
            lam *= cfg.rho1

        lam_next = lambda_update(lam, r_hat, cfg)
        trace.append(TraceRecord(k, ev.psi, ev.hnorm, ev.gnorm, D, theta, mu=mu, mu_hat=mu_hat,
                                 lam=lam, lam_next=lam_next, r_hat=r_hat, pred=pred, inner=p,
                                 step_norm=float(np.linalg.norm(d))))

        ev = attach_jacobian(problem, trial, counters)
        D = nonmonotone_update(D, theta, ev.psi)
        lam = lam_next
        k += 1
        state["ev"], state["k"] = ev, k
