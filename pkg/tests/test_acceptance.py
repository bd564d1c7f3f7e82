"""Acceptance gate: one PASS/FAIL line per primary criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import csv
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import profile_by_counting

from holm.bench import MEASURES, MetricsRow, MetricsTable, performance_profile, performance_ratios, read_profile_csv
from holm.cli import main
from holm.core import SolverConfig, Status, eval_merit, predicted_reduction, solve_lm_system
from holm.lmls import lmls_solve
from holm.lmtr import lambda_update, lmtr_solve
from holm.problems import BUILTINS, ab_network, builtin_problem, chain3_network, check_jacobian
from holm.solvers import SOLVER_NAMES

pytestmark = pytest.mark.acceptance

CFG = SolverConfig()


def verdict(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_descent_invariant():
    rng = np.random.default_rng(1)
    worst, ascent = 0.0, 0
    t0 = time.perf_counter()
    for i in range(1000):
        n, m = rng.integers(1, 9, size=2)
        J = rng.standard_normal((n, m))
        h = rng.standard_normal(n)
        if i % 100 == 0 and n > m:
            # h orthogonal to range(J): zero gradient, d must vanish
            q, _ = np.linalg.qr(J, mode="complete")
            h = q[:, m:] @ rng.standard_normal(n - m)
        mu = 10.0 ** rng.uniform(-3, 1)
        g = J.T @ h
        d = solve_lm_system(J, h, mu)
        res = np.linalg.norm(J.T @ (J @ d) + mu * d + g)
        worst = max(worst, res / max(1.0, np.linalg.norm(g)))
        if np.linalg.norm(g) > 1e-12 and not g @ d < 0:
            ascent += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and ascent == 0 and elapsed < 5.0
    verdict("descent invariant", ok,
            f"max scaled residual {worst:.2e} (<= 1e-10), non-descent {ascent}, {elapsed:.2f}s (< 5s)")


def test_nonmonotone_bookkeeping():
    worst, violations = 0.0, 0
    for name in BUILTINS:
        tr = lmls_solve(builtin_problem(name)).trace
        for a, b in zip(tr, tr[1:]):
            if not b.psi <= b.D <= a.D:
                violations += 1
            lhs, rhs = a.D - b.D, (1 - a.theta) * (a.D - b.psi)
            scale = max(abs(lhs), abs(rhs))
            if scale > 0:
                worst = max(worst, abs(lhs - rhs) / scale)
    verdict("nonmonotone bookkeeping", violations == 0 and worst <= 1e-12,
            f"ordering violations {violations}, max telescoping error {worst:.1e} (<= 1e-12)")


def test_convergence_suite():
    t0 = time.perf_counter()
    failed = []
    for name in BUILTINS:
        for solve in (lmls_solve, lmtr_solve):
            rep = solve(builtin_problem(name), None, SolverConfig(eps=1e-6, max_iter=100_000))
            if not rep.converged:
                failed.append(f"{rep.solver}/{name}:{rep.status.value}")
    elapsed = time.perf_counter() - t0
    verdict("convergence suite", not failed and elapsed < 30.0,
            f"{2 * len(BUILTINS) - len(failed)}/{2 * len(BUILTINS)} converged {failed or ''}, "
            f"{elapsed:.2f}s (< 30s)")


def test_superlinear_rosenbrock():
    p = builtin_problem("rosenbrock_residual")
    n = lmls_solve(p).n_iter
    xstar = np.ones(2)
    errs = [np.linalg.norm(lmls_solve(p, None, SolverConfig(max_iter=k)).x_final - xstar) for k in range(n + 1)]
    ratios = [b / a for a, b in zip(errs, errs[1:]) if a > 0]
    last = ratios[-3:]
    ok = len(last) == 3 and all(r < 0.5 for r in last) and last[0] > last[1] > last[2]
    verdict("superlinear rosenbrock", ok, "last error ratios " + ", ".join(f"{r:.2e}" for r in last))


def test_exp_monotone_unique_solution():
    rng = np.random.default_rng(7)
    p = builtin_problem("exp_monotone")
    statuses = []
    for _ in range(20):
        x0 = rng.uniform(-2, 2, size=p.m)
        statuses += [lmls_solve(p, x0).status, lmtr_solve(p, x0).status]
    bad = [s.value for s in statuses if s is not Status.CONVERGED_RESIDUAL]
    verdict("exp_monotone residual convergence", not bad,
            f"{len(statuses) - len(bad)}/{len(statuses)} runs ConvergedResidual {bad or ''}")


def test_bio_mapping():
    ab = ab_network()
    rep = lmls_solve(ab.problem(), np.array([1.0, -1.0]))
    ab_err = float(np.max(np.abs(np.exp(rep.x_final) - 1.0)))
    chain = chain3_network()
    rng = np.random.default_rng(3)
    # the default start already solves chain3, so also start from random points
    runs = [solve(chain.problem(), x0) for x0 in [None, *rng.uniform(-2, 2, size=(5, chain.m))]
            for solve in (lmls_solve, lmtr_solve)]
    ch_ok = all(r.converged for r in runs)
    ch_h = max(r.hnorm_final for r in runs)
    fd = max(check_jacobian(net.problem(), rng, points=10) for net in (ab, chain))
    ok = ab_err <= 1e-8 and ch_ok and ch_h <= 1e-6 and fd <= 1e-5
    verdict("bio mapping", ok,
            f"A<->B |exp(x)-1| {ab_err:.1e} (<= 1e-8), chain3 {len(runs)} runs max |h| {ch_h:.1e} (<= 1e-6), "
            f"FD error {fd:.1e} (<= 1e-5)")


def test_trust_region_mechanics():
    mu_low = r_low = branch = 0
    for name in BUILTINS:
        p = builtin_problem(name)
        rep = lmtr_solve(p)
        x = p.start()
        for rec in rep.trace[:-1]:
            mu_low += rec.mu_hat < 1e-8
            branch += rec.lam_next != lambda_update(rec.lam, rec.r_hat, CFG)
            ev = eval_merit(p, x)
            d = solve_lm_system(ev.J, ev.h, rec.mu_hat)
            x = x + d
            psi = 0.5 * float(np.sum(p.residual(x) ** 2))
            r_low += (rec.D - psi) / predicted_reduction(ev.J, ev.h, d) < CFG.upsilon1
    verdict("trust-region mechanics", mu_low == r_low == branch == 0,
            f"mu_hat < 1e-8: {mu_low}, re-evaluated r_hat < upsilon1: {r_low}, lambda rule mismatches: {branch}")


def _synthetic_table(rng):
    n_p, n_s = rng.integers(1, 12), rng.integers(1, 6)
    rows = []
    for p in range(n_p):
        for s in range(n_s):
            status = "ConvergedResidual" if rng.random() > 0.2 else "MaxIterations"
            ni = int(rng.integers(0, 50))
            rows.append(MetricsRow(f"p{p}", f"s{s}", status, ni, ni + int(rng.integers(1, 30)),
                                   float(rng.uniform(1e-4, 1.0)), 0.0, 0.0))
    return MetricsTable(rows)


def test_profile_oracle():
    rng = np.random.default_rng(11)
    mismatches = bad_shape = 0
    for _ in range(50):
        table = _synthetic_table(rng)
        for m in MEASURES:
            ratios = performance_ratios(table, m)
            curves = performance_profile(ratios)
            expected = profile_by_counting(ratios.values, curves.tau)
            got = np.array([curves.rho[s] for s in ratios.solvers])
            mismatches += not np.array_equal(got, expected)
            bad_shape += bool(np.any(np.diff(got, axis=1) < 0) or got.min() < 0 or got.max() > 1)
    verdict("profile oracle", mismatches == bad_shape == 0,
            f"50 tables x {len(MEASURES)} measures: {mismatches} mismatches, {bad_shape} non-monotone/out of range")


def _valid_curve(tau, rho):
    return (tau[0] == 1.0 and np.all(np.diff(tau) > 0) and np.all(np.diff(rho) >= 0)
            and rho.min() >= 0 and rho.max() <= 1)


def test_tune_eta_harness(tmp_path, capsys):
    with capsys.disabled():
        code = main(["tune-eta", "--out", str(tmp_path)])
    problems = []
    for method in ("lmls", "lmtr"):
        for m in MEASURES:
            curves = read_profile_csv(tmp_path / method / f"profile_{m}.csv")
            if len(curves.rho) != 5 or not all(_valid_curve(curves.tau, r) for r in curves.rho.values()):
                problems.append(f"{method}/{m}")
    verdict("eta tuning harness", code == 0 and not problems,
            f"exit {code}, 5 valid monotone curves for 2 methods x {len(MEASURES)} measures {problems or ''}")


def test_five_solver_grid(tmp_path, capsys):
    with capsys.disabled():
        code = main(["bench", "--out", str(tmp_path)])
    with open(tmp_path / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    mixed_ok = all(int(r["mixed"]) == int(r["N_f"]) + 3 * int(r["N_i"]) for r in rows)
    grid = {(r["problem"], r["solver"]) for r in rows} == {(p, s) for p in BUILTINS for s in SOLVER_NAMES}
    verdict("five-solver grid", code == 0 and len(rows) == 35 and grid and mixed_ok,
            f"exit {code}, {len(rows)} rows (35), full grid {grid}, mixed = N_f + 3 N_i {mixed_ok}")
