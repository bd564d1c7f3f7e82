import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holm.core import (
    ConfigError,
    Counters,
    MuKind,
    MuStrategy,
    NlsProblem,
    NumericalBreakdown,
    SolverConfig,
    Status,
    check_stop,
    compute_mu,
    eval_merit,
    lm_objective,
    solve_lm_system,
)
from conftest import cubic_problem, identity_problem
from oracles import inverse_2x2


def const(xi, omega):
    return lambda k: (xi, omega)


ANY_WEIGHTS = dict(xi_bounds=(0.5, 1.0), omega_bounds=(0.0, 1.0))


class TestEvalMerit:
    def test_identity(self):
        c = Counters()
        ev = eval_merit(identity_problem(), np.array([3.0, 4.0]), c)
        assert ev.psi == 12.5
        np.testing.assert_array_equal(ev.grad, [3.0, 4.0])
        assert ev.hnorm == 5.0
        assert (c.nf, c.nj) == (1, 1)

    def test_zero_residual(self):
        ev = eval_merit(identity_problem(), np.zeros(2))
        assert ev.psi == 0.0
        np.testing.assert_array_equal(ev.grad, 0.0)

    def test_cubic_hand_values(self):
        # psi = x^6 / 2 = 32, psi' = 3 x^5 = 96 at x = 2
        ev = eval_merit(cubic_problem(), np.array([2.0]))
        assert ev.psi == 32.0
        assert ev.grad[0] == 96.0

    def test_residual_only_skips_jacobian(self):
        c = Counters()
        ev = eval_merit(identity_problem(), np.ones(2), c, jacobian=False)
        assert ev.grad is None and (c.nf, c.nj) == (1, 0)

    def test_nonfinite_residual_breaks_down(self):
        p = NlsProblem("bad", 1, 1, lambda x: np.array([np.nan]), lambda x: np.ones((1, 1)))
        with pytest.raises(NumericalBreakdown) as info:
            eval_merit(p, np.array([0.5]))
        np.testing.assert_array_equal(info.value.x, [0.5])

    def test_nonfinite_jacobian_breaks_down(self):
        p = NlsProblem("bad", 1, 1, lambda x: x, lambda x: np.array([[np.inf]]))
        with pytest.raises(NumericalBreakdown):
            eval_merit(p, np.array([1.0]))

    def test_shape_mismatch(self):
        p = NlsProblem("bad", 2, 2, lambda x: x, lambda x: np.eye(3))
        with pytest.raises(ConfigError):
            eval_merit(p, np.ones(2))

    @given(arrays(float, 5, elements=st.floats(-1e3, 1e3)))
    def test_psi_is_half_squared_norm(self, x):
        ev = eval_merit(identity_problem(5), x)
        assert math.isclose(ev.psi, 0.5 * ev.hnorm ** 2, rel_tol=1e-15, abs_tol=1e-300)


class TestComputeMu:
    def test_degenerate_weights(self):
        s = MuStrategy(MuKind.ADAPTIVE, eta=1.0, schedule=const(1.0, 0.0), **ANY_WEIGHTS)
        assert compute_mu(s, 0, 2.0, 5.0) == 2.0

    def test_formula(self):
        s = MuStrategy(MuKind.ADAPTIVE, eta=2.0, schedule=const(0.5, 0.5), **ANY_WEIGHTS)
        assert compute_mu(s, 0, 2.0, 1.0) == 2.5

    @pytest.mark.parametrize("kind, hnorm, gnorm, expected", [
        ("yf", 3.0, 1.0, 9.0),
        ("fy", 3.0, 1.0, 3.0),
        ("levmar", 1.0, 7.0, 7.0),
    ])
    def test_baselines(self, kind, hnorm, gnorm, expected):
        assert compute_mu(MuStrategy(kind), 0, hnorm, gnorm) == expected

    @given(st.floats(0, 1e6), st.floats(0, 1e6))
    def test_adaptive_eta2_without_gradient_term_is_yf(self, hnorm, gnorm):
        s = MuStrategy(MuKind.ADAPTIVE, eta=2.0, schedule=const(1.0, 0.0), **ANY_WEIGHTS)
        assert compute_mu(s, 3, hnorm, gnorm) == compute_mu(MuStrategy("yf"), 3, hnorm, gnorm)

    def test_nonpositive_eta_rejected(self):
        with pytest.raises(ConfigError):
            MuStrategy.adaptive(eta=0.0)

    def test_schedule_outside_bounds_rejected(self):
        s = MuStrategy(MuKind.ADAPTIVE, schedule=const(2.0, 0.0))
        with pytest.raises(ConfigError):
            compute_mu(s, 0, 1.0, 1.0)

    def test_nonfinite_norm(self):
        with pytest.raises(NumericalBreakdown):
            compute_mu(MuStrategy(), 0, math.inf, 1.0)


class TestSolveLmSystem:
    def test_identity(self):
        d = solve_lm_system(np.eye(2), np.array([1.0, 0.0]), 1.0)
        np.testing.assert_allclose(d, [-0.5, 0.0], atol=1e-15)

    @pytest.mark.parametrize("shape", [(1, 1), (3, 2), (2, 4)])
    def test_zero_jacobian(self, shape):
        d = solve_lm_system(np.zeros(shape), np.ones(shape[0]), 1.0)
        np.testing.assert_array_equal(d, np.zeros(shape[1]))

    def test_matches_adjugate_inverse(self, rng):
        J = rng.normal(size=(3, 2))
        h = rng.normal(size=3)
        mu = 0.1
        expected = -inverse_2x2(J.T @ J + mu * np.eye(2)) @ (J.T @ h)
        np.testing.assert_allclose(solve_lm_system(J, h, mu), expected, rtol=1e-12)

    @pytest.mark.parametrize("mu", [0.0, -1.0])
    def test_nonpositive_mu(self, mu):
        with pytest.raises(ConfigError):
            solve_lm_system(np.eye(2), np.ones(2), mu)

    def test_sparse_route_agrees_with_dense(self, rng):
        import scipy.sparse as sp
        J = sp.random(30, 20, density=0.2, random_state=1, format="csr")
        h = rng.normal(size=30)
        d_sparse = solve_lm_system(J, h, 1e-2)
        d_dense = solve_lm_system(J.toarray(), h, 1e-2)
        np.testing.assert_allclose(d_sparse, d_dense, rtol=1e-8, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(-3, 1))
    def test_descent_and_residual(self, m, n, seed, logmu):
        r = np.random.default_rng(seed)
        J, h, mu = r.normal(size=(n, m)), r.normal(size=n), 10.0 ** logmu
        d = solve_lm_system(J, h, mu)
        g = J.T @ h
        res = (J.T @ J + mu * np.eye(m)) @ d + g
        assert np.linalg.norm(res) <= 1e-10 * max(1.0, np.linalg.norm(g))
        if np.linalg.norm(g) > 0:
            assert g @ d < 0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_minimises_subproblem(self, m, n, seed):
        r = np.random.default_rng(seed)
        J, h, mu = r.normal(size=(n, m)), r.normal(size=n), 10.0 ** r.uniform(-2, 1)
        d = solve_lm_system(J, h, mu)
        best = lm_objective(J, h, mu, d)
        for i in range(m):
            for sign in (1.0, -1.0):
                e = np.zeros(m)
                e[i] = sign * 1e-4
                assert best <= lm_objective(J, h, mu, d + e) + 1e-8


class TestCheckStop:
    @staticmethod
    def ev(hnorm, gnorm):
        from holm.core import MeritEval
        return MeritEval(x=np.zeros(1), h=np.zeros(1), psi=0.5 * hnorm ** 2, hnorm=hnorm, gnorm=gnorm)

    def test_small_residual(self):
        assert check_stop(self.ev(5e-7, 1.0), self.ev(1.0, 1.0), 1e-6) is Status.CONVERGED_RESIDUAL

    def test_stationary(self):
        assert check_stop(self.ev(1.0, 0.0), self.ev(1.0, 1.0), 1e-6) is Status.CONVERGED_GRADIENT

    def test_continue(self):
        assert check_stop(self.ev(1.0, 1.0), self.ev(1.0, 1.0), 1e-6) is None

    def test_relative_threshold(self):
        # |h0| = 1e8 lifts the residual threshold to 1e-4
        assert check_stop(self.ev(5e-5, 1.0), self.ev(1e8, 1.0), 1e-6) is Status.CONVERGED_RESIDUAL

    def test_both_rule_waits_for_residual(self):
        e0 = self.ev(1.0, 1.0)
        assert check_stop(self.ev(1.0, 0.0), e0, 1e-6, rule="both") is None
        assert check_stop(self.ev(1e-7, 1e-7), e0, 1e-6, rule="both") is Status.CONVERGED_RESIDUAL


class TestSolverConfig:
    def test_defaults_are_published_values(self):
        c = SolverConfig()
        assert (c.alpha_bar, c.rho, c.sigma, c.theta) == (1.0, 0.5, 1e-2, 0.95)
        assert (c.rho1, c.rho2, c.upsilon1, c.upsilon2) == (2.0, 0.5, 1e-4, 0.9)
        assert (c.lambda0, c.mu_min, c.eps, c.max_iter) == (1e-2, 1e-8, 1e-6, 100_000)
        assert c.mu.kind is MuKind.ADAPTIVE and c.mu.eta == 1.2

    @pytest.mark.parametrize("bad", [
        dict(rho=1.0), dict(sigma=0.0), dict(rho1=1.0), dict(rho2=1.5),
        dict(upsilon1=0.9, upsilon2=0.5), dict(lambda0=0.0), dict(mu_min=0.0),
        dict(theta=1.0), dict(theta_max=1.0), dict(eps=0.0), dict(stop_rule="never"),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            SolverConfig(**bad)

    def test_theta_schedule_checked(self):
        c = SolverConfig(theta=lambda k: 0.99)
        with pytest.raises(ConfigError):
            c.theta_at(0)
