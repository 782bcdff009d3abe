import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from celar.el import (
    EstimatingFunctionMatrix,
    el_weights,
    iid_el_fit,
    inner_gradient,
    inner_hessian,
    inner_objective,
    solve_lambda,
    zero_in_hull,
)
from celar.errors import OutOfDomainError
from celar.model_core import RegressionDataset, ls_fit


def centered_rows(draw_shape, seed):
    r = np.random.default_rng(seed)
    G = r.standard_normal(draw_shape)
    return G - G.mean(axis=0) * 0.7


def random_feasible_lambda(G, r, bound=1.0):
    n = G.shape[0]
    while True:
        lam = r.standard_normal(G.shape[1]) * 2.0 / (1 + np.abs(G).max())
        if np.all(n + G @ lam > bound):
            return lam


class TestWeights:
    def test_uniform_at_zero(self, rng):
        G = rng.standard_normal((7, 3))
        pi = el_weights(G, np.zeros(3))
        np.testing.assert_allclose(pi, 1 / 7)
        assert pi.sum() == pytest.approx(1.0, abs=1e-15)

    def test_single_observation(self):
        assert el_weights(np.zeros((1, 1)), [0.0]) == pytest.approx([1.0])

    def test_hand_instance(self):
        np.testing.assert_allclose(el_weights([[1.0], [-1.0]], [0.5]), [1 / 2.5, 1 / 1.5])

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomainError):
            el_weights([[1.0], [-1.0]], [5.0])

    def test_matrix_type(self, rng):
        G = EstimatingFunctionMatrix(rng.standard_normal((5, 2)))
        assert (G.n_obs, G.q) == (5, 2)
        np.testing.assert_allclose(el_weights(G, [0.0, 0.0]), 0.2)


class TestObjective:
    def test_value_at_zero(self, rng):
        assert inner_objective(rng.standard_normal((9, 2)), [0.0, 0.0]) == pytest.approx(-9 * math.log(9))

    def test_three_points(self):
        G = np.array([[1.0], [2.0], [-4.0]])
        lam = [0.3]
        want = -(math.log(3.3) + math.log(3.6) + math.log(1.8))
        assert inner_objective(G, lam) == pytest.approx(want, rel=1e-14)

    def test_decreases_when_denominator_grows(self):
        G = np.array([[1.0], [0.0], [0.0]])
        assert inner_objective(G, [0.5]) < inner_objective(G, [0.0])

    def test_gradient_fd(self):
        r = np.random.default_rng(1)
        G = r.standard_normal((12, 3))
        for _ in range(10):
            lam = random_feasible_lambda(G, r)
            g = inner_gradient(G, lam)
            fd = np.empty(3)
            for k in range(3):
                e = np.zeros(3)
                e[k] = 1e-6
                fd[k] = (inner_objective(G, lam + e) - inner_objective(G, lam - e)) / 2e-6
            assert np.max(np.abs(fd - g)) / max(1e-8, np.max(np.abs(g))) < 1e-5
            H = inner_hessian(G, lam)
            assert np.linalg.eigvalsh(H).min() >= -1e-10

    def test_convexity_midpoint(self):
        r = np.random.default_rng(2)
        G = r.standard_normal((15, 3))
        for _ in range(100):
            a = random_feasible_lambda(G, r)
            b = random_feasible_lambda(G, r)
            mid = inner_objective(G, (a + b) / 2)
            assert mid <= (inner_objective(G, a) + inner_objective(G, b)) / 2 + 1e-12


class TestSolveLambda:
    def test_zero_rows(self):
        st_ = solve_lambda(np.zeros((5, 2)))
        assert st_.converged
        np.testing.assert_allclose(st_.pi, 0.2)

    def test_grid_oracle_three_points(self):
        G = np.array([[1.5], [-0.5], [-2.0]])
        st_ = solve_lambda(G)
        n = 3
        grid = np.linspace(-0.99, 0.99, 400001) * n / 2.0
        d = n + G[:, 0][:, None] * grid[None, :]
        ok = np.all(d > 1.0, axis=0)
        vals = np.where(ok, -np.log(np.where(ok, d, 1.0)).sum(axis=0), np.inf)
        k = np.argmin(vals)
        assert abs(st_.lam[0] - grid[k]) < 1e-3
        assert abs(st_.inner_objective - vals[k]) < 1e-4

    def test_solution_properties(self, rng):
        G = rng.standard_normal((30, 3)) + [0.3, -0.2, 0.1]
        st_ = solve_lambda(G)
        assert st_.converged and st_.feasible
        assert st_.pi.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all((st_.pi > 0) & (st_.pi < 1))
        assert st_.max_residual < 1e-6
        assert np.all(30 + G @ st_.lam > 1.0)

    def test_infeasible_when_zero_outside_hull(self):
        G = np.array([[1.0], [2.0], [3.0]])
        assert not zero_in_hull(G)
        st_ = solve_lambda(G)
        assert not st_.feasible and not st_.converged

    def test_minus_n_init_matches_zero_init(self, rng):
        G = rng.standard_normal((25, 2)) * 0.1
        a = solve_lambda(G)
        b = solve_lambda(G, init="minus-n")
        np.testing.assert_allclose(a.lam, b.lam, atol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(6, 20), st.integers(1, 3))
    def test_permutation_invariance(self, seed, n, q):
        r = np.random.default_rng(seed)
        G = r.standard_normal((n, q))
        a = solve_lambda(G)
        perm = r.permutation(n)
        b = solve_lambda(G[perm])
        assert a.feasible == b.feasible
        if a.feasible:
            np.testing.assert_allclose(a.lam, b.lam, atol=1e-6)
            np.testing.assert_allclose(a.pi[perm], b.pi, atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(float, (10, 2), elements=st.floats(-5, 5)))
    def test_converged_states_are_valid(self, G):
        st_ = solve_lambda(G)
        if st_.converged:
            assert st_.pi.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.all((st_.pi > 0) & (st_.pi < 1))
            assert st_.max_residual < 1e-6
        else:
            assert not zero_in_hull(G) or not st_.feasible


class TestIidEl:
    def test_symmetric_residuals_give_ls(self):
        x = np.arange(1.0, 7.0)
        y = 2.0 + 0.5 * x + np.array([1, -1, 1, -1, 1, -1]) * 0.3
        d = RegressionDataset(y, x).with_intercept()
        beta, _, _ = iid_el_fit(d, estimate_sigma2=False)
        np.testing.assert_allclose(beta, ls_fit(d), atol=1e-8)

    def test_nested_grid_oracle(self):
        r = np.random.default_rng(4)
        x = r.uniform(0.5, 2.0, 5)
        y = 1.3 * x + 0.3 * r.standard_normal(5)
        d = RegressionDataset(y, x)
        beta, s2, state = iid_el_fit(d, estimate_sigma2=False)
        assert s2 is None
        best, arg = -np.inf, None
        for b in np.linspace(beta[0] - 0.3, beta[0] + 0.3, 121):
            g = x * (y - b * x)
            lams = np.linspace(-5, 5, 4001)
            dd = 5 + g[:, None] * lams[None, :]
            ok = np.all(dd > 1.0, axis=0)
            if not ok.any():
                continue
            v = np.min(-np.log(dd[:, ok]).sum(axis=0))
            if v > best:
                best, arg = v, b
        assert abs(arg - beta[0]) <= 0.6 / 120 + 1e-12
        assert abs(best - state.inner_objective) < 1e-3

    def test_sigma2_constraint(self, rng):
        X = np.column_stack([np.ones(30), rng.standard_normal(30)])
        d = RegressionDataset(X @ [1.0, 2.0] + rng.standard_normal(30), X)
        beta, s2, state = iid_el_fit(d)
        r = d.y - d.X @ beta
        assert abs(state.pi @ (r * r - s2)) < 1e-8
        assert state.pi.sum() == pytest.approx(1.0, abs=1e-10)

    def test_ls_start_always_feasible(self):
        # at the LS start both constraint blocks have mean zero, so uniform weights solve them
        d = RegressionDataset([1.0, 2.0, 3.5, 3.0], np.array([1.0, 2.0, 3.0, 4.0])).with_intercept()
        beta, s2, state = iid_el_fit(d)
        np.testing.assert_allclose(beta, ls_fit(d), atol=1e-8)
        np.testing.assert_allclose(state.pi, 0.25, atol=1e-10)
