import numpy as np
import pytest

from normscaler.errors import DegenerateInstance, DomainError, NonFiniteError
from normscaler.model import DesignSpec, TargetSpec, gen_instance
from normscaler.solver import (
    SolverOptions,
    conjugate_exponent,
    dual_objective,
    kkt_map,
    min_l2_closed_form,
    ray_scale,
    solve_min_lp,
)

from oracles import projected_subgradient_min_lp, ray_scale_grid_oracle


def _instance(n, d, p_sigma=0.1, seed=0, s=1):
    target = TargetSpec() if s == 1 else TargetSpec(kind="flat_support", s=s)
    return gen_instance(target, DesignSpec.fixed(d), p_sigma, n, seed)


class TestConjugateExponent:
    @pytest.mark.parametrize("p,q", [(2.0, 2.0), (1.5, 3.0), (1.1, 11.0)])
    def test_values(self, p, q):
        assert conjugate_exponent(p) == pytest.approx(q, rel=1e-12)

    def test_holder_identity(self):
        for p in (1.05, 1.3, 1.8, 2.0):
            q = conjugate_exponent(p)
            assert 1 / p + 1 / q == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [1.0, 0.5, 2.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            conjugate_exponent(p)


class TestKktMap:
    def test_identity_at_q2(self):
        v = np.array([-1.7, 0.0, 2.3, 0.4])
        assert np.array_equal(kkt_map(v, 2.0), v)

    def test_signed_square(self):
        assert np.array_equal(kkt_map(np.array([-2.0, 0.0, 3.0]), 3.0), [-4.0, 0.0, 9.0])

    def test_exact_power(self):
        assert kkt_map(np.array([0.5]), 11.0)[0] == pytest.approx(0.0009765625, rel=1e-14)

    def test_zero_maps_to_zero(self):
        assert kkt_map(np.zeros(3), 7.0).tolist() == [0.0, 0.0, 0.0]

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteError):
            kkt_map(np.array([1.0, np.nan]), 3.0)


class TestDualObjective:
    def test_zero_lambda(self):
        X = np.ones((2, 3))
        assert dual_objective(np.zeros(2), X, np.ones(2), 3.0) == 0.0

    def test_scalar_case(self):
        assert dual_objective(np.array([1.0]), np.array([[1.0]]), np.array([2.0]), 3.0) == pytest.approx(5 / 3)

    def test_energy_identity_after_solve(self):
        inst = _instance(15, 60, seed=3)
        p = 1.5
        q = conjugate_exponent(p)
        sol = solve_min_lp(inst.X, inst.Y, p)
        assert sol.converged
        lhs = dual_objective(sol.lambda_star, inst.X, inst.Y, q)
        rhs = (1 - 1 / q) * np.sum(np.abs(sol.w_hat) ** p)
        assert lhs == pytest.approx(rhs, rel=1e-6)


class TestRayScale:
    def test_scalar_case(self):
        t = ray_scale(np.array([[1.0]]), np.array([2.0]), 3.0)
        assert t == pytest.approx(np.sqrt(0.5), rel=1e-12)

    def test_orthonormal_rows_q2(self):
        rng = np.random.default_rng(1)
        mat = rng.standard_normal((20, 5))
        q_mat, _ = np.linalg.qr(mat)
        X = q_mat.T  # 5 x 20 with X X^T = I
        Y = rng.standard_normal(5)
        assert ray_scale(X, Y, 2.0) == pytest.approx(1.0, rel=1e-10)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((5, 20))
        Y = rng.standard_normal(5)
        for q in (2.0, 3.0, 6.0):
            t_grid = ray_scale_grid_oracle(X, Y, q)
            assert ray_scale(X, Y, q) == pytest.approx(t_grid, rel=1e-4)

    def test_degenerate(self):
        with pytest.raises(DegenerateInstance):
            ray_scale(np.zeros((2, 3)), np.ones(2), 3.0)


class TestMinL2ClosedForm:
    def test_identity_block(self):
        X = np.hstack([np.eye(4), np.zeros((4, 6))])
        Y = np.arange(1.0, 5.0)
        assert np.allclose(min_l2_closed_form(X, Y), np.concatenate([Y, np.zeros(6)]))

    def test_row_vector(self):
        w = min_l2_closed_form(np.array([[3.0, 4.0]]), np.array([5.0]))
        assert np.allclose(w, [0.6, 0.8])

    def test_residual_and_rowspace(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((30, 120))
        Y = rng.standard_normal(30)
        w = min_l2_closed_form(X, Y)
        assert np.linalg.norm(X @ w - Y) <= 1e-10 * np.linalg.norm(Y)
        # w orthogonal to ker(X): project random vectors onto the kernel
        pinv_factor = X.T @ np.linalg.solve(X @ X.T, np.eye(30))
        for _ in range(10):
            z = rng.standard_normal(120)
            z_ker = z - pinv_factor @ (X @ z)
            assert abs(w @ z_ker) <= 1e-8 * np.linalg.norm(w) * np.linalg.norm(z_ker)


class TestSolveMinLp:
    @pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
    def test_unique_scalar_interpolant(self, p):
        X = np.array([[2.0]])
        Y = np.array([6.0])
        sol = solve_min_lp(X, Y, p)
        assert sol.w_hat[0] == pytest.approx(3.0, rel=1e-7)
        if p < 2:
            # stationarity: X^T lambda = sgn(w)|w|^(p-1)
            assert 2 * sol.lambda_star[0] == pytest.approx(3.0 ** (p - 1.0), rel=1e-6)

    def test_p2_matches_closed_form(self):
        inst = _instance(20, 100, seed=5)
        sol = solve_min_lp(inst.X, inst.Y, 2.0)
        w_direct = min_l2_closed_form(inst.X, inst.Y)
        assert np.linalg.norm(sol.w_hat - w_direct) <= 1e-8 * np.linalg.norm(w_direct)

    def test_p15_beats_projected_subgradient(self):
        inst = _instance(10, 40, seed=2)
        sol = solve_min_lp(inst.X, inst.Y, 1.5)
        assert sol.converged
        w0 = min_l2_closed_form(inst.X, inst.Y)
        oracle = projected_subgradient_min_lp(inst.X, inst.Y, 1.5, w0, iters=200_000)
        mine = np.sum(np.abs(sol.w_hat) ** 1.5) ** (1 / 1.5)
        assert mine <= (1 + 1e-4) * oracle

    def test_zero_labels(self):
        sol = solve_min_lp(np.ones((3, 8)), np.zeros(3), 1.5)
        assert sol.converged and sol.iters == 0
        assert np.array_equal(sol.w_hat, np.zeros(8))

    def test_p_out_of_range(self):
        X, Y = np.ones((2, 5)), np.ones(2)
        with pytest.raises(DomainError):
            solve_min_lp(X, Y, 1.01)
        with pytest.raises(DomainError):
            solve_min_lp(X, Y, 2.2)

    @pytest.mark.parametrize("p,sigma", [(1.1, 0.1), (1.5, 0.0), (1.75, 0.1)])
    def test_certificates(self, p, sigma):
        inst = _instance(12, 70, p_sigma=sigma, seed=9)
        sol = solve_min_lp(inst.X, inst.Y, p)
        assert sol.converged
        assert sol.feas_residual <= 1e-8
        assert sol.cert_residual <= 1e-6

    def test_monotone_ascent_with_backtracking(self):
        inst = _instance(15, 60, seed=4)
        opts = SolverOptions(line_search="backtracking", record_history=True)
        sol = solve_min_lp(inst.X, inst.Y, 1.3, opts)
        hist = np.array(sol.dual_history)
        assert np.all(np.diff(hist) >= -1e-12)

    def test_scale_equivariance_p2(self):
        inst = _instance(10, 50, seed=6)
        w1 = solve_min_lp(inst.X, inst.Y, 2.0).w_hat
        w3 = solve_min_lp(inst.X, 3.0 * inst.Y, 2.0).w_hat
        assert np.allclose(w3, 3.0 * w1, rtol=1e-9)

    def test_scaled_problem_still_certified(self):
        inst = _instance(10, 50, seed=8)
        sol = solve_min_lp(inst.X, 5.0 * inst.Y, 1.5)
        assert sol.converged
        assert np.linalg.norm(inst.X @ sol.w_hat - 5.0 * inst.Y) <= 1e-7 * np.linalg.norm(inst.Y)

    def test_norm_ordering_across_p(self):
        inst = _instance(12, 60, seed=10)
        for p1, p2 in [(1.2, 1.7), (1.5, 2.0), (1.1, 1.5)]:
            w1 = solve_min_lp(inst.X, inst.Y, p1).w_hat
            w2 = solve_min_lp(inst.X, inst.Y, p2).w_hat
            n11 = np.sum(np.abs(w1) ** p1) ** (1 / p1)
            n21 = np.sum(np.abs(w2) ** p1) ** (1 / p1)
            assert n11 <= n21 * (1 + 1e-6)

    def test_continuity_near_p2(self):
        inst = _instance(20, 100, seed=12)
        w_near = solve_min_lp(inst.X, inst.Y, 1.999).w_hat
        w_two = solve_min_lp(inst.X, inst.Y, 2.0).w_hat
        rel = np.linalg.norm(w_near - w_two) / np.linalg.norm(w_two)
        assert rel <= 1e-2

    def test_best_iterate_on_max_iters(self):
        inst = _instance(25, 120, seed=13)
        sol = solve_min_lp(inst.X, inst.Y, 1.1, SolverOptions(max_iters=3))
        assert not sol.converged
        assert sol.iters == 3
        assert np.isfinite(sol.feas_residual)
