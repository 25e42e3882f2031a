import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayes_reduce.grassmann import (
    CostFunction,
    GrassmannPoint,
    TrustRegionConfig,
    principal_angles,
    project_tangent,
    retract_qr,
    riemannian_gradient,
    trust_region_solve,
    truncated_cg,
)
from bayes_reduce.linalg import symmetrize
from helpers import random_model, random_orthonormal, random_spd


class TestProjectTangent:
    def test_vertical_direction_vanishes(self):
        rng = np.random.default_rng(0)
        v = random_orthonormal(rng, 6, 2)
        z = v @ rng.standard_normal((2, 2))
        assert np.abs(project_tangent(v, z)).max() <= 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        v = random_orthonormal(rng, 7, 3)
        z = rng.standard_normal((7, 3))
        once = project_tangent(v, z)
        assert_allclose(project_tangent(v, once), once, atol=1e-12)

    def test_output_is_horizontal(self):
        rng = np.random.default_rng(2)
        v = random_orthonormal(rng, 8, 2)
        out = project_tangent(v, rng.standard_normal((8, 2)))
        assert np.abs(v.T @ out).max() <= 1e-12


class TestRetraction:
    def test_zero_step_is_identity(self):
        rng = np.random.default_rng(3)
        point = GrassmannPoint(random_orthonormal(rng, 5, 2))
        result = retract_qr(point, np.zeros((5, 2)))
        assert_allclose(result.basis, point.basis)

    def test_second_order_accuracy(self):
        # Halving the step shrinks |retract(V, d) - (V + d)| about fourfold.
        rng = np.random.default_rng(4)
        v = random_orthonormal(rng, 8, 2)
        d = project_tangent(v, rng.standard_normal((8, 2)))
        d /= np.linalg.norm(d)
        errors = []
        for k in range(4):
            step = d * (0.1 / 2**k)
            moved = retract_qr(v, step)
            # Align the representative before differencing: the retraction
            # returns the Q factor, which matches V + d up to second order.
            errors.append(np.linalg.norm(moved.basis - (v + step)))
        ratios = [errors[k] / errors[k + 1] for k in range(3)]
        assert all(2.5 <= ratio <= 6.0 for ratio in ratios)

    def test_hand_rotation_3d(self):
        # V = e1 pushed along e2 with unit strength rotates into the
        # normalized diagonal of the (e1, e2) plane.
        v = np.array([[1.0], [0.0], [0.0]])
        d = np.array([[0.0], [1.0], [0.0]])
        moved = retract_qr(GrassmannPoint(v), d)
        assert_allclose(moved.basis, np.array([[1.0], [1.0], [0.0]]) / np.sqrt(2.0), atol=1e-14)

    def test_orthonormal_result(self):
        rng = np.random.default_rng(5)
        v = random_orthonormal(rng, 9, 3)
        d = project_tangent(v, rng.standard_normal((9, 3)))
        moved = retract_qr(v, d)
        gram = moved.basis.T @ moved.basis
        assert np.abs(gram - np.eye(3)).max() <= 1e-10


class TestRiemannianGradient:
    def test_constant_cost(self):
        rng = np.random.default_rng(6)
        v = random_orthonormal(rng, 6, 2)
        cost = CostFunction(value=lambda m: 3.5)
        assert np.abs(riemannian_gradient(cost, v)).max() <= 1e-9

    def test_rayleigh_cost_against_fd(self):
        # cost(V) = -trace(V.T K V) has Euclidean gradient -2 K V; the
        # finite-difference fallback must agree with the projected form.
        rng = np.random.default_rng(7)
        k = random_spd(rng, 7)
        v = random_orthonormal(rng, 7, 2)
        fd_cost = CostFunction(value=lambda m: -float(np.trace(m.T @ k @ m)))
        grad_fd = riemannian_gradient(fd_cost, v)
        expected = project_tangent(v, -2.0 * k @ v)
        assert np.abs(grad_fd - expected).max() <= 1e-6

    def test_stationary_at_invariant_subspace(self):
        rng = np.random.default_rng(8)
        k = random_spd(rng, 8)
        eigvecs = np.linalg.eigh(k)[1]
        v = eigvecs[:, -2:]  # invariant subspace of K
        cost = CostFunction(
            value=lambda m: -float(np.trace(m.T @ k @ m)),
            euclidean_gradient=lambda m: -2.0 * k @ m,
        )
        assert np.linalg.norm(riemannian_gradient(cost, v)) <= 1e-8

    @pytest.mark.parametrize("seed", range(20))
    def test_analytic_gradients_match_directional_fd(self, seed):
        # Directional derivative of the divergence costs along random
        # directions, relative accuracy 1e-5.
        from bayes_reduce.reducers import (
            ekld_cost_function,
            kld_cost_function,
            mi_cost_function,
        )

        rng = np.random.default_rng(900 + seed)
        problem = random_model(rng, 8, 3).problem()
        y = rng.standard_normal(8)
        v = random_orthonormal(rng, 8, 2)
        costs = [
            kld_cost_function(problem, y),
            ekld_cost_function(problem),
            mi_cost_function(problem),
        ]
        direction = rng.standard_normal((8, 2))
        direction /= np.linalg.norm(direction)
        h = 1e-6
        for cost in costs:
            analytic = float(np.sum(cost.euclidean_gradient(v) * direction))
            numeric = (cost.value(v + h * direction) - cost.value(v - h * direction)) / (2 * h)
            assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-9)


class TestTruncatedCG:
    def test_identity_hessian_newton_step(self):
        rng = np.random.default_rng(9)
        grad = rng.standard_normal((5, 2))
        step = truncated_cg(grad, lambda d: d, radius=100.0, max_inner=50)
        assert_allclose(step, -grad, atol=1e-12)

    def test_negative_curvature_hits_boundary(self):
        grad = np.array([1.0, 0.0])
        hessian = np.diag([-1.0, 1.0])
        step = truncated_cg(grad, lambda d: hessian @ d, radius=0.7, max_inner=10)
        assert np.linalg.norm(step) == pytest.approx(0.7, abs=1e-10)

    def test_small_radius_returns_cauchy_direction(self):
        rng = np.random.default_rng(10)
        grad = rng.standard_normal(4)
        spd = random_spd(rng, 4)
        radius = 1e-6
        step = truncated_cg(grad, lambda d: spd @ d, radius=radius, max_inner=10)
        assert np.linalg.norm(step) == pytest.approx(radius, abs=1e-12)
        cosine = -float(step @ grad) / (np.linalg.norm(step) * np.linalg.norm(grad))
        assert cosine == pytest.approx(1.0, abs=1e-12)

    def test_model_decrease_nonnegative(self):
        rng = np.random.default_rng(11)
        grad = rng.standard_normal((6, 2))
        k = random_spd(rng, 12)

        def hess_vec(d):
            return (k @ d.reshape(-1)).reshape(d.shape)

        step = truncated_cg(grad, hess_vec, radius=0.5, max_inner=30)
        decrease = -(np.sum(grad * step) + 0.5 * np.sum(step * hess_vec(step)))
        assert decrease >= 0.0


class TestTrustRegionSolve:
    def test_stationary_start_returns_immediately(self):
        rng = np.random.default_rng(12)
        k = random_spd(rng, 7)
        v0 = np.linalg.eigh(k)[1][:, -2:]
        cost = CostFunction(
            value=lambda m: -float(np.trace(m.T @ k @ m)),
            euclidean_gradient=lambda m: -2.0 * k @ m,
        )
        point, trace = trust_region_solve(cost, v0, TrustRegionConfig(grad_tol=1e-6))
        assert trace.converged
        assert len(trace.records) == 0
        assert_allclose(point.basis, v0, atol=1e-12)

    def test_rayleigh_recovers_dominant_subspace(self):
        rng = np.random.default_rng(13)
        k = random_spd(rng, 10)
        cost = CostFunction(
            value=lambda m: -float(np.trace(m.T @ k @ m)),
            euclidean_gradient=lambda m: -2.0 * k @ m,
        )
        v0 = random_orthonormal(rng, 10, 3)
        point, trace = trust_region_solve(cost, v0, TrustRegionConfig(grad_tol=1e-10))
        assert trace.converged
        dominant = np.linalg.eigh(k)[1][:, -3:]
        assert principal_angles(point.basis, dominant).max() <= 1e-6

    def test_accepted_costs_non_increasing(self):
        rng = np.random.default_rng(14)
        problem = random_model(rng, 12, 3).problem()
        from bayes_reduce.reducers import ekld_cost_function

        cost = ekld_cost_function(problem)
        v0 = random_orthonormal(rng, 12, 2)
        point, trace = trust_region_solve(cost, v0)
        accepted = [rec.cost for rec in trace.records if rec.accepted]
        assert all(b <= a + 1e-12 for a, b in zip(accepted, accepted[1:]))
        assert all(rec.rho > 0.25 for rec in trace.records if rec.accepted)
        gram = point.basis.T @ point.basis
        assert np.abs(gram - np.eye(2)).max() <= 1e-10

    def test_mi_cost_matches_eigensolver(self):
        from bayes_reduce.reducers import mi_cost_function, reduce_mi

        rng = np.random.default_rng(15)
        problem = random_model(rng, 14, 4).problem()
        cost = mi_cost_function(problem)
        v0 = random_orthonormal(rng, 14, 3)
        point, trace = trust_region_solve(cost, v0, TrustRegionConfig(grad_tol=1e-10))
        reference = reduce_mi(problem, 3)
        assert principal_angles(point.basis, reference.basis.matrix).max() <= 1e-6

    def test_kld_cost_exact_at_rank_q(self):
        from bayes_reduce.reducers import kld_cost_function, reduce_mi

        rng = np.random.default_rng(16)
        problem = random_model(rng, 20, 5).problem()
        y = rng.standard_normal(20)
        cost = kld_cost_function(problem, y)
        start = GrassmannPoint.from_matrix(reduce_mi(problem, 5).basis.matrix)
        point, trace = trust_region_solve(cost, start)
        assert cost.value(point.basis) <= 1e-8

    def test_trace_csv_export(self, tmp_path):
        rng = np.random.default_rng(17)
        k = random_spd(rng, 6)
        cost = CostFunction(
            value=lambda m: -float(np.trace(m.T @ k @ m)),
            euclidean_gradient=lambda m: -2.0 * k @ m,
        )
        _, trace = trust_region_solve(cost, random_orthonormal(rng, 6, 2))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,cost,grad_norm,delta,rho,accepted"
        assert len(lines) == len(trace.records) + 1


def test_principal_angles_bounds():
    rng = np.random.default_rng(18)
    a = random_orthonormal(rng, 9, 3)
    assert principal_angles(a, a).max() <= 1e-12
    rotated = a @ np.linalg.qr(rng.standard_normal((3, 3)))[0]
    assert principal_angles(a, rotated).max() <= 1e-12
    complement = np.linalg.qr(np.hstack([a, rng.standard_normal((9, 6))]))[0][:, 3:6]
    assert principal_angles(a, complement).min() >= np.pi / 2 - 1e-10
