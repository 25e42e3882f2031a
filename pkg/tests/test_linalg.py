import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayes_reduce.errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric
from bayes_reduce.linalg import (
    cholesky,
    gen_eig_spd,
    logdet_spd,
    solve_spd,
    sym_eig,
    symmetrize,
)
from helpers import random_spd


class TestCholesky:
    def test_identity(self):
        assert_allclose(cholesky(np.eye(3)), np.eye(3))

    def test_hand_factor_2x2(self):
        # Elimination by hand: [[4,2],[2,3]] = L L.T with L = [[2,0],[1,sqrt(2)]].
        factor = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
        assert_allclose(factor, np.array([[2.0, 0.0], [1.0, math.sqrt(2.0)]]))

    def test_random_reconstruction(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((6, 6))
        spd = m @ m.T + np.eye(6)
        factor = cholesky(spd)
        err = np.linalg.norm(factor @ factor.T - spd) / np.linalg.norm(spd)
        assert err <= 1e-10

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(NotSymmetric):
            cholesky(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestLogdet:
    def test_identity(self):
        assert logdet_spd(np.eye(5)) == pytest.approx(0.0, abs=1e-14)

    def test_diagonal(self):
        # Product of eigenvalues by hand: det diag(2, 3) = 6.
        assert logdet_spd(np.diag([2.0, 3.0])) == pytest.approx(math.log(6.0), abs=1e-12)

    def test_matches_eigenvalue_sum(self):
        rng = np.random.default_rng(1)
        spd = random_spd(rng, 7)
        oracle = float(np.sum(np.log(np.linalg.eigvalsh(spd))))
        assert logdet_spd(spd) == pytest.approx(oracle, abs=1e-10)


class TestSolveSpd:
    def test_identity(self):
        rhs = np.arange(4.0)
        assert_allclose(solve_spd(np.eye(4), rhs), rhs)

    def test_diagonal_scaling(self):
        assert_allclose(solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])

    def test_residual(self):
        rng = np.random.default_rng(2)
        spd = random_spd(rng, 9)
        rhs = rng.standard_normal((9, 3))
        x = solve_spd(spd, rhs)
        assert np.linalg.norm(spd @ x - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_spd(np.eye(3), np.ones(4))


class TestSymEig:
    def test_diagonal_sorted_descending(self):
        pairs = sym_eig(np.diag([1.0, 5.0, 3.0]))
        assert_allclose(pairs.values, [5.0, 3.0, 1.0])
        # Vectors are signed standard-basis columns in eigenvalue order.
        assert_allclose(np.abs(pairs.vectors), np.eye(3)[:, [1, 2, 0]], atol=1e-14)

    def test_hand_2x2(self):
        # Characteristic polynomial of [[2,1],[1,2]]: roots 3 and 1.
        pairs = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert_allclose(pairs.values, [3.0, 1.0], atol=1e-12)
        s = 1.0 / math.sqrt(2.0)
        assert_allclose(pairs.vectors[:, 0], [s, s], atol=1e-12)
        assert_allclose(pairs.vectors[:, 1], [s, -s], atol=1e-12)

    def test_random_residual_and_orthonormality(self):
        rng = np.random.default_rng(3)
        m = symmetrize(rng.standard_normal((8, 8)))
        pairs = sym_eig(m)
        scale = np.linalg.norm(m, 2)
        assert np.linalg.norm(m @ pairs.vectors - pairs.vectors * pairs.values) <= 1e-9 * scale
        assert np.abs(pairs.vectors.T @ pairs.vectors - np.eye(8)).max() <= 1e-10

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_sign_convention(self):
        pairs = sym_eig(np.diag([4.0, 2.0]))
        for j in range(2):
            column = pairs.vectors[:, j]
            assert column[np.argmax(np.abs(column))] > 0


class TestGenEig:
    def test_identity_metric_matches_sym_eig(self):
        rng = np.random.default_rng(4)
        m = symmetrize(rng.standard_normal((6, 6)))
        plain = sym_eig(m)
        general = gen_eig_spd(m, np.eye(6))
        assert_allclose(general.values, plain.values, atol=1e-10)
        assert_allclose(np.abs(general.vectors), np.abs(plain.vectors), atol=1e-8)

    def test_diagonal_hand_case(self):
        pairs = gen_eig_spd(np.diag([4.0, 1.0]), np.diag([2.0, 1.0]))
        assert_allclose(pairs.values, [2.0, 1.0], atol=1e-12)

    def test_b_orthonormality(self):
        rng = np.random.default_rng(5)
        a = symmetrize(rng.standard_normal((7, 7)))
        b = random_spd(rng, 7)
        pairs = gen_eig_spd(a, b)
        gram = pairs.vectors.T @ b @ pairs.vectors
        assert np.abs(gram - np.eye(7)).max() <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_shift_property(self, seed):
        # Adding the metric to the operator shifts every eigenvalue by one.
        rng = np.random.default_rng(100 + seed)
        q = int(rng.integers(2, 6))
        n = int(rng.integers(q + 1, 16))
        design = rng.standard_normal((n, q))
        signal = symmetrize(design @ random_spd(rng, q) @ design.T)
        noise = random_spd(rng, n)
        nu = gen_eig_spd(signal, noise).values
        lam = gen_eig_spd(signal + noise, noise).values
        assert np.abs(lam - (nu + 1.0)).max() <= 1e-10

    def test_psd_rank_deficiency_clamped(self):
        rng = np.random.default_rng(6)
        u = rng.standard_normal((8, 2))
        low_rank = u @ u.T
        pairs = gen_eig_spd(low_rank, random_spd(rng, 8))
        assert np.count_nonzero(pairs.values > 0) == 2
        assert np.all(pairs.values[2:] == 0.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gen_eig_spd(np.eye(3), np.eye(4))


@pytest.mark.parametrize("seed", range(100))
def test_random_instance_contracts(seed):
    """Reconstruction, residuals and orthonormality on dims 2 through 20."""
    rng = np.random.default_rng(1000 + seed)
    dim = int(rng.integers(2, 21))
    spd = random_spd(rng, dim)

    factor = cholesky(spd)
    rec = np.linalg.norm(factor @ factor.T - spd) / np.linalg.norm(spd)
    assert rec <= 1e-10

    sym = symmetrize(rng.standard_normal((dim, dim)))
    pairs = sym_eig(sym)
    scale = max(np.linalg.norm(sym, 2), 1e-12)
    assert np.linalg.norm(sym @ pairs.vectors - pairs.vectors * pairs.values) <= 1e-9 * scale
    assert np.all(np.diff(pairs.values) <= 1e-12)

    metric = random_spd(rng, dim)
    general = gen_eig_spd(sym, metric)
    residual = sym @ general.vectors - metric @ (general.vectors * general.values)
    bound = 1e-8 * (np.linalg.norm(sym, 2) + np.linalg.norm(metric, 2))
    assert np.linalg.norm(residual, 2) <= bound
    gram = general.vectors.T @ metric @ general.vectors
    assert np.abs(gram - np.eye(dim)).max() <= 1e-10
