"""Shared random-instance builders for the test suite."""

import numpy as np

from bayes_reduce.model import GaussianDist, LinearGaussianModel


def random_spd(rng, dim, jitter=0.5):
    """Well-conditioned random SPD matrix, A = M M.T / d + c I."""
    m = rng.standard_normal((dim, dim))
    return m @ m.T / dim + (jitter + rng.uniform()) * np.eye(dim)


def random_model(rng, n, q):
    """Random linear Gaussian model with SPD prior and noise."""
    return LinearGaussianModel(
        design=rng.standard_normal((n, q)),
        prior=GaussianDist(rng.standard_normal(q), random_spd(rng, q)),
        noise=GaussianDist(rng.standard_normal(n), random_spd(rng, n)),
    )


def random_orthonormal(rng, n, r):
    """Random n x r matrix with orthonormal columns."""
    return np.linalg.qr(rng.standard_normal((n, r)))[0]


def random_invertible(rng, r):
    """Random invertible r x r matrix with singular values in [0.5, 2.5]."""
    left = np.linalg.qr(rng.standard_normal((r, r)))[0]
    right = np.linalg.qr(rng.standard_normal((r, r)))[0]
    return left @ np.diag(0.5 + 2.0 * rng.uniform(size=r)) @ right
