"""Deterministic random streams and Gaussian sampling.

All randomness in the package flows through Philox, a counter-based
generator, so a given seed produces identical bytes on every platform and
on every rerun. Independent streams are derived by seeding with tuples of
integers.
"""

from __future__ import annotations

import numpy as np

from .linalg import cholesky
from .model import GaussianDist

__all__ = ["rng_stream", "sample_gaussian"]


def rng_stream(*keys: int) -> np.random.Generator:
    """Philox stream keyed by a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(keys)))


def sample_gaussian(dist: GaussianDist, count: int, seed) -> np.ndarray:
    """Draw ``count`` vectors from ``dist`` as rows of a ``count x d`` array.

    ``seed`` may be an integer (then a fresh Philox stream is created) or an
    existing :class:`numpy.random.Generator`. Sampling is ``mean + L z``
    with ``L`` the Cholesky factor, so output is reproducible bit for bit.
    """
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(int(seed))
    factor = cholesky(dist.cov)
    z = rng.standard_normal((int(count), dist.dim))
    return dist.mean + z @ factor.T
