"""Gaussian observation models, their moment triples, and exact posteriors.

The linear model is ``Y = B X + E`` with independent Gaussian parameter
``X ~ N(m_X, C_X)`` and noise ``E ~ N(m_E, C_E)``. Every reduction
criterion in this package depends on the model only through the moment
triple of the noiseless observations ``A(X)``:

    signal_mean  = E[A(X)]            (length n)
    signal_cov   = Cov[A(X)]          (n x n, PSD, rank <= q)
    cross_cov    = Cov[A(X), X]       (n x q)

which for the linear case are ``B m_X``, ``B C_X B.T`` and ``B C_X``.
Nonlinear forwards enter through the same triple, computed analytically or
by sampling, so the posterior formulas below apply verbatim.

The reduced model observes ``W = V.T Y`` through a full-column-rank basis
``V``; its posterior depends only on ``range(V)``, so right-multiplying
``V`` by any invertible matrix leaves the posterior unchanged. The exact
conditional distributions are

    C_post = C_X - cross.T C_Y^{-1} cross
    m_post = G (y - m_Y) + h,  G = cross.T C_Y^{-1},
    h = C_post C_X^{-1} m_X + G m_A

and the reduced counterparts substitute ``V.T C_Y V``, ``V.T cross`` and
``V.T m_A``. Every inverse is realized as a Cholesky solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NonFiniteInput, RankDeficientBasis
from .linalg import cholesky, solve_spd, symmetrize

__all__ = [
    "AffinePosteriorMap",
    "GaussianDist",
    "GaussianProblem",
    "LinearGaussianModel",
    "ModelMoments",
    "SubspaceBasis",
    "as_basis",
    "moments_linear",
    "observation_moments",
    "posterior_full",
    "posterior_reduced",
]

# Column-pivot threshold, relative to the largest singular value, below
# which a basis is declared rank deficient.
_RANK_TOL = 1e-10


def _vector(v, dim=None, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    if dim is not None and v.size != dim:
        raise DimensionMismatch(f"{name} has length {v.size}, expected {dim}")
    return v


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate normal with a strictly positive definite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, name="mean")
        cov = symmetrize(self.cov)
        if cov.shape[0] != mean.size:
            raise DimensionMismatch(
                f"covariance is {cov.shape[0]}x{cov.shape[1]} for a mean of length {mean.size}"
            )
        cholesky(cov)  # SPD assertion
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class ModelMoments:
    """Moment triple of the noiseless observations ``A(X)``."""

    signal_mean: np.ndarray
    signal_cov: np.ndarray
    cross_cov: np.ndarray

    def __post_init__(self):
        mean = _vector(self.signal_mean, name="signal_mean")
        cov = symmetrize(self.signal_cov)
        cross = np.asarray(self.cross_cov, dtype=float)
        if cross.ndim == 1:
            cross = cross.reshape(-1, 1)
        n = mean.size
        if cov.shape != (n, n):
            raise DimensionMismatch(f"signal_cov must be {n}x{n}, got {cov.shape}")
        if cross.shape[0] != n:
            raise DimensionMismatch(
                f"cross_cov must have {n} rows, got {cross.shape[0]}"
            )
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(cross)):
            raise NonFiniteInput("moment matrices contain non-finite entries")
        object.__setattr__(self, "signal_mean", mean)
        object.__setattr__(self, "signal_cov", cov)
        object.__setattr__(self, "cross_cov", cross)

    @property
    def n(self) -> int:
        return self.signal_mean.size

    @property
    def q(self) -> int:
        return self.cross_cov.shape[1]


@dataclass(frozen=True)
class SubspaceBasis:
    """Full-column-rank ``n x r`` matrix representing an r-dim subspace.

    Only ``range(matrix)`` matters to the posteriors; the ``orthonormal``
    flag records whether this particular representative has orthonormal
    columns (detected at construction).
    """

    matrix: np.ndarray
    orthonormal: bool = field(init=False, default=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        if m.ndim != 2:
            raise DimensionMismatch(f"basis must be 2-d, got ndim={m.ndim}")
        n, r = m.shape
        if not 1 <= r <= n:
            raise DimensionMismatch(f"basis must be n x r with 1 <= r <= n, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NonFiniteInput("basis contains non-finite entries")
        rfac = sla.qr(m, mode="r", pivoting=True)[0]
        sigma1 = np.linalg.norm(m, 2)
        if np.abs(np.diag(rfac)).min() <= _RANK_TOL * sigma1:
            raise RankDeficientBasis(
                f"basis of shape {m.shape} is numerically rank deficient"
            )
        gram = m.T @ m
        ortho = bool(np.abs(gram - np.eye(r)).max() <= 1e-10)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "orthonormal", ortho)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def r(self) -> int:
        return self.matrix.shape[1]


def as_basis(v) -> SubspaceBasis:
    """Coerce an array or :class:`SubspaceBasis` into a validated basis."""
    if isinstance(v, SubspaceBasis):
        return v
    return SubspaceBasis(v)


@dataclass(frozen=True)
class AffinePosteriorMap:
    """Posterior mean as an affine function of the (reduced) data.

    ``mean = gain @ (data - data_mean) + offset`` where ``data`` is ``y``
    for the full model and ``V.T y`` for a reduced one.
    """

    gain: np.ndarray
    offset: np.ndarray


@dataclass(frozen=True)
class LinearGaussianModel:
    """The linear model ``Y = B X + E`` with independent ``X`` and ``E``."""

    design: np.ndarray
    prior: GaussianDist
    noise: GaussianDist

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        if design.ndim == 1:
            design = design.reshape(1, -1)
        if not np.all(np.isfinite(design)):
            raise NonFiniteInput("design matrix contains non-finite entries")
        if design.shape[0] != self.noise.dim:
            raise DimensionMismatch(
                f"design has {design.shape[0]} rows but noise has dim {self.noise.dim}"
            )
        if design.shape[1] != self.prior.dim:
            raise DimensionMismatch(
                f"design has {design.shape[1]} columns but prior has dim {self.prior.dim}"
            )
        object.__setattr__(self, "design", design)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def q(self) -> int:
        return self.design.shape[1]

    def problem(self) -> "GaussianProblem":
        return GaussianProblem(moments_linear(self), self.prior, self.noise)


@dataclass(frozen=True)
class GaussianProblem:
    """A Gaussian inference problem summarized by its sufficient statistics.

    Bundles the moment triple with the prior and noise distributions; this
    is everything any reducer or information criterion needs, for linear
    models and for Gaussian surrogates of nonlinear ones alike.
    """

    moments: ModelMoments
    prior: GaussianDist
    noise: GaussianDist

    def __post_init__(self):
        if self.moments.n != self.noise.dim:
            raise DimensionMismatch(
                f"moments are for {self.moments.n} observations, noise has dim {self.noise.dim}"
            )
        if self.moments.q != self.prior.dim:
            raise DimensionMismatch(
                f"moments are for {self.moments.q} parameters, prior has dim {self.prior.dim}"
            )

    @classmethod
    def from_linear(cls, model: LinearGaussianModel) -> "GaussianProblem":
        return model.problem()

    def observation(self) -> GaussianDist:
        return observation_moments(self.moments, self.noise)

    @property
    def n(self) -> int:
        return self.moments.n

    @property
    def q(self) -> int:
        return self.moments.q


def moments_linear(model: LinearGaussianModel) -> ModelMoments:
    """Moment triple of ``A(X) = B X`` under the model prior."""
    design = model.design
    cross = design @ model.prior.cov
    return ModelMoments(
        signal_mean=design @ model.prior.mean,
        signal_cov=symmetrize(cross @ design.T),
        cross_cov=cross,
    )


def observation_moments(moments: ModelMoments, noise: GaussianDist) -> GaussianDist:
    """Distribution of ``Y = A(X) + E``: mean and covariance add."""
    if moments.n != noise.dim:
        raise DimensionMismatch(
            f"moments are for {moments.n} observations, noise has dim {noise.dim}"
        )
    return GaussianDist(
        mean=moments.signal_mean + noise.mean,
        cov=moments.signal_cov + noise.cov,
    )


def posterior_full(
    moments: ModelMoments,
    prior: GaussianDist,
    noise: GaussianDist,
    y,
) -> tuple[GaussianDist, AffinePosteriorMap]:
    """Exact posterior of ``X`` given the full observation ``Y = y``."""
    y = _vector(y, moments.n, "y")
    obs = observation_moments(moments, noise)
    solved = solve_spd(obs.cov, moments.cross_cov)  # C_Y^{-1} cross, n x q
    gain = solved.T
    cov = symmetrize(prior.cov - moments.cross_cov.T @ solved)
    offset = cov @ solve_spd(prior.cov, prior.mean) + gain @ moments.signal_mean
    mean = gain @ (y - obs.mean) + offset
    return GaussianDist(mean, cov), AffinePosteriorMap(gain, offset)


def posterior_reduced(
    moments: ModelMoments,
    prior: GaussianDist,
    noise: GaussianDist,
    v,
    y,
) -> tuple[GaussianDist, AffinePosteriorMap]:
    """Exact posterior of ``X`` given the reduced observation ``W = V.T y``.

    ``v`` must have full column rank; the result is invariant under
    ``v -> v @ M`` for invertible ``M``.
    """
    basis = as_basis(v)
    if basis.n != moments.n:
        raise DimensionMismatch(
            f"basis has {basis.n} rows, expected {moments.n}"
        )
    y = _vector(y, moments.n, "y")
    vmat = basis.matrix
    obs = observation_moments(moments, noise)
    reduced_obs_cov = symmetrize(vmat.T @ obs.cov @ vmat)
    reduced_cross = vmat.T @ moments.cross_cov  # r x q
    solved = solve_spd(reduced_obs_cov, reduced_cross)
    gain = solved.T  # q x r
    cov = symmetrize(prior.cov - reduced_cross.T @ solved)
    offset = cov @ solve_spd(prior.cov, prior.mean) + gain @ (
        vmat.T @ moments.signal_mean
    )
    mean = gain @ (vmat.T @ (y - obs.mean)) + offset
    return GaussianDist(mean, cov), AffinePosteriorMap(gain, offset)
