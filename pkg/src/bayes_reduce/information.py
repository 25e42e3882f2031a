"""Information-theoretic quantities for Gaussian reduction diagnostics.

For Gaussians ``N(m0, C0)`` and ``N(m1, C1)`` of dimension q the
Kullback-Leibler divergence splits into a covariance part and a mean part:

    KL = (1/2) (LDD(C0, C1) + MD(C1; m0, m1))
    LDD(C0, C1) = trace(C0 C1^{-1}) - log det(C0 C1^{-1}) - q
    MD(C1; m0, m1) = (m0 - m1).T C1^{-1} (m0 - m1)

On top of these the module provides the three reduction criteria, all in
nats:

* ``kld_cost``      divergence between full and reduced posteriors for one
                    realization ``y`` (an a posteriori criterion),
* ``ekld_cost``     its expectation over the observation distribution,
                    available in closed form,
* ``mutual_information``  I(W, X) for reduced observations ``W = V.T Y``,
                    equal to (1/2) log det((V.T C_Y V)(V.T C_E V)^{-1}).

Maximizing the mutual information is equivalent to minimizing the entropy
of the reduced posterior: the two are linked by

    H(X | W) = -I(W, X) + (1/2) log det C_X + (q/2) log(2 pi e)

and the maximal I(W, X) over r-dimensional subspaces is attained by the
dominant eigenvectors of the pencil ``C_Y v = lam C_E v``. Working instead
with ``signal_cov v = nu C_E v`` (``nu = lam - 1``) is cheaper because the
signal covariance has rank at most q; the relative loss of mutual
information for a rank-r reduction has the a priori estimate

    1 - sum_{i<=r} log(1 + nu_i) / sum_{i<=m} log(1 + nu_i)

with m the number of positive ``nu``. All log-determinant ratios are
evaluated through Cholesky pipelines, never through determinants of
products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySpectrum, ReductionError
from .linalg import (
    EigenPairs,
    PSD_CLAMP_REL,
    factor_logdet,
    gen_eig_spd,
    spd_factor,
    spd_factor_solve,
    symmetrize,
)
from .model import (
    GaussianDist,
    GaussianProblem,
    as_basis,
    posterior_full,
    posterior_reduced,
)

__all__ = [
    "InfoScores",
    "ekld_cost",
    "full_mutual_information",
    "gaussian_entropy",
    "info_scores",
    "kl_gaussian",
    "kld_cost",
    "logdet_divergence",
    "mahalanobis_divergence",
    "mi_relative_error",
    "mutual_information",
    "posterior_entropy",
    "signal_eigenpairs",
]

# Round-off slack below zero tolerated on nonnegative quantities before the
# computation is declared broken; survivors are clamped to 0.
_NONNEG_TOL = 1e-10


@dataclass(frozen=True)
class InfoScores:
    """Diagnostic scores of one reduction basis, all in nats.

    ``j0`` is None when no realization ``y`` was available to evaluate the
    a posteriori divergence.
    """

    j0: float | None
    j1: float
    mi: float
    entropy: float
    mi_rel_err: float


def _clamped_nonneg(value: float, what: str) -> float:
    if value < -_NONNEG_TOL:
        raise ReductionError(
            f"{what} evaluated to {value:.6e}; conditioning is too poor to proceed"
        )
    return max(value, 0.0)


def logdet_divergence(c0, c1) -> float:
    """Bregman log-det divergence ``trace(C0 C1^{-1}) - log det(C0 C1^{-1}) - q``."""
    c0 = symmetrize(c0)
    c1 = symmetrize(c1)
    if c0.shape != c1.shape:
        raise DimensionMismatch(f"covariances differ in shape: {c0.shape} vs {c1.shape}")
    q = c0.shape[0]
    factor1 = spd_factor(c1)
    ratio = spd_factor_solve(factor1, c0)  # C1^{-1} C0
    factor0 = spd_factor(c0)
    value = float(np.trace(ratio)) - factor_logdet(factor0) + factor_logdet(factor1) - q
    return _clamped_nonneg(value, "log-det divergence")


def mahalanobis_divergence(c1, m0, m1) -> float:
    """Squared Mahalanobis distance ``(m0 - m1).T C1^{-1} (m0 - m1)``."""
    c1 = symmetrize(c1)
    m0 = np.asarray(m0, dtype=float).reshape(-1)
    m1 = np.asarray(m1, dtype=float).reshape(-1)
    if m0.size != m1.size or c1.shape[0] != m0.size:
        raise DimensionMismatch("mean vectors and covariance disagree in dimension")
    diff = m0 - m1
    value = float(diff @ spd_factor_solve(spd_factor(c1), diff))
    return _clamped_nonneg(value, "Mahalanobis divergence")


def kl_gaussian(p0: GaussianDist, p1: GaussianDist) -> float:
    """Kullback-Leibler divergence ``KL(p0 || p1)`` between two Gaussians."""
    if p0.dim != p1.dim:
        raise DimensionMismatch(f"distributions have dims {p0.dim} and {p1.dim}")
    value = 0.5 * (
        logdet_divergence(p0.cov, p1.cov)
        + mahalanobis_divergence(p1.cov, p0.mean, p1.mean)
    )
    return _clamped_nonneg(value, "Gaussian KL divergence")


def gaussian_entropy(p: GaussianDist) -> float:
    """Differential entropy ``(1/2) log det C + (d/2) log(2 pi e)`` in nats."""
    factor = spd_factor(p.cov)
    return 0.5 * factor_logdet(factor) + 0.5 * p.dim * math.log(2.0 * math.pi * math.e)


def kld_cost(problem: GaussianProblem, v, y) -> float:
    """Divergence of the reduced posterior from the full one at data ``y``."""
    full, _ = posterior_full(problem.moments, problem.prior, problem.noise, y)
    reduced, _ = posterior_reduced(problem.moments, problem.prior, problem.noise, v, y)
    return kl_gaussian(full, reduced)


def ekld_cost(problem: GaussianProblem, v) -> float:
    """Expected divergence of the reduced posterior over the data distribution.

    Closed form: with posterior maps ``(G, h)`` and ``(G_V, h_V)`` and the
    reduced covariance ``C_V``,

        (1/2) [ LDD(C_post, C_V)
                + trace(C_V^{-1} (G - G_V V.T) C_Y (G - G_V V.T).T)
                + (h - h_V).T C_V^{-1} (h - h_V) ].
    """
    basis = as_basis(v)
    obs = problem.observation()
    full, full_map = posterior_full(
        problem.moments, problem.prior, problem.noise, obs.mean
    )
    reduced, reduced_map = posterior_reduced(
        problem.moments, problem.prior, problem.noise, basis, obs.mean
    )
    factor = spd_factor(reduced.cov)
    delta = full_map.gain - reduced_map.gain @ basis.matrix.T  # q x n
    mean_spread = float(np.trace(spd_factor_solve(factor, delta @ obs.cov @ delta.T)))
    doffset = full_map.offset - reduced_map.offset
    offset_term = float(doffset @ spd_factor_solve(factor, doffset))
    value = 0.5 * (
        logdet_divergence(full.cov, reduced.cov) + mean_spread + offset_term
    )
    return _clamped_nonneg(value, "expected KL divergence")


def mutual_information(problem: GaussianProblem, v) -> float:
    """Mutual information between ``W = V.T Y`` and the parameter ``X``."""
    basis = as_basis(v)
    vmat = basis.matrix
    obs_cov = problem.moments.signal_cov + problem.noise.cov
    reduced_obs = symmetrize(vmat.T @ obs_cov @ vmat)
    reduced_noise = symmetrize(vmat.T @ problem.noise.cov @ vmat)
    pairs = gen_eig_spd(reduced_obs, reduced_noise)
    value = 0.5 * float(np.sum(np.log(pairs.values)))
    return _clamped_nonneg(value, "mutual information")


def posterior_entropy(problem: GaussianProblem, v) -> float:
    """Entropy of the reduced posterior; independent of the realization."""
    obs = problem.observation()
    reduced, _ = posterior_reduced(
        problem.moments, problem.prior, problem.noise, v, obs.mean
    )
    return gaussian_entropy(reduced)


def signal_eigenpairs(problem: GaussianProblem) -> EigenPairs:
    """Eigenpairs of ``signal_cov v = nu C_E v``, the signal-to-noise pencil.

    The values are the ``nu`` spectrum: nonnegative, descending, with at
    most ``rank(signal_cov)`` positive entries.
    """
    return gen_eig_spd(problem.moments.signal_cov, problem.noise.cov)


def _positive_count(nu: np.ndarray) -> int:
    if nu.size == 0 or nu[0] <= 0.0:
        return 0
    return int(np.count_nonzero(nu > PSD_CLAMP_REL * nu[0]))


def full_mutual_information(problem: GaussianProblem) -> float:
    """Mutual information of the unreduced observations, ``(1/2) sum log(1 + nu_i)``."""
    nu = signal_eigenpairs(problem).values
    m = _positive_count(nu)
    return 0.5 * float(np.sum(np.log1p(nu[:m])))


def mi_relative_error(nu, r: int, m: int | None = None) -> float:
    """A priori relative mutual-information loss of the rank-``r`` optimum.

    ``nu`` is the descending signal-to-noise spectrum and ``m`` the number
    of strictly positive entries (detected from the spectrum when omitted).
    Returns 0 whenever ``r >= m``: that many projections already conserve
    the full mutual information.
    """
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if r < 1:
        raise DimensionMismatch(f"r must be >= 1, got {r}")
    if m is None:
        m = _positive_count(nu)
    if m == 0:
        raise EmptySpectrum("all signal eigenvalues are zero; reduction is vacuous")
    if r >= m:
        return 0.0
    total = float(np.sum(np.log1p(nu[:m])))
    kept = float(np.sum(np.log1p(nu[:r])))
    return float(np.clip(1.0 - kept / total, 0.0, 1.0))


def info_scores(problem: GaussianProblem, v, y=None) -> InfoScores:
    """Recompute every diagnostic score of a basis from first principles.

    ``mi_rel_err`` is the realized relative loss ``1 - I(W,X)/I(Y,X)``,
    which for the optimal basis coincides with :func:`mi_relative_error`.
    """
    nu = signal_eigenpairs(problem).values
    m = _positive_count(nu)
    if m == 0:
        raise EmptySpectrum("all signal eigenvalues are zero; reduction is vacuous")
    total = 0.5 * float(np.sum(np.log1p(nu[:m])))
    mi = mutual_information(problem, v)
    rel = _clamped_nonneg(1.0 - mi / total, "relative mutual-information error")
    return InfoScores(
        j0=None if y is None else kld_cost(problem, v, y),
        j1=ekld_cost(problem, v),
        mi=mi,
        entropy=posterior_entropy(problem, v),
        mi_rel_err=min(rel, 1.0),
    )
