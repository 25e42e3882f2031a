"""Nonlinear forwards: MAP estimation, Laplace approximation, error metrics.

A nonlinear observation model ``Y = A(X) + E`` enters the reduction
machinery through the same moment triple as the linear case. For the
log-normal forward ``A_i(x) = exp((B x)_i)`` with ``X ~ N(0, C_X)`` the
triple is analytic: with ``D = B C_X B.T``,

    signal_mean_i = exp(D_ii / 2)
    signal_cov_ij = exp((D_ii + D_jj) / 2) (exp(D_ij) - 1)
    cross_cov_ij  = signal_mean_i (B C_X)_ij.

Posterior accuracy of a reduction basis ``V`` is measured through the
maximum a posteriori point: the reduced likelihood observes ``W = V.T y``
with exact Gaussian noise ``V.T C_E V``, the MAP is found by a trust-region
Newton method on the log posterior, and the local Gaussian (Laplace)
approximation is ``N(x_map, precision^{-1})`` with precision equal to the
negated log-posterior Hessian. Reduction errors are the ratio estimators

    eps   = sum |x_map_V - x_map| / sum |x_map|
    eps_h = sum |prec_V - prec|_F / sum |prec|_F

summed over realizations of the data (ratio of expectations, not
expectation of ratios), plus the per-realization hatted variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    MaxIterationsExceeded,
    MomentOverflow,
    NotPositiveDefinite,
)
from .grassmann import truncated_cg
from .linalg import spd_factor, spd_factor_solve, sym_eig, symmetrize
from .model import GaussianDist, ModelMoments, GaussianProblem, as_basis
from .sampling import rng_stream, sample_gaussian

__all__ = [
    "LaplaceApprox",
    "LognormalModel",
    "MapErrorReport",
    "NonlinearForward",
    "check_unimodal",
    "linear_forward",
    "log_posterior",
    "lognormal_moments",
    "make_log_posterior",
    "map_errors",
    "map_newton",
]

# Largest diagonal of D = B C_X B.T before exp() leaves double range.
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class NonlinearForward:
    """Forward map with its Jacobian and precomputed moment triple.

    ``curvature(x, w)`` must return ``sum_k w_k Hess(A_k)(x)``, the
    w-weighted sum of component Hessians; leave it None to fall back to a
    Gauss-Newton Hessian (flagged on the resulting Laplace approximations).
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    moments: ModelMoments
    curvature: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def linear_forward(design, prior: GaussianDist) -> NonlinearForward:
    """Wrap a linear design matrix as a forward with zero curvature."""
    design = np.asarray(design, dtype=float)
    cross = design @ prior.cov
    moments = ModelMoments(
        signal_mean=design @ prior.mean,
        signal_cov=symmetrize(cross @ design.T),
        cross_cov=cross,
    )
    q = design.shape[1]
    return NonlinearForward(
        evaluate=lambda x: design @ x,
        jacobian=lambda x: design,
        moments=moments,
        curvature=lambda x, w: np.zeros((q, q)),
    )


def lognormal_moments(design, prior_cov) -> ModelMoments:
    """Analytic moment triple of ``A_i(x) = exp((B x)_i)``, ``X ~ N(0, C_X)``."""
    design = np.asarray(design, dtype=float)
    prior_cov = symmetrize(prior_cov)
    d = symmetrize(design @ prior_cov @ design.T)
    diag = np.diag(d)
    if diag.size and diag.max() > _EXP_LIMIT:
        raise MomentOverflow(
            f"max field variance {diag.max():.3g} exceeds the exp() overflow guard"
        )
    mean = np.exp(0.5 * diag)
    cov = symmetrize(np.outer(mean, mean) * np.expm1(d))
    cross = mean[:, None] * (design @ prior_cov)
    return ModelMoments(signal_mean=mean, signal_cov=cov, cross_cov=cross)


@dataclass(frozen=True)
class LognormalModel:
    """Exponential of a linear Gaussian field, ``A_i(x) = exp((B x)_i)``."""

    design: np.ndarray
    prior_variances: np.ndarray

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        variances = np.asarray(self.prior_variances, dtype=float).reshape(-1)
        if design.shape[1] != variances.size:
            raise DimensionMismatch(
                f"design has {design.shape[1]} columns, got {variances.size} variances"
            )
        if np.any(variances <= 0.0):
            raise NotPositiveDefinite("prior variances must be strictly positive")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "prior_variances", variances)

    @property
    def prior(self) -> GaussianDist:
        return GaussianDist(
            np.zeros(self.prior_variances.size), np.diag(self.prior_variances)
        )

    def forward(self) -> NonlinearForward:
        design = self.design

        def evaluate(x):
            with np.errstate(over="ignore"):
                return np.exp(design @ x)

        def jacobian(x):
            return evaluate(x)[:, None] * design

        def curvature(x, w):
            # Hess(A_k) = A_k(x) b_k b_k.T with b_k the k-th design row.
            return design.T @ ((w * evaluate(x))[:, None] * design)

        return NonlinearForward(
            evaluate=evaluate,
            jacobian=jacobian,
            moments=lognormal_moments(design, np.diag(self.prior_variances)),
            curvature=curvature,
        )


class _LogPosterior:
    """Log posterior density of ``X`` given full or reduced observations."""

    def __init__(self, forward, prior, noise, y, v=None):
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != noise.dim:
            raise DimensionMismatch(f"y has length {y.size}, expected {noise.dim}")
        self.forward = forward
        self.prior = prior
        self.basis = None if v is None else as_basis(v)
        if self.basis is None:
            self._data = y - noise.mean
            self._noise_factor = spd_factor(noise.cov)
        else:
            vmat = self.basis.matrix
            self._data = vmat.T @ (y - noise.mean)
            self._noise_factor = spd_factor(symmetrize(vmat.T @ noise.cov @ vmat))
        self._prior_factor = spd_factor(prior.cov)
        self._prior_precision = spd_factor_solve(
            self._prior_factor, np.eye(prior.dim)
        )
        self.gauss_newton = forward.curvature is None

    def _residual(self, x):
        prediction = self.forward.evaluate(x)
        if self.basis is not None:
            prediction = self.basis.matrix.T @ prediction
        return self._data - prediction

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        residual = self._residual(x)
        if not np.all(np.isfinite(residual)):
            return -math.inf
        dx = x - self.prior.mean
        return float(
            -0.5 * residual @ spd_factor_solve(self._noise_factor, residual)
            - 0.5 * dx @ spd_factor_solve(self._prior_factor, dx)
        )

    def value_grad_hess(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        residual = self._residual(x)
        if not np.all(np.isfinite(residual)):
            q = self.prior.dim
            return -math.inf, np.zeros(q), -np.eye(q)
        jac = self.forward.jacobian(x)
        if self.basis is not None:
            jac = self.basis.matrix.T @ jac
        weighted = spd_factor_solve(self._noise_factor, residual)
        dx = x - self.prior.mean
        prior_pull = spd_factor_solve(self._prior_factor, dx)
        value = float(-0.5 * residual @ weighted - 0.5 * dx @ prior_pull)
        grad = jac.T @ weighted - prior_pull
        hess = -jac.T @ spd_factor_solve(self._noise_factor, jac) - self._prior_precision
        if self.forward.curvature is not None:
            pulled = weighted if self.basis is None else self.basis.matrix @ weighted
            hess = hess + self.forward.curvature(x, pulled)
        return value, grad, symmetrize(hess)


def make_log_posterior(forward, prior, noise, y, v=None) -> _LogPosterior:
    """Build a reusable log-posterior object (factorizations are cached)."""
    return _LogPosterior(forward, prior, noise, y, v)


def log_posterior(forward, prior, noise, y, x, v=None):
    """Log posterior density with gradient and Hessian at ``x``.

    The additive constant is dropped. With a basis ``v`` the likelihood is
    that of the reduced observation ``V.T y`` under noise ``V.T C_E V``.
    """
    return make_log_posterior(forward, prior, noise, y, v).value_grad_hess(x)


@dataclass(frozen=True)
class LaplaceApprox:
    """Gaussian approximation ``N(x_map, precision^{-1})`` at the MAP point."""

    x_map: np.ndarray
    precision: np.ndarray
    n_iter: int = 0
    gauss_newton: bool = False
    spd_projected: bool = False

    @property
    def covariance(self) -> np.ndarray:
        return spd_factor_solve(spd_factor(self.precision), np.eye(self.precision.shape[0]))


def map_newton(logpost, x0, tol: float = 1e-8, max_iter: int = 200) -> LaplaceApprox:
    """Maximize a log posterior by a trust-region Newton method.

    ``logpost`` is an object from :func:`make_log_posterior` (anything with
    ``value`` and ``value_grad_hess``). Terminates when the gradient norm
    drops below ``tol * (1 + |x|)``. When round-off in the cost value stalls
    the trust region before that (possible whenever ``eps * |f|`` exceeds
    the achievable decrease), the point is accepted if its gradient meets
    the looser ``1e-6 * (1 + |x|)`` quality floor, otherwise the solve
    fails. The returned precision is the negated Hessian at the solution,
    eigenvalue-floored to SPD if necessary (the ``spd_projected`` flag
    records whether flooring changed the spectrum noticeably).
    """
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    value, grad, hess = logpost.value_grad_hess(x)
    if not np.isfinite(value):
        raise ValueError("log posterior is not finite at the starting point")

    quality_floor = 1e-6
    delta = max(1.0, float(np.linalg.norm(x)))
    delta_max = 1e3 * delta
    iterations = 0
    rejections = 0
    converged = False
    stalled = False
    for _ in range(max_iter):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol * (1.0 + float(np.linalg.norm(x))):
            converged = True
            break
        if stalled:
            break
        # Minimizing f = -logpost, so the subproblem sees -grad and -hess.
        step = truncated_cg(-grad, lambda d: -hess @ d, delta, 10 * x.size)
        predicted = -(float((-grad) @ step) + 0.5 * float(step @ (-hess @ step)))
        candidate = x + step
        candidate_value = logpost.value(candidate)
        if predicted <= 0.0 or not np.isfinite(candidate_value):
            rho = -np.inf
        else:
            rho = (candidate_value - value) / predicted
        if rho > 0.25:
            x = candidate
            value, grad, hess = logpost.value_grad_hess(x)
            rejections = 0
        else:
            rejections += 1
        if rho < 0.25:
            delta /= 4.0
        elif rho > 0.75 and np.linalg.norm(step) >= 0.99 * delta:
            delta = min(2.0 * delta, delta_max)
        iterations += 1
        # Progress is impossible once the radius shrinks to round-off or
        # the model decrease sinks under the value's resolution.
        stalled = rejections >= 20 or delta <= 1e-14 * (1.0 + float(np.linalg.norm(x)))
    if not converged:
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= quality_floor * (1.0 + float(np.linalg.norm(x))):
            converged = True
    if not converged:
        raise MaxIterationsExceeded(
            f"MAP search did not converge in {iterations} iterations "
            f"(gradient norm {float(np.linalg.norm(grad)):.3e})"
        )

    precision = symmetrize(-hess)
    spd_projected = False
    pairs = sym_eig(precision)
    floor = 1e-12 * max(pairs.values.max(), 1e-300)
    if pairs.values.min() < floor:
        clipped = np.clip(pairs.values, floor, None)
        precision = symmetrize(
            (pairs.vectors * clipped) @ pairs.vectors.T
        )
        spd_projected = bool(np.abs(clipped - pairs.values).max() > 1e-8)
    return LaplaceApprox(
        x_map=x,
        precision=precision,
        n_iter=iterations,
        gauss_newton=getattr(logpost, "gauss_newton", False),
        spd_projected=spd_projected,
    )


def check_unimodal(logpost, prior: GaussianDist, n_starts: int, seed: int) -> float:
    """Normalized spread of MAP solutions from random prior starts.

    Runs :func:`map_newton` from ``n_starts`` prior draws and returns
    ``max |x_i - x_j| / (1 + mean |x|)``; values near zero indicate a
    unimodal posterior.
    """
    if n_starts < 2:
        raise EmptyInput("need at least two starts to measure a spread")
    starts = sample_gaussian(prior, n_starts, rng_stream(int(seed), 0x0D))
    solutions = np.stack(
        [map_newton(logpost, start).x_map for start in starts]
    )
    spread = max(
        float(np.linalg.norm(solutions[i] - solutions[j]))
        for i in range(n_starts)
        for j in range(i + 1, n_starts)
    )
    mean_norm = float(np.mean(np.linalg.norm(solutions, axis=1)))
    return spread / (1.0 + mean_norm)


@dataclass(frozen=True)
class MapErrorReport:
    """Ratio-of-expectations errors on the MAP point and its precision."""

    eps: float
    eps_h: float
    per_sample: list[tuple[float, float]]
    n_samples: int


def map_errors(full: list[LaplaceApprox], reduced: list[LaplaceApprox]) -> MapErrorReport:
    """Relative MAP and Hessian errors over paired realizations.

    ``full[i]`` and ``reduced[i]`` must come from the same data realization.
    The aggregate estimators are sums-over-realizations ratios; the
    per-sample entries are the single-realization hatted variants.
    """
    if len(full) == 0 or len(full) != len(reduced):
        raise EmptyInput("need equally many full and reduced approximations, at least one")
    num_x = den_x = num_h = den_h = 0.0
    per_sample = []
    for fa, ra in zip(full, reduced):
        dx = float(np.linalg.norm(ra.x_map - fa.x_map))
        nx = float(np.linalg.norm(fa.x_map))
        dh = float(np.linalg.norm(ra.precision - fa.precision, "fro"))
        nh = float(np.linalg.norm(fa.precision, "fro"))
        num_x += dx
        den_x += nx
        num_h += dh
        den_h += nh
        per_sample.append((dx / nx if nx > 0 else 0.0, dh / nh if nh > 0 else 0.0))
    return MapErrorReport(
        eps=num_x / den_x if den_x > 0 else 0.0,
        eps_h=num_h / den_h if den_h > 0 else 0.0,
        per_sample=per_sample,
        n_samples=len(full),
    )


def problem_from_forward(forward: NonlinearForward, prior: GaussianDist, noise: GaussianDist) -> GaussianProblem:
    """Gaussian surrogate problem of a nonlinear forward via its moments."""
    return GaussianProblem(forward.moments, prior, noise)
