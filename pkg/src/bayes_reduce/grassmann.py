"""Riemannian trust-region solver on the manifold of r-dim subspaces of R^n.

Points are orthonormal ``n x r`` matrices. Every cost optimized here is
invariant under right-multiplication of the basis by an invertible ``r x r``
matrix, so the optimizer really moves through equivalence classes and keeps
the canonical orthonormal representative. Tangent (horizontal) vectors are
``n x r`` arrays ``d`` with ``V.T d = 0``; the Riemannian metric is the
Frobenius inner product.

The outer loop is a classical trust region: solve the quadratic model

    m(d) = f(V) + <grad, d> + (1/2) <H d, d>,   |d| <= Delta

with a Steihaug truncated conjugate gradient (stopping on negative
curvature or at the boundary), retract the step with a thin QR, and adapt
the radius from the agreement ratio rho between actual and predicted
decrease. Hessian-vector products are forward finite differences of the
Riemannian gradient along the retraction, so only cost values and Euclidean
gradients are ever required; if a cost supplies no gradient, a central
finite-difference fallback is used.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    NonFiniteGradient,
    NonFiniteInput,
    RankCollapse,
)

__all__ = [
    "CostFunction",
    "GrassmannPoint",
    "IterationRecord",
    "SolverTrace",
    "TrustRegionConfig",
    "principal_angles",
    "project_tangent",
    "retract_qr",
    "riemannian_gradient",
    "trust_region_solve",
    "truncated_cg",
]


@dataclass(frozen=True)
class GrassmannPoint:
    """Canonical orthonormal representative of an r-dimensional subspace."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] < basis.shape[1]:
            raise DimensionMismatch(f"point must be n x r with n >= r, got {basis.shape}")
        gram = basis.T @ basis
        if np.abs(gram - np.eye(basis.shape[1])).max() > 1e-10:
            raise NonFiniteInput(
                "basis columns are not orthonormal; use GrassmannPoint.from_matrix"
            )
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_matrix(cls, matrix) -> "GrassmannPoint":
        """Orthonormalize an arbitrary full-rank matrix into a point."""
        matrix = np.asarray(matrix, dtype=float)
        q, r = sla.qr(matrix, mode="economic")
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return cls(q * signs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.basis.shape


@dataclass(frozen=True)
class CostFunction:
    """Scalar cost over ``n x r`` bases, with an optional Euclidean gradient.

    When ``euclidean_gradient`` is None the gradient falls back to central
    finite differences with entrywise step ``fd_step * (1 + |V_ij|)``.
    """

    value: Callable[[np.ndarray], float]
    euclidean_gradient: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-6


@dataclass(frozen=True)
class TrustRegionConfig:
    """Hyperparameters of the trust-region loop.

    ``delta_max`` defaults to ``sqrt(r (n - r))`` and ``delta0`` to an
    eighth of that; ``max_inner`` defaults to ``4 r (n - r)``, four times
    the manifold dimension. ``None`` fields are resolved when the solve
    starts.
    """

    delta0: float | None = None
    delta_max: float | None = None
    rho_accept: float = 0.25
    rho_expand: float = 0.75
    grad_tol: float = 1e-8
    max_outer: int = 500
    max_inner: int | None = None
    fd_step: float = 1e-6
    max_rejections: int = 25

    def __post_init__(self):
        if not 0.0 < self.rho_accept < self.rho_expand < 1.0:
            raise ValueError("need 0 < rho_accept < rho_expand < 1")
        if self.delta0 is not None and self.delta_max is not None:
            if self.delta0 > self.delta_max:
                raise ValueError("delta0 must not exceed delta_max")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    grad_norm: float
    delta: float
    rho: float
    step_norm: float
    accepted: bool


@dataclass
class SolverTrace:
    """Per-iteration diagnostics of one trust-region run."""

    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    wall_ms: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("iteration,cost,grad_norm,delta,rho,accepted\n")
            for rec in self.records:
                handle.write(
                    f"{rec.iteration},{rec.cost!r},{rec.grad_norm!r},"
                    f"{rec.delta!r},{rec.rho!r},{int(rec.accepted)}\n"
                )


def _point_matrix(v) -> np.ndarray:
    if isinstance(v, GrassmannPoint):
        return v.basis
    return np.asarray(v, dtype=float)


def project_tangent(v, z) -> np.ndarray:
    """Project ``z`` onto the horizontal space at ``v``: ``(I - V V.T) z``."""
    vmat = _point_matrix(v)
    z = np.asarray(z, dtype=float)
    if z.shape != vmat.shape:
        raise DimensionMismatch(f"direction shape {z.shape} != point shape {vmat.shape}")
    return z - vmat @ (vmat.T @ z)


def retract_qr(v, d) -> GrassmannPoint:
    """Map a horizontal step back to the manifold via thin QR of ``V + d``.

    First-order accurate in ``d`` with second-order error; the zero step
    returns ``v`` unchanged.
    """
    vmat = _point_matrix(v)
    d = np.asarray(d, dtype=float)
    if d.shape != vmat.shape:
        raise DimensionMismatch(f"step shape {d.shape} != point shape {vmat.shape}")
    if not d.any():
        return v if isinstance(v, GrassmannPoint) else GrassmannPoint(vmat)
    target = vmat + d
    q, r = sla.qr(target, mode="economic")
    diag = np.diag(r)
    if np.abs(diag).min() <= 1e-12 * max(np.abs(diag).max(), 1.0):
        raise RankCollapse("retraction target V + d is rank deficient")
    signs = np.sign(diag)
    signs[signs == 0] = 1.0
    return GrassmannPoint(q * signs)


def _fd_euclidean_gradient(value, vmat, step) -> np.ndarray:
    grad = np.empty_like(vmat)
    for i in range(vmat.shape[0]):
        for j in range(vmat.shape[1]):
            h = step * (1.0 + abs(vmat[i, j]))
            bumped = vmat.copy()
            bumped[i, j] += h
            up = value(bumped)
            bumped[i, j] -= 2.0 * h
            down = value(bumped)
            grad[i, j] = (up - down) / (2.0 * h)
    return grad


def riemannian_gradient(cost: CostFunction, v) -> np.ndarray:
    """Horizontal projection of the Euclidean cost gradient at ``v``."""
    vmat = _point_matrix(v)
    if cost.euclidean_gradient is not None:
        egrad = np.asarray(cost.euclidean_gradient(vmat), dtype=float)
    else:
        egrad = _fd_euclidean_gradient(cost.value, vmat, cost.fd_step)
    if not np.all(np.isfinite(egrad)):
        raise NonFiniteGradient("cost gradient contains non-finite entries")
    return project_tangent(vmat, egrad)


def _inner(a, b) -> float:
    return float(np.sum(a * b))


def _boundary_step(s, d, radius):
    # Positive root of |s + tau d| = radius.
    ss = _inner(s, s)
    sd = _inner(s, d)
    dd = _inner(d, d)
    disc = sd * sd + dd * (radius * radius - ss)
    tau = (-sd + np.sqrt(max(disc, 0.0))) / dd
    return s + tau * d


def truncated_cg(grad, hess_vec, radius, max_inner, kappa=0.1, theta=1.0):
    """Steihaug-Toint truncated CG on the trust-region subproblem.

    Minimizes ``<grad, d> + (1/2) <H d, d>`` within the ball of the given
    radius, stopping at negative curvature or at the boundary (returning
    the boundary intersection in both cases), or once the residual has
    shrunk by ``min(kappa, |r0|^theta)``. The returned step never increases
    the model.
    """
    grad = np.asarray(grad, dtype=float)
    step = np.zeros_like(grad)
    residual = grad.copy()
    direction = -residual
    res_norm0 = np.sqrt(_inner(residual, residual))
    if res_norm0 == 0.0 or radius <= 0.0:
        return step
    threshold = res_norm0 * min(kappa, res_norm0**theta)
    rr = res_norm0 * res_norm0
    for _ in range(max(int(max_inner), 1)):
        h_dir = hess_vec(direction)
        curvature = _inner(direction, h_dir)
        if curvature <= 0.0:
            return _boundary_step(step, direction, radius)
        alpha = rr / curvature
        candidate = step + alpha * direction
        if _inner(candidate, candidate) >= radius * radius:
            return _boundary_step(step, direction, radius)
        step = candidate
        residual = residual + alpha * h_dir
        rr_new = _inner(residual, residual)
        if np.sqrt(rr_new) <= threshold:
            break
        direction = -residual + (rr_new / rr) * direction
        rr = rr_new
    return step


def trust_region_solve(
    cost: CostFunction,
    v0,
    config: TrustRegionConfig | None = None,
) -> tuple[GrassmannPoint, SolverTrace]:
    """Minimize ``cost`` over subspaces starting from ``v0``.

    Returns the best accepted iterate together with a :class:`SolverTrace`.
    Termination: gradient norm below ``grad_tol`` (converged), the outer
    iteration budget, or ``max_rejections`` consecutive rejected steps
    (stalled); the two latter cases leave ``trace.converged`` False. The
    accepted-iterate cost sequence is non-increasing.
    """
    cfg = config or TrustRegionConfig()
    point = v0 if isinstance(v0, GrassmannPoint) else GrassmannPoint.from_matrix(v0)
    n, r = point.shape
    delta_max = cfg.delta_max if cfg.delta_max is not None else np.sqrt(r * (n - r))
    delta = cfg.delta0 if cfg.delta0 is not None else delta_max / 8.0
    max_inner = cfg.max_inner if cfg.max_inner is not None else 4 * r * (n - r)

    trace = SolverTrace()
    started = time.perf_counter()
    current_cost = float(cost.value(point.basis))
    if not np.isfinite(current_cost):
        raise NonFiniteInput("cost is not finite at the starting point")

    rejections = 0
    for iteration in range(cfg.max_outer):
        grad = riemannian_gradient(cost, point.basis)
        grad_norm = np.sqrt(_inner(grad, grad))
        if grad_norm <= cfg.grad_tol:
            trace.converged = True
            trace.reason = "gradient tolerance reached"
            break

        def hess_vec(d, _point=point, _grad=grad):
            norm = np.sqrt(_inner(d, d))
            if norm == 0.0:
                return np.zeros_like(d)
            t = cfg.fd_step / norm
            moved = retract_qr(_point, t * d)
            grad_moved = riemannian_gradient(cost, moved.basis)
            return (project_tangent(_point.basis, grad_moved) - _grad) / t

        step = truncated_cg(grad, hess_vec, delta, max_inner)
        step_norm = np.sqrt(_inner(step, step))
        if step_norm == 0.0:
            trace.converged = True
            trace.reason = "null step"
            break
        predicted = -(_inner(grad, step) + 0.5 * _inner(step, hess_vec(step)))

        candidate = retract_qr(point, step)
        candidate_cost = float(cost.value(candidate.basis))
        if predicted <= 0.0 or not np.isfinite(candidate_cost):
            rho = -np.inf
        else:
            rho = (current_cost - candidate_cost) / predicted

        accepted = rho > cfg.rho_accept
        trace.records.append(
            IterationRecord(
                iteration=iteration,
                cost=float(current_cost),
                grad_norm=float(grad_norm),
                delta=float(delta),
                rho=float(rho),
                step_norm=float(step_norm),
                accepted=accepted,
            )
        )
        if accepted:
            point = candidate
            current_cost = candidate_cost
            rejections = 0
        else:
            rejections += 1
            if rejections >= cfg.max_rejections:
                trace.reason = "stalled: consecutive rejections"
                break

        if rho < cfg.rho_accept:
            delta = delta / 4.0
        elif rho > cfg.rho_expand and step_norm >= 0.99 * delta:
            delta = min(2.0 * delta, delta_max)
    else:
        trace.reason = "outer iteration budget exhausted"

    trace.wall_ms = int(round(1000.0 * (time.perf_counter() - started)))
    if not trace.reason:
        trace.reason = "stalled: consecutive rejections"
    return point, trace


def principal_angles(a, b) -> np.ndarray:
    """Principal angles between the column spans of two full-rank matrices.

    Ascending, in radians. Small angles are evaluated through the sine
    (singular values of the projection residual) because the cosine
    saturates at 1 and would floor tiny angles at sqrt(eps).
    """
    qa = GrassmannPoint.from_matrix(a).basis
    qb = GrassmannPoint.from_matrix(b).basis
    overlap = qa.T @ qb
    cosines = sla.svd(overlap, compute_uv=False)
    sines = np.sort(sla.svd(qb - qa @ overlap, compute_uv=False))[: cosines.size]
    return np.where(
        cosines**2 > 0.5,
        np.arcsin(np.clip(sines, 0.0, 1.0)),
        np.arccos(np.clip(cosines, -1.0, 1.0)),
    )
