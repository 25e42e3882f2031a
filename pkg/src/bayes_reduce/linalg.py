"""Dense symmetric and SPD linear algebra primitives.

Everything operates on plain ``numpy`` float arrays. SPD inputs are
symmetrized (``(M + M.T) / 2``) before factorization because downstream
covariance updates accumulate asymmetric round-off. No routine ever forms
an explicit matrix inverse; products with an inverse are realized as
Cholesky solves, and the generalized symmetric-definite eigenproblem is
reduced to a standard one through the Cholesky factor of the metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    NotSymmetric,
)

__all__ = [
    "EigenPairs",
    "PSD_CLAMP_REL",
    "cholesky",
    "gen_eig_spd",
    "logdet_spd",
    "solve_spd",
    "spd_factor",
    "spd_factor_solve",
    "sym_eig",
    "symmetrize",
]

# Relative magnitude below which a PSD eigenvalue is treated as exact zero.
PSD_CLAMP_REL = 1e-12

# Relative asymmetry tolerated before an input is rejected outright.
_SYM_TOL = 1e-8


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues sorted non-increasing, with matching eigenvector columns.

    For generalized problems ``A v = w B v`` the vectors are B-orthonormal,
    ``vectors.T @ B @ vectors == I``. Each vector is scaled so that its
    largest-magnitude entry is positive, which makes serialized bases
    reproducible.
    """

    values: np.ndarray
    vectors: np.ndarray


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return ``(m + m.T) / 2`` as a float array."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def _square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    return m


def _checked_symmetric(m, name="matrix") -> np.ndarray:
    m = _square(m, name)
    skew = np.abs(m - m.T).max(initial=0.0)
    scale = np.abs(m).max(initial=0.0)
    if skew > _SYM_TOL * max(scale, 1.0):
        raise NotSymmetric(
            f"{name} is asymmetric: max |M - M.T| = {skew:.3e} at scale {scale:.3e}"
        )
    return symmetrize(m)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of every column made positive; argmax picks the
    # lowest index on ties so the convention is deterministic.
    v = vectors.copy()
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0.0:
            v[:, j] = -v[:, j]
    return v


def cholesky(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``m == L @ L.T``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is non-positive.
    """
    m = _checked_symmetric(m)
    try:
        return sla.cholesky(m, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def logdet_spd(m) -> float:
    """Log-determinant of an SPD matrix via its Cholesky factor."""
    factor = cholesky(m)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def spd_factor(m):
    """Opaque Cholesky factorization handle for repeated solves."""
    m = _checked_symmetric(m)
    try:
        return sla.cho_factor(m, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def spd_factor_solve(factor, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` given a handle from :func:`spd_factor`."""
    return sla.cho_solve(factor, np.asarray(rhs, dtype=float))


def factor_logdet(factor) -> float:
    """Log-determinant from a handle produced by :func:`spd_factor`."""
    return float(2.0 * np.sum(np.log(np.diag(factor[0]))))


def solve_spd(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` for SPD ``m`` without forming ``m^{-1}``."""
    m = _square(m)
    rhs_arr = np.asarray(rhs, dtype=float)
    if rhs_arr.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"rhs has leading dimension {rhs_arr.shape[0]}, expected {m.shape[0]}"
        )
    return spd_factor_solve(spd_factor(m), rhs_arr)


def sym_eig(m) -> EigenPairs:
    """Full eigendecomposition of a symmetric matrix, values descending.

    The returned vectors are orthonormal and satisfy
    ``m @ v_i == values[i] * v_i`` to within LAPACK accuracy.
    """
    m = _checked_symmetric(m)
    values, vectors = sla.eigh(m)
    order = np.argsort(values)[::-1]
    return EigenPairs(values[order], _fix_signs(vectors[:, order]))


def gen_eig_spd(a, b) -> EigenPairs:
    """Generalized symmetric-definite eigenproblem ``a v = w b v``.

    ``a`` may be merely positive semidefinite (rank deficiency is allowed),
    ``b`` must be SPD. The problem is whitened through ``b = L L.T``: a
    standard symmetric solve of ``L^{-1} a L^{-T}`` followed by the back-map
    ``v = L^{-T} u``. ``b`` is never inverted. Returned vectors are
    b-orthonormal and values are sorted descending; values within
    ``PSD_CLAMP_REL`` of the dominant magnitude are clamped to exact zero so
    that the rank of a PSD ``a`` is recoverable by counting positives.
    """
    a = _checked_symmetric(a, "a")
    b = _square(b, "b")
    if a.shape != b.shape:
        raise DimensionMismatch(f"a has shape {a.shape}, b has shape {b.shape}")
    factor = cholesky(b)
    whitened = sla.solve_triangular(factor, a, lower=True)
    whitened = sla.solve_triangular(factor, whitened.T, lower=True)
    values, inner = sla.eigh(symmetrize(whitened))
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = sla.solve_triangular(factor, inner[:, order], lower=True, trans="T")
    if values.size:
        clamp = PSD_CLAMP_REL * np.abs(values).max()
        values = np.where(np.abs(values) <= clamp, 0.0, values)
    return EigenPairs(values, _fix_signs(vectors))
