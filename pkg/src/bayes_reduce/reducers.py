"""Uniform front-end for every observation-reduction method.

Eight ways to pick an ``n x r`` projection basis:

* ``mi``         dominant eigenvectors of the signal-to-noise pencil,
                 the closed-form maximizer of the mutual information,
* ``kld``        trust-region minimization of the posterior divergence for
                 one realization (a posteriori),
* ``ekld``       trust-region minimization of the expected divergence,
* ``pca-a``      dominant eigenvectors of the signal covariance,
* ``pca-y``      dominant eigenvectors of the observation covariance,
* ``pca-yn``     noise-whitened variant, the ``(C_Y, C_E)`` pencil,
* ``centroids``  one representative observation per k-means cluster,
* ``cav``        equal-weight average of each k-means cluster.

Every reducer returns a :class:`ReductionReport` whose scores are
recomputed through the information module from the basis alone, so no
solver-internal value can leak into the diagnostics. Reports always carry
the signal-to-noise ``nu`` spectrum so the a priori error estimator is
available to callers regardless of the method.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .grassmann import (
    CostFunction,
    GrassmannPoint,
    SolverTrace,
    TrustRegionConfig,
    trust_region_solve,
)
from .information import (
    InfoScores,
    info_scores,
    mi_relative_error,
    signal_eigenpairs,
    _positive_count,
)
from .linalg import (
    EigenPairs,
    factor_logdet,
    gen_eig_spd,
    spd_factor,
    spd_factor_solve,
    sym_eig,
    symmetrize,
)
from .model import GaussianProblem, SubspaceBasis, posterior_full
from .sampling import rng_stream

__all__ = [
    "ClusterAssignment",
    "ReductionMethod",
    "ReductionReport",
    "compute_reduction",
    "ekld_cost_function",
    "kld_cost_function",
    "kmeans",
    "mi_cost_function",
    "reduce_centroids",
    "reduce_cluster_averages",
    "reduce_ekld",
    "reduce_kld",
    "reduce_mi",
    "reduce_pca",
]


class ReductionMethod(enum.Enum):
    """Exhaustive enumeration of the reduction methods."""

    MI = "mi"
    KLD = "kld"
    EKLD = "ekld"
    PCA_A = "pca-a"
    PCA_Y = "pca-y"
    PCA_YN = "pca-yn"
    CENTROIDS = "centroids"
    CLUSTER_AVG = "cav"

    @classmethod
    def from_tag(cls, tag: str) -> "ReductionMethod":
        for method in cls:
            if method.value == tag:
                return method
        raise ValueError(f"unknown reduction method {tag!r}")


@dataclass(frozen=True)
class ReductionReport:
    """Outcome of one reduction: basis, recomputed scores, spectra."""

    method: ReductionMethod
    r: int
    basis: SubspaceBasis
    scores: InfoScores
    spectrum: np.ndarray
    nu_spectrum: np.ndarray
    trace: SolverTrace | None = None
    wall_ms: int = 0


@dataclass(frozen=True)
class ClusterAssignment:
    """k-means labels, centroids and the total within-cluster inertia."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float


# ---------------------------------------------------------------------------
# Cost functions for the subspace optimizer
# ---------------------------------------------------------------------------


def _posterior_pieces(problem: GaussianProblem, y=None):
    """Shared precomputation for the divergence costs."""
    mm, prior, noise = problem.moments, problem.prior, problem.noise
    obs_cov = symmetrize(mm.signal_cov + noise.cov)
    obs_mean = mm.signal_mean + noise.mean
    probe = obs_mean if y is None else np.asarray(y, dtype=float).reshape(-1)
    full, full_map = posterior_full(mm, prior, noise, probe)
    prior_factor = spd_factor(prior.cov)
    return {
        "cross": mm.cross_cov,
        "signal_mean": mm.signal_mean,
        "obs_cov": obs_cov,
        "obs_mean": obs_mean,
        "noise_mean": noise.mean,
        "prior_cov": prior.cov,
        "prior_solve_mean": spd_factor_solve(prior_factor, prior.mean),
        "full_cov": full.cov,
        "full_mean": full.mean,
        "full_gain": full_map.gain,
        "full_offset": full_map.offset,
        "q": problem.q,
    }


def _reduced_core(pieces, vmat):
    """Reduced-posterior covariance factors at a basis ``vmat``."""
    cross = pieces["cross"]
    obs_cov = pieces["obs_cov"]
    t = symmetrize(vmat.T @ (obs_cov @ vmat))
    p = vmat.T @ cross
    t_factor = spd_factor(t)
    m = spd_factor_solve(t_factor, p)  # r x q, equals T^{-1} V.T cross
    cov = symmetrize(pieces["prior_cov"] - p.T @ m)
    cov_factor = spd_factor(cov)
    return t_factor, m, cov, cov_factor


def _logdet_gap(pieces, cov_factor, cov):
    """trace(C_post C_V^{-1}) - log det(C_post C_V^{-1}) - q via factors."""
    full_cov = pieces["full_cov"]
    ratio = spd_factor_solve(cov_factor, full_cov)
    full_factor = spd_factor(full_cov)
    return (
        float(np.trace(ratio))
        - factor_logdet(full_factor)
        + factor_logdet(cov_factor)
        - pieces["q"]
    )


def kld_cost_function(problem: GaussianProblem, y) -> CostFunction:
    """Posterior-divergence cost ``J0`` of a basis, with analytic gradient."""
    pieces = _posterior_pieces(problem, y)
    y = np.asarray(y, dtype=float).reshape(-1)
    shifted = y - pieces["noise_mean"]  # y - m_E
    z = pieces["prior_solve_mean"]

    def value(vmat: np.ndarray) -> float:
        t_factor, m, cov, cov_factor = _reduced_core(pieces, vmat)
        mean = m.T @ (vmat.T @ shifted) + cov @ z
        err = pieces["full_mean"] - mean
        maha = float(err @ spd_factor_solve(cov_factor, err))
        return 0.5 * (_logdet_gap(pieces, cov_factor, cov) + maha)

    def gradient(vmat: np.ndarray) -> np.ndarray:
        t_factor, m, cov, cov_factor = _reduced_core(pieces, vmat)
        obs_cov = pieces["obs_cov"]
        cross = pieces["cross"]
        mean = m.T @ (vmat.T @ shifted) + cov @ z
        err = pieces["full_mean"] - mean
        g = spd_factor_solve(cov_factor, err)
        inv_cov = spd_factor_solve(cov_factor, np.eye(cov.shape[0]))
        ratio = spd_factor_solve(cov_factor, pieces["full_cov"])
        inv_full_inv = spd_factor_solve(cov_factor, ratio.T).T
        omega = symmetrize(inv_cov - inv_full_inv - np.outer(g, g))
        obs_v = obs_cov @ vmat  # C_Y V, reused below
        residual = cross - obs_v @ m  # n x q, horizontal by construction
        u = spd_factor_solve(t_factor, vmat.T @ shifted)
        mg = m @ g
        return (
            -residual @ (omega @ m.T)
            - np.outer(residual @ g, u)
            - np.outer(shifted - obs_v @ u, mg)
            + np.outer(residual @ g, m @ z)
            + np.outer(residual @ z, mg)
        )

    return CostFunction(value=value, euclidean_gradient=gradient)


def ekld_cost_function(problem: GaussianProblem) -> CostFunction:
    """Expected-divergence cost ``J1`` of a basis, with analytic gradient."""
    pieces = _posterior_pieces(problem)
    z = pieces["prior_solve_mean"]
    signal_mean = pieces["signal_mean"]

    def _assemble(vmat):
        t_factor, m, cov, cov_factor = _reduced_core(pieces, vmat)
        delta = pieces["full_gain"] - m.T @ vmat.T  # q x n
        offset = cov @ z + m.T @ (vmat.T @ signal_mean)
        doffset = pieces["full_offset"] - offset
        return t_factor, m, cov, cov_factor, delta, doffset

    def value(vmat: np.ndarray) -> float:
        t_factor, m, cov, cov_factor, delta, doffset = _assemble(vmat)
        spread = delta @ (pieces["obs_cov"] @ delta.T)
        t1 = float(np.trace(spd_factor_solve(cov_factor, spread)))
        t2 = float(doffset @ spd_factor_solve(cov_factor, doffset))
        return 0.5 * (_logdet_gap(pieces, cov_factor, cov) + t1 + t2)

    def gradient(vmat: np.ndarray) -> np.ndarray:
        t_factor, m, cov, cov_factor, delta, doffset = _assemble(vmat)
        obs_cov = pieces["obs_cov"]
        cross = pieces["cross"]
        q = cov.shape[0]
        inv_cov = spd_factor_solve(cov_factor, np.eye(q))
        ratio = spd_factor_solve(cov_factor, pieces["full_cov"])
        inv_full_inv = spd_factor_solve(cov_factor, ratio.T).T
        spread = delta @ (obs_cov @ delta.T)
        spread_term = spd_factor_solve(cov_factor, spread)
        spread_term = spd_factor_solve(cov_factor, spread_term.T).T
        g1 = spd_factor_solve(cov_factor, doffset)
        omega = symmetrize(
            inv_cov - inv_full_inv - spread_term - np.outer(g1, g1)
        )
        obs_v = obs_cov @ vmat
        residual = cross - obs_v @ m
        u_a = spd_factor_solve(t_factor, vmat.T @ signal_mean)
        mg1 = m @ g1
        f_delta = spd_factor_solve(cov_factor, delta)  # C_V^{-1} Delta, q x n
        # d(trace part): -R (F Delta C_Y V) T^{-1} + (C_Y V T^{-1} V.T - I) C_Y Delta.T F M.T
        fdv = f_delta @ obs_v  # q x r
        fdv_t = spd_factor_solve(t_factor, fdv.T).T  # (F Delta C_Y V) T^{-1}
        w0 = obs_cov @ (f_delta.T @ m.T)  # n x r, equals C_Y Delta.T F M.T
        trace_part = obs_v @ spd_factor_solve(t_factor, vmat.T @ w0) - w0
        return (
            -residual @ (omega @ m.T)
            - residual @ fdv_t
            + trace_part
            - np.outer(residual @ g1, u_a)
            - np.outer(signal_mean - obs_v @ u_a, mg1)
            + np.outer(residual @ g1, m @ z)
            + np.outer(residual @ z, mg1)
        )

    return CostFunction(value=value, euclidean_gradient=gradient)


def mi_cost_function(problem: GaussianProblem) -> CostFunction:
    """Negated mutual information, so that minimizing maximizes I(W, X)."""
    obs_cov = symmetrize(problem.moments.signal_cov + problem.noise.cov)
    noise_cov = problem.noise.cov

    def value(vmat: np.ndarray) -> float:
        t_obs = spd_factor(symmetrize(vmat.T @ (obs_cov @ vmat)))
        t_noise = spd_factor(symmetrize(vmat.T @ (noise_cov @ vmat)))
        return -0.5 * (factor_logdet(t_obs) - factor_logdet(t_noise))

    def gradient(vmat: np.ndarray) -> np.ndarray:
        obs_v = obs_cov @ vmat
        noise_v = noise_cov @ vmat
        t_obs = spd_factor(symmetrize(vmat.T @ obs_v))
        t_noise = spd_factor(symmetrize(vmat.T @ noise_v))
        return -(
            spd_factor_solve(t_obs, obs_v.T).T
            - spd_factor_solve(t_noise, noise_v.T).T
        )

    return CostFunction(value=value, euclidean_gradient=gradient)


# ---------------------------------------------------------------------------
# Spectral reducers
# ---------------------------------------------------------------------------


def _check_rank(problem: GaussianProblem, r: int) -> None:
    if not 1 <= r <= problem.n:
        raise DimensionMismatch(f"r must satisfy 1 <= r <= {problem.n}, got {r}")


def reduce_mi(problem: GaussianProblem, r: int, y=None) -> ReductionReport:
    """Mutual-information-optimal basis from the signal-to-noise pencil.

    The attained value is ``(1/2) sum_{i<=r} log(1 + nu_i)`` and the
    reported ``mi_rel_err`` is the a priori estimate, which this basis
    realizes exactly.
    """
    _check_rank(problem, r)
    started = time.perf_counter()
    pairs = signal_eigenpairs(problem)
    basis = SubspaceBasis(pairs.vectors[:, :r])
    scores = info_scores(problem, basis, y)
    m = _positive_count(pairs.values)
    scores = InfoScores(
        j0=scores.j0,
        j1=scores.j1,
        mi=scores.mi,
        entropy=scores.entropy,
        mi_rel_err=mi_relative_error(pairs.values, r, m),
    )
    return ReductionReport(
        method=ReductionMethod.MI,
        r=r,
        basis=basis,
        scores=scores,
        spectrum=pairs.values.copy(),
        nu_spectrum=pairs.values.copy(),
        wall_ms=_elapsed_ms(started),
    )


def reduce_pca(problem: GaussianProblem, r: int, variant: str, y=None) -> ReductionReport:
    """Principal-component baselines on the observations.

    ``variant`` selects the eigenproblem: ``"a"`` analyzes the signal
    covariance, ``"y"`` the observation covariance, and ``"yn"`` the
    observations under the Mahalanobis metric of the noise, i.e.
    ``C_Y C_E^{-1} v = lambda v``. The latter shares its eigenvalues with
    the signal-to-noise pencil (shifted by one) but not its eigenvectors;
    it is realized through that pencil as ``v = C_E w``, so the noise
    covariance is never inverted. The stored spectrum holds the singular
    values ``sqrt(lambda_i)`` of the analyzed operator.
    """
    _check_rank(problem, r)
    started = time.perf_counter()
    variant = str(variant).lower().replace("pca-", "")
    obs_cov = symmetrize(problem.moments.signal_cov + problem.noise.cov)
    if variant == "a":
        pairs = sym_eig(problem.moments.signal_cov)
        method = ReductionMethod.PCA_A
    elif variant == "y":
        pairs = sym_eig(obs_cov)
        method = ReductionMethod.PCA_Y
    elif variant == "yn":
        pencil = gen_eig_spd(obs_cov, problem.noise.cov)
        pairs = EigenPairs(pencil.values, problem.noise.cov @ pencil.vectors)
        method = ReductionMethod.PCA_YN
    else:
        raise ValueError(f"unknown PCA variant {variant!r}")
    basis = SubspaceBasis(pairs.vectors[:, :r])
    return ReductionReport(
        method=method,
        r=r,
        basis=basis,
        scores=info_scores(problem, basis, y),
        spectrum=np.sqrt(np.clip(pairs.values, 0.0, None)),
        nu_spectrum=signal_eigenpairs(problem).values,
        wall_ms=_elapsed_ms(started),
    )


# ---------------------------------------------------------------------------
# Optimization-based reducers
# ---------------------------------------------------------------------------


def _optimize(problem, cost, r, config, restarts, seed):
    pairs = signal_eigenpairs(problem)
    starts = [GrassmannPoint.from_matrix(pairs.vectors[:, :r])]
    rng = rng_stream(int(seed), 0x5B)
    for _ in range(max(int(restarts), 1) - 1):
        starts.append(
            GrassmannPoint.from_matrix(rng.standard_normal((problem.n, r)))
        )
    best = None
    for start in starts:
        point, trace = trust_region_solve(cost, start, config)
        final = float(cost.value(point.basis))
        if best is None or final < best[0]:
            best = (final, point, trace)
    _, point, trace = best
    return point, trace, pairs.values


def reduce_kld(
    problem: GaussianProblem,
    y,
    r: int,
    config: TrustRegionConfig | None = None,
    restarts: int = 1,
    seed: int = 0,
) -> ReductionReport:
    """Minimize the posterior divergence for the realization ``y``.

    A posteriori method: a measurement is required to evaluate the cost.
    Starts from the mutual-information basis (additional random restarts
    are opt-in) and keeps the best converged subspace.
    """
    _check_rank(problem, r)
    started = time.perf_counter()
    cost = kld_cost_function(problem, y)
    point, trace, nu = _optimize(problem, cost, r, config, restarts, seed)
    basis = SubspaceBasis(point.basis)
    return ReductionReport(
        method=ReductionMethod.KLD,
        r=r,
        basis=basis,
        scores=info_scores(problem, basis, y),
        spectrum=nu.copy(),
        nu_spectrum=nu.copy(),
        trace=trace,
        wall_ms=_elapsed_ms(started),
    )


def reduce_ekld(
    problem: GaussianProblem,
    r: int,
    config: TrustRegionConfig | None = None,
    restarts: int = 1,
    seed: int = 0,
    y=None,
) -> ReductionReport:
    """Minimize the expected posterior divergence; no measurement needed."""
    _check_rank(problem, r)
    started = time.perf_counter()
    cost = ekld_cost_function(problem)
    point, trace, nu = _optimize(problem, cost, r, config, restarts, seed)
    basis = SubspaceBasis(point.basis)
    return ReductionReport(
        method=ReductionMethod.EKLD,
        r=r,
        basis=basis,
        scores=info_scores(problem, basis, y),
        spectrum=nu.copy(),
        nu_spectrum=nu.copy(),
        trace=trace,
        wall_ms=_elapsed_ms(started),
    )


# ---------------------------------------------------------------------------
# Clustering reducers
# ---------------------------------------------------------------------------


def kmeans(points, k: int, seed: int) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeding until the labels stabilize.

    An emptied cluster is re-seeded at the point farthest from its current
    centroid. Deterministic given ``seed``; at most 300 sweeps.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise DimensionMismatch(f"k must satisfy 1 <= k <= {n}, got {k}")
    rng = rng_stream(int(seed))

    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    closest = ((pts - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centroids[j] = pts[rng.integers(n)]
        else:
            centroids[j] = pts[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((pts - centroids[j]) ** 2).sum(axis=1))

    sq_dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = sq_dists.argmin(axis=1)
    for _ in range(300):
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = pts[members].mean(axis=0)
            else:
                assigned = sq_dists[np.arange(n), labels]
                centroids[j] = pts[int(assigned.argmax())]
        sq_dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = sq_dists.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    inertia = float(sq_dists[np.arange(n), labels].sum())
    return ClusterAssignment(labels=labels, centroids=centroids, inertia=inertia)


def _cluster_reduction(
    problem, locations, k, seed, y, averaging: bool
) -> tuple[SubspaceBasis, np.ndarray]:
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations.reshape(-1, 1)
    n = locations.shape[0]
    if n != problem.n:
        raise DimensionMismatch(
            f"{n} observation locations for a problem with n={problem.n}"
        )
    assignment = kmeans(locations, k, seed)
    basis = np.zeros((n, k))
    for j in range(k):
        members = np.flatnonzero(assignment.labels == j)
        if averaging:
            basis[members, j] = 1.0 / members.size
        else:
            dists = ((locations[members] - assignment.centroids[j]) ** 2).sum(axis=1)
            # argmin returns the first minimum, so ties resolve to the
            # lowest index because ``members`` is ascending.
            basis[members[int(dists.argmin())], j] = 1.0
    return SubspaceBasis(basis), assignment


def reduce_centroids(
    problem: GaussianProblem, locations, k: int, seed: int, y=None
) -> ReductionReport:
    """Keep one observation per cluster, the one nearest its centroid."""
    started = time.perf_counter()
    basis, _ = _cluster_reduction(problem, locations, k, seed, y, averaging=False)
    nu = signal_eigenpairs(problem).values
    return ReductionReport(
        method=ReductionMethod.CENTROIDS,
        r=k,
        basis=basis,
        scores=info_scores(problem, basis, y),
        spectrum=nu.copy(),
        nu_spectrum=nu,
        wall_ms=_elapsed_ms(started),
    )


def reduce_cluster_averages(
    problem: GaussianProblem, locations, k: int, seed: int, y=None
) -> ReductionReport:
    """Average all observations of each cluster with equal weights."""
    started = time.perf_counter()
    basis, _ = _cluster_reduction(problem, locations, k, seed, y, averaging=True)
    nu = signal_eigenpairs(problem).values
    return ReductionReport(
        method=ReductionMethod.CLUSTER_AVG,
        r=k,
        basis=basis,
        scores=info_scores(problem, basis, y),
        spectrum=nu.copy(),
        nu_spectrum=nu,
        wall_ms=_elapsed_ms(started),
    )


def compute_reduction(
    problem: GaussianProblem,
    method: ReductionMethod | str,
    r: int,
    *,
    y=None,
    locations=None,
    seed: int = 0,
    config: TrustRegionConfig | None = None,
) -> ReductionReport:
    """Dispatch to the reducer selected by ``method``."""
    if not isinstance(method, ReductionMethod):
        method = ReductionMethod.from_tag(str(method))
    if method is ReductionMethod.MI:
        return reduce_mi(problem, r, y)
    if method in (ReductionMethod.PCA_A, ReductionMethod.PCA_Y, ReductionMethod.PCA_YN):
        return reduce_pca(problem, r, method.value.replace("pca-", ""), y)
    if method is ReductionMethod.KLD:
        if y is None:
            raise EmptyInput("the kld method requires a measurement y")
        return reduce_kld(problem, y, r, config, seed=seed)
    if method is ReductionMethod.EKLD:
        return reduce_ekld(problem, r, config, seed=seed, y=y)
    if locations is None:
        raise EmptyInput(f"the {method.value} method requires observation locations")
    if method is ReductionMethod.CENTROIDS:
        return reduce_centroids(problem, locations, r, seed, y)
    return reduce_cluster_averages(problem, locations, r, seed, y)


def _elapsed_ms(started: float) -> int:
    return int(round(1000.0 * (time.perf_counter() - started)))
