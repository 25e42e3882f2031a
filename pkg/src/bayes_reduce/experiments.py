"""Problem generators, experiment orchestration, and CSV emission.

Three experiment families are built in:

* ``regression1d``   polynomial regression on Chebyshev features with a
                     Matern-3/2 prior over coefficients and a correlated
                     exponential-plus-nugget noise process on (-1, 1),
* ``lognormal2d``    exponential of a truncated Karhunen-Loeve expansion of
                     a squared-exponential Gaussian field on (-1, 1)^2,
                     observed with correlated noise; the data come from the
                     untruncated field so model error is present,
* ``clustering``     a linear Gaussian-field problem on (-1, 1)^2 with
                     heavy white noise, for the cluster-based reducers.

``run_experiment`` evaluates a (method, r) grid, scores every basis through
the information module (and, for nonlinear experiments, through MAP error
estimators), and writes one CSV row per pair. The whole pipeline is a pure
function of the configuration and its seeds: rerunning writes bytes
identical output. The ``BAYES_REDUCE_THREADS`` environment variable caps
the worker pool (default: number of cores); scheduling cannot change the
output because rows are buffered and sorted before writing.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonFiniteInput, PointOutOfRange
from .linalg import cholesky, sym_eig, symmetrize
from .model import GaussianDist, GaussianProblem, LinearGaussianModel
from .nonlinear import (
    LaplaceApprox,
    LognormalModel,
    NonlinearForward,
    linear_forward,
    make_log_posterior,
    map_errors,
    map_newton,
)
from .reducers import ReductionMethod, ReductionReport, compute_reduction
from .sampling import rng_stream, sample_gaussian

__all__ = [
    "ExperimentConfig",
    "ExperimentSetup",
    "KernelSpec",
    "ResultRow",
    "build_kernel_matrix",
    "chebyshev_design",
    "load_model_json",
    "dump_model_json",
    "rows_to_csv",
    "run_experiment",
    "sample_gaussian",
    "setup_clustering",
    "setup_lognormal2d",
    "setup_regression1d",
]

_KERNEL_FAMILIES = ("matern32_indexed", "exponential", "squared_exponential", "white")

CSV_HEADER = "method,r,j0,j1,mi_rel_err,entropy,eps,eps_h,seed,wall_ms"


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel family with amplitude, length scale and nugget.

    ``amplitude`` and ``nugget`` are standard deviations: the Gram matrix
    is ``amplitude^2 k(.) + nugget^2 I``.
    """

    family: str
    amplitude: float = 1.0
    length_scale: float | None = None
    nugget: float = 0.0

    def __post_init__(self):
        if self.family not in _KERNEL_FAMILIES:
            raise ConfigError(
                f"unknown kernel family {self.family!r}; choose from {_KERNEL_FAMILIES}"
            )
        if self.amplitude <= 0.0:
            raise ConfigError("kernel amplitude must be positive")
        if self.nugget < 0.0:
            raise ConfigError("kernel nugget must be nonnegative")
        needs_scale = self.family in ("exponential", "squared_exponential")
        if needs_scale and (self.length_scale is None or self.length_scale <= 0.0):
            raise ConfigError(f"kernel family {self.family!r} needs a positive length_scale")


def build_kernel_matrix(spec: KernelSpec, locations) -> np.ndarray:
    """Gram matrix of the kernel over the locations, plus the nugget.

    ``locations`` is ``(m,)`` or ``(m, d)``. The result is verified SPD;
    failure signals that the nugget is too small for the family.
    """
    pts = np.asarray(locations, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise NonFiniteInput("locations contain non-finite entries")
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    m = pts.shape[0]
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    amp2 = spec.amplitude**2
    if spec.family == "matern32_indexed":
        scaled = np.sqrt(1200.0) * dist / max(m - 1, 1)
        gram = amp2 * (1.0 + scaled) * np.exp(-scaled)
    elif spec.family == "exponential":
        gram = amp2 * np.exp(-dist / spec.length_scale)
    elif spec.family == "squared_exponential":
        gram = amp2 * np.exp(-(dist**2) / (2.0 * spec.length_scale**2))
    else:  # white
        gram = amp2 * np.eye(m)
    gram = symmetrize(gram) + spec.nugget**2 * np.eye(m)
    cholesky(gram)  # SPD check; raises NotPositiveDefinite
    return gram


def chebyshev_design(points, q: int) -> np.ndarray:
    """Design matrix of the first ``q`` Chebyshev polynomials of the first kind.

    Column ``j`` holds ``T_j`` evaluated at the points, built by the
    recurrence ``T_0 = 1``, ``T_1 = s``, ``T_{k+1} = 2 s T_k - T_{k-1}``.
    Points must lie strictly inside (-1, 1).
    """
    s = np.asarray(points, dtype=float).reshape(-1)
    if np.any(np.abs(s) >= 1.0) or not np.all(np.isfinite(s)):
        raise PointOutOfRange("all points must satisfy |s| < 1")
    if q < 1:
        raise DimensionMismatch(f"need at least one column, got q={q}")
    design = np.empty((s.size, q))
    design[:, 0] = 1.0
    if q > 1:
        design[:, 1] = s
    for k in range(2, q):
        design[:, k] = 2.0 * s * design[:, k - 1] - design[:, k - 2]
    return design


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_EXPERIMENTS = ("regression1d", "lognormal2d", "clustering")

_KERNEL_KEYS = {
    "regression1d": {"sigma_x": 1.0, "sigma_e1": 0.6, "ell_e": 0.05, "sigma_e2": 1e-3},
    "lognormal2d": {
        "sigma_f1": 0.3,
        "sigma_f2": 0.001,
        "sigma_e1": 0.1,
        "sigma_e2": 0.001,
        "ell_f": 0.2,
        "ell_e": 0.05,
    },
    "clustering": {"sigma_f1": 1.0, "sigma_f2": 1e-4, "ell_f": 0.3, "sigma_e": 0.5},
}

_METHOD_TAGS = tuple(m.value for m in ReductionMethod)


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment run."""

    experiment: str
    q: int
    n: int
    methods: tuple[str, ...]
    r_grid: tuple[int, ...]
    data_seed: int = 0
    method_seed: int = 0
    n_mc: int = 20
    kernel: dict = field(default_factory=dict)
    output: str | None = None
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {_EXPERIMENTS}"
            )
        if not (1 <= self.q <= self.n):
            raise ConfigError(f"need 1 <= q <= n, got q={self.q}, n={self.n}")
        if not self.methods:
            raise ConfigError("the method list is empty")
        for tag in self.methods:
            if tag not in _METHOD_TAGS:
                raise ConfigError(f"unknown method {tag!r}; choose from {_METHOD_TAGS}")
        if not self.r_grid:
            raise ConfigError("the r grid is empty")
        for r in self.r_grid:
            if not (1 <= r <= self.n):
                raise ConfigError(f"r grid entry {r} outside [1, {self.n}]")
        if self.n_mc < 1:
            raise ConfigError("n_mc must be at least 1")
        defaults = _KERNEL_KEYS[self.experiment]
        unknown = set(self.kernel) - set(defaults)
        if unknown:
            raise ConfigError(
                f"unknown kernel keys {sorted(unknown)} for {self.experiment}; "
                f"allowed: {sorted(defaults)}"
            )
        merged = {**defaults, **{k: float(v) for k, v in self.kernel.items()}}
        object.__setattr__(self, "kernel", merged)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "r_grid", tuple(int(r) for r in self.r_grid))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {
            "experiment",
            "q",
            "n",
            "methods",
            "r_grid",
            "seeds",
            "n_mc",
            "kernel",
            "output",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        seeds = raw.get("seeds", {})
        if not isinstance(seeds, dict) or set(seeds) - {"data", "method"}:
            raise ConfigError('seeds must be an object with keys "data" and "method"')
        return cls(
            experiment=raw.get("experiment", ""),
            q=int(raw.get("q", 0)),
            n=int(raw.get("n", 0)),
            methods=tuple(raw.get("methods", ())),
            r_grid=tuple(int(r) for r in raw.get("r_grid", ())),
            data_seed=int(seeds.get("data", 0)),
            method_seed=int(seeds.get("method", 0)),
            n_mc=int(raw.get("n_mc", 20)),
            kernel=dict(raw.get("kernel", {})),
            output=raw.get("output"),
        )

    def with_data_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, data_seed=int(seed))


# ---------------------------------------------------------------------------
# Problem setups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSetup:
    """Everything a run needs: problem, data realizations, geometry."""

    problem: GaussianProblem
    locations: np.ndarray
    realizations: np.ndarray
    model: LinearGaussianModel | None = None
    forward: NonlinearForward | None = None


def setup_regression1d(cfg: ExperimentConfig) -> ExperimentSetup:
    """Chebyshev regression with Matern-3/2 prior and correlated noise.

    Prior mean ramps linearly from -1 to 1 across coefficients; the noise
    process has mean ``cos(4 pi s)``.
    """
    if cfg.experiment != "regression1d":
        raise ConfigError(f"config is for {cfg.experiment!r}, not regression1d")
    k = cfg.kernel
    rng = rng_stream(cfg.data_seed, 0)
    s = np.sort(rng.uniform(-1.0, 1.0, cfg.n))
    design = chebyshev_design(s, cfg.q)
    idx = np.arange(cfg.q, dtype=float)
    prior = GaussianDist(
        mean=-1.0 + 2.0 * idx / (cfg.q - 1) if cfg.q > 1 else np.zeros(1),
        cov=build_kernel_matrix(KernelSpec("matern32_indexed", k["sigma_x"]), idx),
    )
    noise = GaussianDist(
        mean=np.cos(4.0 * np.pi * s),
        cov=build_kernel_matrix(
            KernelSpec("exponential", k["sigma_e1"], k["ell_e"], k["sigma_e2"]), s
        ),
    )
    model = LinearGaussianModel(design, prior, noise)
    draw = rng_stream(cfg.data_seed, 1)
    x_true = sample_gaussian(prior, 1, draw)[0]
    e = sample_gaussian(noise, 1, draw)[0]
    y = design @ x_true + e
    return ExperimentSetup(
        problem=model.problem(),
        locations=s,
        realizations=y.reshape(1, -1),
        model=model,
        forward=linear_forward(design, prior),
    )


def _field_eigenbasis(cfg, sigma1, nugget, length_scale):
    rng = rng_stream(cfg.data_seed, 0)
    locations = rng.uniform(-1.0, 1.0, (cfg.n, 2))
    field_cov = build_kernel_matrix(
        KernelSpec("squared_exponential", sigma1, length_scale, nugget), locations
    )
    pairs = sym_eig(field_cov)
    variances = pairs.values[: cfg.q]
    if variances.min() <= 0.0:
        raise ConfigError("field covariance spectrum is not positive down to rank q")
    return locations, field_cov, pairs.vectors[:, : cfg.q], variances


def setup_lognormal2d(cfg: ExperimentConfig) -> ExperimentSetup:
    """Log-normal field observations with model error from truncation.

    The forward keeps ``q`` field modes, but every data realization is
    drawn from the full (untruncated) field: ``exp(F) + E``.
    """
    if cfg.experiment != "lognormal2d":
        raise ConfigError(f"config is for {cfg.experiment!r}, not lognormal2d")
    k = cfg.kernel
    locations, field_cov, modes, variances = _field_eigenbasis(
        cfg, k["sigma_f1"], k["sigma_f2"], k["ell_f"]
    )
    noise = GaussianDist(
        mean=np.zeros(cfg.n),
        cov=build_kernel_matrix(
            KernelSpec("exponential", k["sigma_e1"], k["ell_e"], k["sigma_e2"]),
            locations,
        ),
    )
    model = LognormalModel(modes, variances)
    forward = model.forward()
    field = GaussianDist(np.zeros(cfg.n), field_cov)
    realizations = np.empty((cfg.n_mc, cfg.n))
    for i in range(cfg.n_mc):
        draw = rng_stream(cfg.data_seed, 1, i)
        f = sample_gaussian(field, 1, draw)[0]
        e = sample_gaussian(noise, 1, draw)[0]
        realizations[i] = np.exp(f) + e
    return ExperimentSetup(
        problem=GaussianProblem(forward.moments, model.prior, noise),
        locations=locations,
        realizations=realizations,
        forward=forward,
    )


def setup_clustering(cfg: ExperimentConfig) -> ExperimentSetup:
    """Linear Gaussian-field problem with white noise for cluster reducers."""
    if cfg.experiment != "clustering":
        raise ConfigError(f"config is for {cfg.experiment!r}, not clustering")
    k = cfg.kernel
    locations, _, modes, variances = _field_eigenbasis(
        cfg, k["sigma_f1"], k["sigma_f2"], k["ell_f"]
    )
    prior = GaussianDist(np.zeros(cfg.q), np.diag(variances))
    noise = GaussianDist(np.zeros(cfg.n), k["sigma_e"] ** 2 * np.eye(cfg.n))
    model = LinearGaussianModel(modes, prior, noise)
    draw = rng_stream(cfg.data_seed, 1)
    x_true = sample_gaussian(prior, 1, draw)[0]
    e = sample_gaussian(noise, 1, draw)[0]
    y = modes @ x_true + e
    return ExperimentSetup(
        problem=model.problem(),
        locations=locations,
        realizations=y.reshape(1, -1),
        model=model,
        forward=linear_forward(modes, prior),
    )


_SETUPS = {
    "regression1d": setup_regression1d,
    "lognormal2d": setup_lognormal2d,
    "clustering": setup_clustering,
}


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    """One CSV row: scores of one (method, r) pair."""

    method: str
    r: int
    j0: float | None
    j1: float | None
    mi_rel_err: float | None
    entropy: float | None
    eps: float | None
    eps_h: float | None
    seed: int
    wall_ms: int | None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row.method,
                    str(row.r),
                    _fmt(row.j0),
                    _fmt(row.j1),
                    _fmt(row.mi_rel_err),
                    _fmt(row.entropy),
                    _fmt(row.eps),
                    _fmt(row.eps_h),
                    str(row.seed),
                    _fmt(row.wall_ms),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _worker_count() -> int:
    cap = os.environ.get("BAYES_REDUCE_THREADS", "")
    if cap.strip():
        return max(1, int(cap))
    return max(1, os.cpu_count() or 1)


def _full_laplace(setup: ExperimentSetup) -> list[LaplaceApprox]:
    problem = setup.problem
    approximations = []
    for y in setup.realizations:
        logpost = make_log_posterior(setup.forward, problem.prior, problem.noise, y)
        approximations.append(map_newton(logpost, problem.prior.mean))
    return approximations


def _reduced_laplace(setup, basis) -> list[LaplaceApprox]:
    problem = setup.problem
    approximations = []
    for y in setup.realizations:
        logpost = make_log_posterior(
            setup.forward, problem.prior, problem.noise, y, basis
        )
        approximations.append(map_newton(logpost, problem.prior.mean))
    return approximations


def run_experiment(cfg: ExperimentConfig, out_path=None) -> list[ResultRow]:
    """Evaluate the (method, r) grid of a configuration.

    Returns the rows sorted by the configured method order and r, and
    writes them as CSV when ``out_path`` (or ``cfg.output``) is set.
    MAP-based errors are computed for experiments with a nonlinear or
    noisy-forward component (everything except ``regression1d``).
    ``wall_ms`` stays empty unless ``cfg.timing`` is set, keeping the
    default output bit-reproducible.
    """
    setup = _SETUPS[cfg.experiment](cfg)
    problem = setup.problem
    y0 = setup.realizations[0]
    with_map_errors = cfg.experiment in ("lognormal2d", "clustering")
    full_laplace = _full_laplace(setup) if with_map_errors else None

    def evaluate(task):
        method_index, tag, r = task
        started = time.perf_counter()
        report: ReductionReport = compute_reduction(
            problem,
            tag,
            r,
            y=y0,
            locations=setup.locations,
            seed=cfg.method_seed + 1000003 * method_index + r,
        )
        eps = eps_h = None
        if with_map_errors:
            reduced = _reduced_laplace(setup, report.basis)
            errors = map_errors(full_laplace, reduced)
            eps, eps_h = errors.eps, errors.eps_h
        wall = int(round(1000.0 * (time.perf_counter() - started)))
        scores = report.scores
        return ResultRow(
            method=tag,
            r=r,
            j0=scores.j0,
            j1=scores.j1,
            mi_rel_err=scores.mi_rel_err,
            entropy=scores.entropy,
            eps=eps,
            eps_h=eps_h,
            seed=cfg.data_seed,
            wall_ms=wall if cfg.timing else None,
        )

    tasks = [
        (mi, tag, r)
        for mi, tag in enumerate(cfg.methods)
        for r in cfg.r_grid
    ]
    workers = min(_worker_count(), len(tasks))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, tasks))
    else:
        rows = [evaluate(task) for task in tasks]

    order = {tag: i for i, tag in enumerate(cfg.methods)}
    rows.sort(key=lambda row: (order[row.method], row.r))

    destination = out_path if out_path is not None else cfg.output
    if destination is not None:
        with open(destination, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(rows_to_csv(rows))
    return rows


# ---------------------------------------------------------------------------
# Model (de)serialization
# ---------------------------------------------------------------------------


def load_model_json(text: str) -> LinearGaussianModel:
    """Parse a linear Gaussian model from its JSON document.

    Expected fields: ``design`` (row-major array of arrays), ``prior_mean``,
    ``prior_cov``, ``noise_mean``, ``noise_cov``. Unknown fields are
    rejected.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file is not valid JSON: {exc}") from exc
    required = {"design", "prior_mean", "prior_cov", "noise_mean", "noise_cov"}
    if not isinstance(raw, dict) or set(raw) != required:
        raise ConfigError(f"model JSON must have exactly the fields {sorted(required)}")
    return LinearGaussianModel(
        design=np.asarray(raw["design"], dtype=float),
        prior=GaussianDist(np.asarray(raw["prior_mean"]), np.asarray(raw["prior_cov"])),
        noise=GaussianDist(np.asarray(raw["noise_mean"]), np.asarray(raw["noise_cov"])),
    )


def dump_model_json(model: LinearGaussianModel) -> str:
    """Serialize a linear Gaussian model to its JSON document."""
    return json.dumps(
        {
            "design": model.design.tolist(),
            "prior_mean": model.prior.mean.tolist(),
            "prior_cov": model.prior.cov.tolist(),
            "noise_mean": model.noise.mean.tolist(),
            "noise_cov": model.noise.cov.tolist(),
        },
        indent=2,
    )
