"""Optimal low-dimensional projections of observations for Gaussian
Bayesian inference: information-theoretic reducers (mutual information,
posterior KL divergence, expected KL divergence), PCA and clustering
baselines, a Riemannian trust-region optimizer over subspaces, and the
nonlinear MAP/Laplace machinery to assess reductions of non-Gaussian
models."""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyInput,
    EmptySpectrum,
    MaxIterationsExceeded,
    MomentOverflow,
    NonFiniteGradient,
    NonFiniteInput,
    NotPositiveDefinite,
    NotSymmetric,
    PointOutOfRange,
    RankCollapse,
    RankDeficientBasis,
    ReductionError,
)
from .grassmann import (
    CostFunction,
    GrassmannPoint,
    SolverTrace,
    TrustRegionConfig,
    principal_angles,
    project_tangent,
    retract_qr,
    riemannian_gradient,
    trust_region_solve,
    truncated_cg,
)
from .information import (
    InfoScores,
    ekld_cost,
    full_mutual_information,
    gaussian_entropy,
    info_scores,
    kl_gaussian,
    kld_cost,
    logdet_divergence,
    mahalanobis_divergence,
    mi_relative_error,
    mutual_information,
    posterior_entropy,
    signal_eigenpairs,
)
from .linalg import (
    EigenPairs,
    cholesky,
    gen_eig_spd,
    logdet_spd,
    solve_spd,
    sym_eig,
    symmetrize,
)
from .model import (
    AffinePosteriorMap,
    GaussianDist,
    GaussianProblem,
    LinearGaussianModel,
    ModelMoments,
    SubspaceBasis,
    as_basis,
    moments_linear,
    observation_moments,
    posterior_full,
    posterior_reduced,
)
from .nonlinear import (
    LaplaceApprox,
    LognormalModel,
    MapErrorReport,
    NonlinearForward,
    check_unimodal,
    linear_forward,
    log_posterior,
    lognormal_moments,
    make_log_posterior,
    map_errors,
    map_newton,
)
from .reducers import (
    ClusterAssignment,
    ReductionMethod,
    ReductionReport,
    compute_reduction,
    kmeans,
    reduce_centroids,
    reduce_cluster_averages,
    reduce_ekld,
    reduce_kld,
    reduce_mi,
    reduce_pca,
)
from .experiments import (
    ExperimentConfig,
    ExperimentSetup,
    KernelSpec,
    ResultRow,
    build_kernel_matrix,
    chebyshev_design,
    run_experiment,
    setup_clustering,
    setup_lognormal2d,
    setup_regression1d,
)
from .sampling import rng_stream, sample_gaussian

__version__ = "0.1.0"
