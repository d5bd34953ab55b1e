"""Multivariate spatial skew-t processes: exact MCMC fitting, trend
summaries, information criteria, and extremal dependence measures."""

from .errors import (
    BasisError,
    ConfigError,
    DataError,
    FactorizationError,
    ParameterError,
    ShapeError,
)
from .covariance import (
    MaternParams,
    SeparableGaussian,
    build_spatial_corr,
    matern_correlation,
    probe_factorizations,
)
from .model import (
    ChainState,
    ObservationTensor,
    SkewTParams,
    SplineBasis,
    full_data_loglik,
    mean_surface,
    model_moments,
    pointwise_loglik,
    skewt_logpdf_multi,
    skewt_logpdf_uni,
    spline_basis,
)
from .simulate import draw_state_from_prior, simulate_beta, simulate_dataset
from .sampler import (
    MODEL_VARIANTS,
    ChainConfig,
    PosteriorSamples,
    PriorConfig,
    StepSizes,
    UnivariateSamples,
    run_chain,
)
from .extremal import (
    ChiCurve,
    chi_cross_table,
    chi_cross_theoretical,
    chi_from_madogram,
    chi_gaussian_limit,
    chi_spatial_theoretical,
    empirical_chi_cross,
    empirical_chi_spatial,
    f_madogram,
)
from .diagnostics import (
    ChainDiagnostics,
    TrendSummary,
    chain_diagnostics,
    delta_decadal,
    dic,
    ess,
    trend_summary,
    waic,
)
from .dataio import (
    RunConfig,
    load_config,
    load_dataset,
    load_samples,
    resolve_config,
    save_samples,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BasisError",
    "ChainConfig",
    "ChainDiagnostics",
    "ChainState",
    "ChiCurve",
    "ConfigError",
    "DataError",
    "FactorizationError",
    "MaternParams",
    "MODEL_VARIANTS",
    "ObservationTensor",
    "ParameterError",
    "PosteriorSamples",
    "PriorConfig",
    "RunConfig",
    "SeparableGaussian",
    "ShapeError",
    "SkewTParams",
    "SplineBasis",
    "StepSizes",
    "TrendSummary",
    "UnivariateSamples",
    "build_spatial_corr",
    "chain_diagnostics",
    "chi_cross_table",
    "chi_cross_theoretical",
    "chi_from_madogram",
    "chi_gaussian_limit",
    "chi_spatial_theoretical",
    "delta_decadal",
    "dic",
    "draw_state_from_prior",
    "empirical_chi_cross",
    "empirical_chi_spatial",
    "ess",
    "f_madogram",
    "full_data_loglik",
    "load_config",
    "load_dataset",
    "load_samples",
    "matern_correlation",
    "mean_surface",
    "model_moments",
    "pointwise_loglik",
    "probe_factorizations",
    "resolve_config",
    "run_chain",
    "save_samples",
    "simulate_beta",
    "simulate_dataset",
    "skewt_logpdf_multi",
    "skewt_logpdf_uni",
    "spline_basis",
    "trend_summary",
    "waic",
    "write_dataset",
]
