"""Time-varying, time-lagged cross-correlation networks for non-stationary panels.

The package infers directed correlation networks from multivariate time
series with piecewise-smooth trends: difference-based correlation curves
(with an optional uniform variance reduction), a shared-multiplier block
wild bootstrap for simultaneous confidence bands with family-wise error
control, the dual time-varying network decisions, and a Monte Carlo harness
for validating the whole procedure on a known process.
"""

from .bootstrap import (
    BlockSums,
    BlockVectors,
    QuantileResult,
    block_sums,
    bootstrap_quantile,
    build_block_vectors,
    multiplier_normals,
)
from .diffest import (
    BandSet,
    CurveSet,
    LagTriple,
    Panel,
    all_pairs_triples,
    auto_lags,
    beta_hat,
    delta_profile,
    difference,
    rho_plain,
    rho_reduced,
    within_series_triples,
)
from .errors import (
    AllSingular,
    BandwidthTooLarge,
    BlockTooLong,
    ConfigError,
    DataError,
    DegenerateVariance,
    DomainError,
    GridTooSmall,
    LagTooLarge,
    SingularDesign,
    TvnetError,
    WindowTooLarge,
)
from .kernels import (
    KernelSpec,
    ReducedKernel,
    ReductionParams,
    build_reduced_kernel,
    default_kernel,
)
from .lrv import LrvCurve, XiSeries, lrv_curve, xi_series
from .network import (
    NullSpec,
    SCBBand,
    NetworkSnapshot,
    build_scb,
    confidence_heatmap,
    connect,
)
from .pipeline import AnalysisResult, PipelineConfig, analyze
from .plugin import TrendFit, plugin_bootstrap, rho_plugin, trend_fit
from .simgen import (
    DgpSpec,
    McReport,
    monte_carlo,
    simulate,
    stationary_covariance,
    true_cross_correlations,
)
from .smoother import HatMatrixDiagnostics, LocalLinearFit, hat_diagnostics, local_linear_fit
from .tuning import GcvResult, MvSelection, gcv_select, mv_select, select_block_length

__version__ = "0.1.0"

__all__ = [
    "AllSingular",
    "AnalysisResult",
    "BandSet",
    "BandwidthTooLarge",
    "BlockSums",
    "BlockTooLong",
    "BlockVectors",
    "ConfigError",
    "CurveSet",
    "DataError",
    "DegenerateVariance",
    "DgpSpec",
    "DomainError",
    "GcvResult",
    "GridTooSmall",
    "HatMatrixDiagnostics",
    "KernelSpec",
    "LagTooLarge",
    "LagTriple",
    "LocalLinearFit",
    "LrvCurve",
    "McReport",
    "MvSelection",
    "NetworkSnapshot",
    "NullSpec",
    "Panel",
    "PipelineConfig",
    "QuantileResult",
    "ReducedKernel",
    "ReductionParams",
    "SCBBand",
    "SingularDesign",
    "TrendFit",
    "TvnetError",
    "WindowTooLarge",
    "XiSeries",
    "all_pairs_triples",
    "analyze",
    "auto_lags",
    "beta_hat",
    "block_sums",
    "bootstrap_quantile",
    "build_block_vectors",
    "build_reduced_kernel",
    "build_scb",
    "confidence_heatmap",
    "connect",
    "default_kernel",
    "delta_profile",
    "difference",
    "gcv_select",
    "hat_diagnostics",
    "local_linear_fit",
    "lrv_curve",
    "monte_carlo",
    "multiplier_normals",
    "mv_select",
    "plugin_bootstrap",
    "rho_plain",
    "rho_plugin",
    "rho_reduced",
    "select_block_length",
    "simulate",
    "stationary_covariance",
    "trend_fit",
    "true_cross_correlations",
    "within_series_triples",
    "xi_series",
]
