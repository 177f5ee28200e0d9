"""GEE marginal models with optimal subsampling for large longitudinal panels.

Typical use::

    from gee_subsample import SimConfig, simulate, fit, subsample_fit

    panel = simulate(SimConfig("binary", m=10000, seed=1))
    full = fit(panel, "binomial", "ar1")
    sub = subsample_fit(panel, "mVc", r0=200, r=1200, family="binomial",
                        structure="ar1", seed=7)
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, available_backends
from .correlation import (
    CorrelationModel,
    CorrStructure,
    correlation_inverse,
    correlation_matrix,
    estimate_correlation,
    estimate_dispersion,
    get_structure,
    pearson_residuals,
)
from .errors import (
    BalanceError,
    ConfigError,
    DataError,
    DegenerateScoresError,
    DegenerateVarianceError,
    DivergenceError,
    DomainError,
    EmptyPanelError,
    GeeError,
    InsufficientDataError,
    NumericalError,
    NumericRangeError,
    ParseError,
    PilotError,
    SchemaError,
    SingularityError,
)
from .family import BINOMIAL, GAUSSIAN, POISSON, FamilyKind, FamilySpec, get_family
from .gee import Diagnostics, FitConfig, FitResult, fit, information, sandwich, score
from .harness import (
    BenchmarkConfig,
    BenchmarkReport,
    emit_plot_data,
    run_benchmark,
    run_holdout,
)
from .panel import CsvSchema, Panel, Subject, read_panel, write_panel
from .simulate import (
    SimCase,
    SimConfig,
    gen_case1,
    gen_case2,
    gen_case3,
    gen_covariates,
    simulate,
)
from .subsampling import (
    SamplingMethod,
    SamplingPlan,
    SmallSubsampleWarning,
    draw_with_replacement,
    pilot_fit,
    probabilities_mV,
    probabilities_mVc,
    score_vectors,
    subsample_fit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
