"""Conditional expected shortfall estimation for GARCH-type models.

Two-step estimator (volatility QMLE, then the empirical tail mean of the
residuals), delta-method asymptotic intervals, and a fixed-design residual
bootstrap with equal-tailed percentile (EP), reversed-tail (RT) and
symmetric (SY) interval constructions, plus a Monte Carlo study harness.
"""

from .distributions import (
    NORMAL,
    STUDENT_T,
    InnovationDist,
    QuadratureError,
    TailQuantities,
    normal,
    student_t,
    tail_quantities_closed,
    tail_quantities_numeric,
)
from .volatility import (
    GARCH11,
    FilterOutput,
    Garch11,
    GarchParams,
    VolatilityModel,
)
from .qmle import FitResult, QmleOptions, criterion, default_options, fit
from .es_estimation import (
    EsEstimate,
    EstimationError,
    GammaHat,
    SingularMatrixError,
    TailEstimate,
    asymptotic_interval,
    conditional_es,
    gamma_hat,
    mu_hat,
    tail_rank,
)
from .bootstrap import (
    BootstrapContext,
    BootstrapError,
    BootstrapReplicate,
    IntervalSet,
    bootstrap_replicate,
    ceil_rank,
    intervals,
    run,
)
from .experiments import (
    DensityComparison,
    IntervalStats,
    KdeCurve,
    Scenario,
    StudyError,
    StudySummary,
    TrajectoryRecord,
    classify,
    density_comparison,
    kde,
    run_study,
    run_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "NORMAL",
    "STUDENT_T",
    "InnovationDist",
    "QuadratureError",
    "TailQuantities",
    "normal",
    "student_t",
    "tail_quantities_closed",
    "tail_quantities_numeric",
    "GARCH11",
    "FilterOutput",
    "Garch11",
    "GarchParams",
    "VolatilityModel",
    "FitResult",
    "QmleOptions",
    "criterion",
    "default_options",
    "fit",
    "EsEstimate",
    "EstimationError",
    "GammaHat",
    "SingularMatrixError",
    "TailEstimate",
    "asymptotic_interval",
    "conditional_es",
    "gamma_hat",
    "mu_hat",
    "tail_rank",
    "BootstrapContext",
    "BootstrapError",
    "BootstrapReplicate",
    "IntervalSet",
    "bootstrap_replicate",
    "ceil_rank",
    "intervals",
    "run",
    "DensityComparison",
    "IntervalStats",
    "KdeCurve",
    "Scenario",
    "StudyError",
    "StudySummary",
    "TrajectoryRecord",
    "classify",
    "density_comparison",
    "kde",
    "run_study",
    "run_trajectory",
    "__version__",
]
