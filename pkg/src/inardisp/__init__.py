"""INAR(1) count time series with Poisson, double Poisson and generalized
Poisson innovations: simulation, estimation, dispersion tests and
Monte Carlo studies."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DegenerateParameterError,
    DegenerateSeriesError,
    DomainError,
    EstimationError,
    InarError,
    SeriesFormatError,
    SingularMatrixError,
)
from .innovations import (
    APPROX_NORMALIZER,
    DoublePoissonParams,
    GenPoissonParams,
    NormalizationMode,
    PoissonParams,
    dp_pmf,
    exact_sum,
    gp_pmf,
    pmf,
    sample_innovations,
)
from .process import (
    CountSeries,
    Inar1Model,
    conditional_moments,
    dispersion_table,
    model_from_params,
    simulate,
    stationary_moments,
    transition_prob,
)
from .estimation import (
    FitResult,
    asymptotic_cov_dp,
    asymptotic_cov_gp,
    cls_fit,
    cml_fit,
    conditional_loglik,
    fit,
    yw_fit,
)
from .inference import TestReport, equidispersion_test, lr_test, sample_stats
from .experiments import McConfig, McResult, run_cov_check, run_mc_study
from .reporting import read_series, write_report, write_series
