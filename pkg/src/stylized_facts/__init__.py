"""Stylized-fact estimators for price and volume time series."""

__version__ = "0.1.0"

from .correlation import (
    CorrelationCurve,
    autocorrelation,
    coarse_fine_correlation,
    cross_correlation,
    volatility_clustering_slopes,
    volume_volatility_correlation,
)
from .density import (
    CcdfCurve,
    DensityEstimate,
    DistributionFit,
    PowerLawFit,
    ccdf,
    fit_gaussian,
    fit_student_t,
    fit_tail_exponent,
    kde_epanechnikov,
)
from .errors import StylizedFactsError
from .moments import (
    MomentTrace,
    ScaleStatistics,
    excess_kurtosis_bootstrap,
    kurtosis_by_scale,
    running_second_moment,
    taylor_law_fit,
)
from .numerics import fft_real, ifft_real, levenberg_marquardt, linear_fit, make_rng
from .persistence import PersistenceCurve, fit_persistence_exponent, persistence_curve
from .quakes import (
    EventCatalog,
    GutenbergRichterFit,
    OmoriFit,
    detect_onsets,
    event_counter,
    fit_gutenberg_richter,
    fit_omori,
)
from .series import PriceSeries, ReturnSeries, load_csv, log_returns, normalize
from .synth import GeneratorSpec, generate

__all__ = [
    "CcdfCurve",
    "CorrelationCurve",
    "DensityEstimate",
    "DistributionFit",
    "EventCatalog",
    "GeneratorSpec",
    "GutenbergRichterFit",
    "MomentTrace",
    "OmoriFit",
    "PersistenceCurve",
    "PowerLawFit",
    "PriceSeries",
    "ReturnSeries",
    "ScaleStatistics",
    "StylizedFactsError",
    "autocorrelation",
    "ccdf",
    "coarse_fine_correlation",
    "cross_correlation",
    "detect_onsets",
    "event_counter",
    "excess_kurtosis_bootstrap",
    "fft_real",
    "fit_gaussian",
    "fit_gutenberg_richter",
    "fit_omori",
    "fit_persistence_exponent",
    "fit_student_t",
    "fit_tail_exponent",
    "generate",
    "ifft_real",
    "kde_epanechnikov",
    "kurtosis_by_scale",
    "levenberg_marquardt",
    "linear_fit",
    "load_csv",
    "log_returns",
    "make_rng",
    "normalize",
    "persistence_curve",
    "running_second_moment",
    "taylor_law_fit",
    "volatility_clustering_slopes",
    "volume_volatility_correlation",
]
