"""rangevol: CARR range-volatility models with ML, LEF and CEF estimation,
Monte Carlo efficiency studies, diagnostics and multi-step forecasting."""

from .carr import (
    CarrParams,
    PsiPath,
    RangeSeries,
    compute_range,
    psi_path,
    range_from_high_low,
    simulate,
    simulate_path,
    unconditional_moments,
)
from .diagnostics import (
    DiagnosticsReport,
    ForecastResult,
    LjungBoxTest,
    acf,
    forecast,
    forecast_variance,
    interval_coverage,
    ljung_box,
    prediction_metrics,
    range_forecast_variance,
    summarize,
)
from .distributions import (
    ConstantErrors,
    ErrorMoments,
    Gb2Params,
    StandardizedGb2Errors,
    StandardizedLognormalErrors,
    gb2_logpdf,
    gb2_mean,
    gb2_moment,
    gb2_pdf,
    gb2_sample,
    lognormal_standardized_sample,
    sample_moments,
    standardize_gb2,
)
from .estimators import (
    BoundaryWarning,
    EstimationError,
    FitConfig,
    FitResult,
    carr_gb2_loglik,
    fit,
    fit_cef,
    fit_lef,
    fit_ml,
    info_matrix_cef,
    info_matrix_lef,
    residuals,
)
from .mc import StudyDesign, StudyError, StudyResult, StudyRow, export_histograms, run_study

__version__ = "0.1.0"

__all__ = [
    "BoundaryWarning",
    "CarrParams",
    "ConstantErrors",
    "DiagnosticsReport",
    "ErrorMoments",
    "EstimationError",
    "FitConfig",
    "FitResult",
    "ForecastResult",
    "Gb2Params",
    "LjungBoxTest",
    "PsiPath",
    "RangeSeries",
    "StandardizedGb2Errors",
    "StandardizedLognormalErrors",
    "StudyDesign",
    "StudyError",
    "StudyResult",
    "StudyRow",
    "acf",
    "carr_gb2_loglik",
    "compute_range",
    "export_histograms",
    "fit",
    "fit_cef",
    "fit_lef",
    "fit_ml",
    "forecast",
    "forecast_variance",
    "gb2_logpdf",
    "gb2_mean",
    "gb2_moment",
    "gb2_pdf",
    "gb2_sample",
    "info_matrix_cef",
    "info_matrix_lef",
    "interval_coverage",
    "ljung_box",
    "lognormal_standardized_sample",
    "prediction_metrics",
    "psi_path",
    "range_forecast_variance",
    "range_from_high_low",
    "residuals",
    "run_study",
    "sample_moments",
    "simulate",
    "simulate_path",
    "standardize_gb2",
    "summarize",
    "unconditional_moments",
]
