"""Summary statistics, autocorrelation and Ljung-Box diagnostics, multi-step
range forecasting with delta-method confidence limits, and prediction-error
metrics.

Forecasts substitute the conditional mean for unobserved future ranges, so
for a CARR(1,1) the h-step path is psi_{T+h} = omega + (alpha1 + beta1) *
psi_{T+h-1} for h >= 2. The forecast variance combines the error variance
with the parameter uncertainty of the psi forecast:

    Var(r_hat) = psi_hat^2 sigma_eps^2 + var_psi + var_psi sigma_eps^2,

where var_psi is the delta-method variance grad' I^{-1} grad with the
gradient of the h-step forecast propagated through the forecast recursion.
95% limits are psi_hat +/- 1.96 sqrt(Var), with the lower limit clipped at
zero because ranges are positive.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .carr import CarrParams, RangeSeries, psi_path
from .distributions import sample_moments


@dataclass(frozen=True)
class LjungBoxTest:
    lag: int
    statistic: float
    pvalue: float


@dataclass
class DiagnosticsReport:
    """Moments, ACF and portmanteau tests of a range series."""

    n: int
    mean: float
    median: float
    variance: float
    skewness: float
    excess_kurtosis: float
    minimum: float
    maximum: float
    acf: np.ndarray
    ljung_box: tuple[LjungBoxTest, ...]


@dataclass
class ForecastResult:
    """Point forecasts with (optionally) variances and 95% limits.

    `point_grad` holds the gradient of each h-step forecast in theta; it is
    what the delta-method variance consumes.
    """

    horizon: int
    point: np.ndarray
    point_grad: np.ndarray
    psi_variance: np.ndarray | None = None
    variance: np.ndarray | None = None
    lo95: np.ndarray | None = None
    hi95: np.ndarray | None = None


def acf(x, lags: int) -> np.ndarray:
    """Autocorrelations 0..lags with the biased (1/T) covariance
    normalization, the convention the Ljung-Box statistic assumes."""
    x = np.asarray(x, dtype=float)
    if lags < 1 or lags >= x.size:
        raise ValueError("lags must be in [1, T)")
    c = x - x.mean()
    denom = float(c @ c)
    if denom <= 0:
        raise ValueError("ACF is undefined for a constant series")
    out = np.empty(lags + 1)
    out[0] = 1.0
    for j in range(1, lags + 1):
        out[j] = float(c[j:] @ c[:-j]) / denom
    return out


def ljung_box(x, lags=(6, 12)) -> tuple[LjungBoxTest, ...]:
    """Q_k = T (T + 2) sum_{j<=k} rho_j^2 / (T - j), chi-square(k) p-values."""
    x = np.asarray(x, dtype=float)
    T = x.size
    rho = acf(x, max(lags))
    tests = []
    for k in lags:
        q = T * (T + 2.0) * float(np.sum(rho[1 : k + 1] ** 2 / (T - np.arange(1, k + 1))))
        tests.append(LjungBoxTest(lag=int(k), statistic=q, pvalue=float(stats.chi2.sf(q, k))))
    return tuple(tests)


def summarize(series: RangeSeries, acf_lags: int = 30, lb_lags=(6, 12)) -> DiagnosticsReport:
    """Summary statistics, ACF to `acf_lags` and Ljung-Box tests."""
    x = series.values
    max_lag = max(acf_lags, *lb_lags)
    if x.size < 2 * max_lag:
        raise ValueError(f"need at least {2 * max_lag} observations for lags up to {max_lag}")
    mom = sample_moments(x)
    return DiagnosticsReport(
        n=int(x.size),
        mean=mom.mu_eps,
        median=float(np.median(x)),
        variance=mom.sigma_eps**2,
        skewness=mom.gamma_eps,
        excess_kurtosis=mom.kappa_eps,
        minimum=float(x.min()),
        maximum=float(x.max()),
        acf=acf(x, acf_lags),
        ljung_box=ljung_box(x, lb_lags),
    )


def forecast(fit, series: RangeSeries, horizon: int) -> ForecastResult:
    """Multi-step point forecasts r_hat_{T+h} = psi_hat_{T+h}.

    The in-sample psi path is rebuilt from the fit's parameters and
    pre-sample value on the supplied series, so forecasting can start from
    any series that ends at the chosen origin. Future ranges beyond the
    sample are replaced by their conditional means, and the gradient
    recursion is continued through that substitution.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    params: CarrParams = fit.params
    u, v = params.order
    d = 1 + u + v
    path = psi_path(params, series, fit.presample)
    psi_in, grad_in = path.psi, path.grad
    r_in = series.values
    T = r_in.size
    alpha = params.alpha_array()
    beta = params.beta_array()
    zeros = np.zeros(d)

    fc = np.empty(horizon)
    gfc = np.zeros((horizon, d))

    def range_slot(s):
        if s >= T:
            return fc[s - T], gfc[s - T]
        if s >= 0:
            return r_in[s], zeros
        return fit.presample, zeros

    def psi_slot(s):
        if s >= T:
            return fc[s - T], gfc[s - T]
        if s >= 0:
            return psi_in[s], grad_in[s]
        return fit.presample, zeros

    for h in range(horizon):
        t = T + h
        val = params.omega
        g = np.zeros(d)
        g[0] = 1.0
        for i in range(u):
            x, gx = range_slot(t - 1 - i)
            val += alpha[i] * x
            g[1 + i] += x
            g += alpha[i] * gx
        for j in range(v):
            x, gx = psi_slot(t - 1 - j)
            val += beta[j] * x
            g[1 + u + j] += x
            g += beta[j] * gx
        fc[h] = val
        gfc[h] = g
    return ForecastResult(horizon=horizon, point=fc, point_grad=gfc)


def range_forecast_variance(point, sigma_eps: float, psi_variance):
    """Var(r_hat) = point^2 sigma^2 + var_psi + var_psi sigma^2."""
    point = np.asarray(point, dtype=float)
    psi_variance = np.asarray(psi_variance, dtype=float)
    s2 = float(sigma_eps) ** 2
    return point * point * s2 + psi_variance + psi_variance * s2


def forecast_variance(fit, fc: ForecastResult) -> ForecastResult:
    """Fill per-step variances and 95% limits using the fit's information
    matrix (delta method on the forecast gradient)."""
    if fit.info_matrix is None or fit.error_moments is None:
        raise ValueError("fit carries no information matrix / error moments")
    info = np.asarray(fit.info_matrix, dtype=float)
    try:
        inv = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"information matrix is singular: {exc}") from exc
    psi_var = np.einsum("hi,ij,hj->h", fc.point_grad, inv, fc.point_grad)
    if np.any(psi_var < 0):
        psi_var = np.maximum(psi_var, 0.0)
    var = range_forecast_variance(fc.point, fit.error_moments.sigma_eps, psi_var)
    half = 1.96 * np.sqrt(var)
    lo = np.maximum(fc.point - half, 0.0)
    hi = fc.point + half
    return dataclasses.replace(fc, psi_variance=psi_var, variance=var, lo95=lo, hi95=hi)


def prediction_metrics(actual, predicted) -> tuple[float, float]:
    """Root-mean-square and mean-absolute error between the vectors.

    Serves in-sample (range vs fitted psi) and out-of-sample (holdout range
    vs forecast) roles alike.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.ndim != 1 or a.shape != p.shape or a.size == 0:
        raise ValueError(f"need equal-length non-empty vectors, got {a.shape} and {p.shape}")
    e = a - p
    return float(np.sqrt(np.mean(e * e))), float(np.mean(np.abs(e)))


def interval_coverage(fc: ForecastResult, actual) -> float:
    """Fraction of realized values inside the 95% limits."""
    if fc.lo95 is None or fc.hi95 is None:
        raise ValueError("forecast limits are not filled; run forecast_variance first")
    a = np.asarray(actual, dtype=float)
    if a.shape != (fc.horizon,):
        raise ValueError(f"actuals must have length {fc.horizon}, got {a.shape}")
    return float(np.mean((a >= fc.lo95) & (a <= fc.hi95)))
