"""Fitting CARR models by maximum likelihood under GB2 errors, by optimal
linear estimating functions (LEF), and by combined estimating functions
(CEF).

theta denotes the conditional-mean parameters (omega, alpha..., beta...).
With unit-mean errors the linear martingale difference is h1_t = r_t - psi_t
and the optimal linear equation is

    g1(theta) = - sum_t (1 / (psi_t^2 sigma^2)) dpsi_t (r_t - psi_t) = 0,

whose root is free of sigma (it is a global positive factor), so the error
variance is profiled from the residuals r_t / psi_t. CEF adds the
orthogonalized quadratic difference

    h2_t = h1_t^2 - psi_t^2 sigma^2 - gamma sigma psi_t h1_t,

weighted by its conditional variance, which brings the error skewness and
excess kurtosis into the estimate; those moments come from standardized
residuals of an initial LEF fit and are refreshed each outer iteration until
the parameter vector settles.

Solvers work on the per-observation (averaged) form of the equations -- the
root is unchanged and tolerances stay sample-size free -- in a transformed
space that enforces omega > 0, non-negative coefficients and persistence
below one. A quasi-Newton descent on the squared equation norm finds the
basin and a hybrid-Powell polish drives the residual to machine precision;
the infinity norm at the solution is verified against the configured
tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import minimize, root

from .carr import CarrParams, PsiPath, RangeSeries
from .diagnostics import prediction_metrics
from .distributions import ErrorMoments, sample_moments
from .recursions import carr_psi, carr_psi_grad

_METHODS = ("ml", "lef", "cef")
_CEF_DENOM_FLOOR = 1e-6
_Z_LIMIT = 45.0


class EstimationError(RuntimeError):
    """A fit could not be completed; carries the best iterate when known."""

    def __init__(self, message: str, best_params: CarrParams | None = None):
        super().__init__(message)
        self.best_params = best_params


class BoundaryWarning(UserWarning):
    """An estimate landed against a parameter-space boundary."""


@dataclass(frozen=True)
class FitConfig:
    """Order, method and solver controls for a CARR fit.

    `presample` overrides the pre-sample initialization value; when None the
    sample mean of the ranges is used. `max_persistence` bounds the sum of
    the alpha and beta coefficients away from one. `gb2_start` seeds the
    (a, p, q) shapes for the likelihood optimizer.
    """

    u: int = 1
    v: int = 1
    method: str = "cef"
    max_iterations: int = 200
    tolerance: float = 1e-8
    presample: float | None = None
    max_persistence: float = 1.0 - 1e-6
    gb2_start: tuple[float, float, float] = (1.0, 1.0, 2.0)

    def __post_init__(self) -> None:
        if self.u < 1 or self.v < 0:
            raise ValueError("order must have u >= 1 and v >= 0")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")
        if self.presample is not None and not (self.presample > 0):
            raise ValueError("presample must be positive when given")
        if not (0 < self.max_persistence < 1):
            raise ValueError("max_persistence must lie in (0, 1)")
        a0, p0, q0 = self.gb2_start
        if a0 <= 0 or p0 <= 0 or a0 * q0 <= 1:
            raise ValueError("gb2_start must satisfy a > 0, p > 0 and a*q > 1")


@dataclass
class FitResult:
    """Estimates, uncertainty and in-sample fit of one CARR estimation.

    `error_moments` holds the moments as used by the method (mean pinned to
    one, the rest from standardized residuals); `info_matrix` is over theta
    and satisfies std_errors = sqrt(diag(inverse)). `eq_norm` is the
    infinity norm of the averaged estimating equation at the solution (LEF
    and CEF only).
    """

    method: str
    params: CarrParams
    psi_hat: PsiPath
    residuals: np.ndarray
    error_moments: ErrorMoments | None
    std_errors: np.ndarray | None
    info_matrix: np.ndarray | None
    rmspe: float
    mape: float
    presample: float
    converged: bool
    iterations: int
    message: str
    gb2_shape: tuple[float, float, float] | None = None
    gb2_shape_std_errors: tuple[float, float, float] | None = None
    loglik: float | None = None
    eq_norm: float | None = None

    @property
    def sigma_eps(self) -> float | None:
        return None if self.error_moments is None else self.error_moments.sigma_eps


# ---------------------------------------------------------------------------
# parameter transform: z in R^d  <->  omega > 0, coefs >= 0, sum(coefs) < cap


def _z_to_theta(z: np.ndarray, cap: float) -> tuple[float, np.ndarray]:
    z = np.clip(z, -_Z_LIMIT, _Z_LIMIT)
    omega = math.exp(z[0])
    e = np.exp(z[1:])
    m = e / (1.0 + e.sum())
    return omega, cap * m


def _theta_to_z(omega: float, coefs: np.ndarray, cap: float) -> np.ndarray:
    m = np.maximum(np.asarray(coefs, dtype=float), 1e-12) / cap
    s = m.sum()
    if s >= 1.0:
        raise ValueError("coefficient sum exceeds the persistence cap")
    e = m / (1.0 - s)
    return np.concatenate(([math.log(omega)], np.log(e)))


def _default_start(r: np.ndarray, u: int, v: int) -> tuple[float, np.ndarray]:
    omega0 = 0.1 * float(r.mean())
    coefs0 = np.concatenate([np.full(u, 0.1 / u), np.full(v, 0.7 / max(v, 1))[:v]])
    return omega0, coefs0


def _prepare(series: RangeSeries, config: FitConfig) -> tuple[np.ndarray, float]:
    r = series.values
    need = max(config.u, config.v) + 1
    if len(r) < need:
        raise ValueError(
            f"series of length {len(r)} is too short for order ({config.u}, {config.v}); "
            f"need at least {need} observations"
        )
    presample = float(r.mean()) if config.presample is None else float(config.presample)
    return r, presample


def _require_method(config: FitConfig, method: str) -> None:
    if config.method != method:
        raise ValueError(f"config.method is {config.method!r}; this fitter handles {method!r}")


# ---------------------------------------------------------------------------
# estimating functions (averaged over t)


def _lef_g(omega: float, alpha: np.ndarray, beta: np.ndarray, r, presample: float) -> np.ndarray:
    psi, grad = carr_psi_grad(omega, alpha, beta, r, presample)
    with np.errstate(all="ignore"):
        w = (r - psi) / (psi * psi)
        return -(grad * w[:, None]).mean(axis=0)


def _cef_weights(psi: np.ndarray, moments: ErrorMoments) -> tuple[np.ndarray, np.ndarray]:
    """Scalar weights multiplying dpsi_t in the two combined-equation terms."""
    mu = moments.mu_eps
    s = moments.sigma_eps
    s2 = s * s
    a1 = -mu / (psi * psi * s2)
    a2 = (moments.gamma_eps * s * mu - 2.0 * s2) / (
        psi**3 * s2 * s2 * moments.cef_denominator
    )
    return a1, a2


def _cef_g(
    omega: float,
    alpha: np.ndarray,
    beta: np.ndarray,
    r,
    presample: float,
    moments: ErrorMoments,
) -> np.ndarray:
    psi, grad = carr_psi_grad(omega, alpha, beta, r, presample)
    with np.errstate(all="ignore"):
        mu = moments.mu_eps
        s = moments.sigma_eps
        h1 = r - psi * mu
        h2 = h1 * h1 - psi * psi * (s * s) - moments.gamma_eps * (psi * s) * h1
        a1, a2 = _cef_weights(psi, moments)
        w = a1 * h1 + a2 * h2
        return (grad * w[:, None]).mean(axis=0)


def _solve_equation(gfun, z0: np.ndarray, cap: float, warm: bool) -> tuple[np.ndarray, float]:
    """Root of the averaged estimating equation in transformed space.

    Pipeline: quasi-Newton descent on the squared norm pulls a cold start
    into the root's basin, a hybrid-Powell polish drives the residual to
    machine precision, and a Levenberg-Marquardt pass backs the polish up
    when the equation surface has a flat valley (near-degenerate data).
    `warm` skips the descent stage. Returns the best iterate and its
    infinity norm; the caller enforces the tolerance.
    """

    def g_of_z(z):
        omega, coefs = _z_to_theta(z, cap)
        g = gfun(omega, coefs)
        return np.where(np.isfinite(g), g, 1e150)

    def squared_norm(z):
        g = g_of_z(z)
        return 0.5 * float(g @ g)

    best_z = np.asarray(z0, dtype=float)
    best_norm = float(np.max(np.abs(g_of_z(best_z))))

    def consider(z):
        nonlocal best_z, best_norm
        gnorm = float(np.max(np.abs(g_of_z(z))))
        if gnorm < best_norm:
            best_z, best_norm = np.asarray(z, dtype=float), gnorm

    stages = []
    if not warm:
        stages.append(
            lambda z: minimize(
                squared_norm,
                z,
                method="L-BFGS-B",
                options={"maxiter": 500, "ftol": 1e-18, "gtol": 1e-12},
            ).x
        )
    stages.append(
        lambda z: root(g_of_z, z, method="hybr", options={"xtol": 1e-13, "maxfev": 4000}).x
    )
    stages.append(
        lambda z: root(
            g_of_z, z, method="lm", options={"xtol": 1e-15, "ftol": 1e-15, "maxiter": 5000}
        ).x
    )
    for stage in stages:
        consider(stage(best_z))
        if best_norm < 1e-12:
            break
    return best_z, best_norm


_DEGENERATE_REL_VAR = 1e-16


def _finalize_moments(residuals: np.ndarray) -> tuple[ErrorMoments | None, ErrorMoments | None]:
    """(sample moments, equation moments with the mean pinned to one).

    Returns (None, None) for degenerate residuals: zero variance up to the
    numerical noise of an exact fit.
    """
    mean = float(np.mean(residuals))
    var = float(np.var(residuals))
    if var <= _DEGENERATE_REL_VAR * max(1.0, mean * mean):
        return None, None
    try:
        mom = sample_moments(residuals)
    except ValueError:
        return None, None
    eq = ErrorMoments(1.0, mom.sigma_eps, mom.gamma_eps, mom.kappa_eps)
    return mom, eq


def _std_errors(info: np.ndarray) -> np.ndarray:
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"information matrix is singular: {exc}") from exc
    diag = np.diag(cov)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise EstimationError("information matrix inverse has non-positive diagonal")
    return np.sqrt(diag)


def _boundary_note(params: CarrParams, cap: float) -> str:
    notes = []
    if params.persistence > cap - 1e-7:
        notes.append("persistence at its upper bound")
    coefs = params.alpha + params.beta
    if coefs and min(coefs) < 1e-7:
        notes.append("a coefficient at the zero bound")
    if notes:
        note = "; ".join(notes)
        warnings.warn(f"estimate is at a boundary: {note}", BoundaryWarning, stacklevel=3)
        return f" ({note})"
    return ""


# ---------------------------------------------------------------------------
# LEF


_BOUNDARY_NOTE = "; zero-bound coefficient(s), equation zero on free coordinates"


def _check_equation_contract(
    g_at: np.ndarray, coefs: np.ndarray, gnorm: float, tol: float
) -> tuple[bool, float, str]:
    """Accept an interior root, or a boundary point where zero-bound
    coefficients block the remaining equation component.

    The equation is the negative quasi-score, so a coefficient pinned at
    zero is admissible when its component pushes outward (g >= 0 there)
    while all free coordinates meet the tolerance. Returns (accepted,
    effective norm over free coordinates, note).
    """
    if gnorm < tol:
        return True, gnorm, ""
    bound = coefs <= 1e-8
    if not bound.any():
        return False, gnorm, ""
    free = np.concatenate(([True], ~bound))
    free_norm = float(np.max(np.abs(g_at[free])))
    outward = bool(np.all(g_at[1:][bound] >= -tol))
    if free_norm < tol and outward:
        return True, free_norm, _BOUNDARY_NOTE
    return False, gnorm, ""


def _active_set_polish(gfun, omega: float, coefs: np.ndarray, cap: float, tol: float):
    """Re-solve with outward-pushing zero-bound coefficients frozen at zero.

    The full system cannot be zeroed when the root sits outside the
    non-negativity constraint; dropping the bound coordinates yields a
    regular square system for the free ones. Returns (omega, coefs,
    free-coordinate norm) on success, else None.
    """
    g = gfun(omega, coefs)
    bound = (coefs <= 1e-8) & (g[1:] >= -tol)
    if not bound.any():
        return None
    free = ~bound

    def gfun_reduced(om, sub):
        full = np.zeros_like(coefs)
        full[free] = sub
        g_full = gfun(om, full)
        return np.concatenate(([g_full[0]], g_full[1:][free]))

    z0 = _theta_to_z(omega, np.maximum(coefs[free], 1e-10), cap)
    z, _ = _solve_equation(gfun_reduced, z0, cap, warm=True)
    om, sub = _z_to_theta(z, cap)
    full = np.zeros_like(coefs)
    full[free] = sub
    g_full = gfun(om, full)
    free_norm = float(max(abs(g_full[0]), np.max(np.abs(g_full[1:][free]), initial=0.0)))
    outward = bool(np.all(g_full[1:][bound] >= -tol))
    if free_norm < tol and outward:
        return om, full, free_norm
    return None


def _start_candidates(r, u: int, v: int, cap: float, presample: float, config: FitConfig, series):
    """Starting values: the shared default first, then a high-persistence
    variant, then (for higher orders) a nested start grown from the
    smallest-order fit. Extras only run when an earlier start failed."""
    yield _default_start(r, u, v)
    if v:
        yield 0.05 * float(r.mean()), np.concatenate([np.full(u, 0.1 / u), np.full(v, 0.85 / v)])
    else:
        yield 0.3 * float(r.mean()), np.full(u, 0.6 / u)
    if u + v > 2:
        base_v = 1 if v else 0
        try:
            base = fit_lef(
                series,
                FitConfig(
                    u=1,
                    v=base_v,
                    method="lef",
                    max_iterations=config.max_iterations,
                    tolerance=config.tolerance,
                    presample=presample,
                    max_persistence=cap,
                ),
            )
        except EstimationError:
            return
        pad = 1e-3
        alpha = np.concatenate([[base.params.alpha[0]], np.full(u - 1, pad)])
        beta_head = [base.params.beta[0]] if base_v else []
        beta = np.asarray(beta_head + [pad] * (v - base_v))
        coefs = np.concatenate([alpha, beta])
        if coefs.sum() < cap:
            yield float(base.params.omega), coefs


def fit_lef(series: RangeSeries, config: FitConfig) -> FitResult:
    """Optimal linear estimating-function fit.

    The theta root does not involve the error variance, so the profiled
    outer loop (solve theta, update sigma from residuals) settles in one
    extra pass; it is still run so the convergence report reflects the
    joint criterion.
    """
    _require_method(config, "lef")
    r, presample = _prepare(series, config)
    u, v, cap = config.u, config.v, config.max_persistence

    def gfun(omega, coefs):
        return _lef_g(omega, coefs[:u], coefs[u:], r, presample)

    best_norm, best_params = math.inf, None
    for omega0, coefs0 in _start_candidates(r, u, v, cap, presample, config, series):
        z = _theta_to_z(omega0, coefs0, cap)
        theta_prev = None
        gnorm = math.inf
        converged = False
        for it in range(1, config.max_iterations + 1):
            z, gnorm = _solve_equation(gfun, z, cap, warm=it > 1)
            omega, coefs = _z_to_theta(z, cap)
            theta = np.concatenate(([omega], coefs))
            if theta_prev is not None and float(np.max(np.abs(theta - theta_prev))) < config.tolerance:
                converged = True
                break
            theta_prev = theta
        if gnorm < best_norm:
            best_norm, best_params = gnorm, CarrParams.from_array(theta, u, v)
        if not converged:
            continue
        accepted, eff_norm, note = _check_equation_contract(
            gfun(omega, coefs), coefs, gnorm, config.tolerance
        )
        if not accepted:
            polished = _active_set_polish(gfun, omega, coefs, cap, config.tolerance)
            if polished is not None:
                omega, coefs, eff_norm = polished
                theta = np.concatenate(([omega], coefs))
                accepted, note = True, _BOUNDARY_NOTE
        if accepted:
            params = CarrParams.from_array(theta, u, v)
            return _finish_ef_fit(
                "lef", params, r, presample, config, eff_norm, it, message="converged" + note
            )
    raise EstimationError(
        f"estimating-equation residual {best_norm:.3e} exceeds tolerance "
        f"{config.tolerance:.1e} from every start",
        best_params=best_params,
    )


def _finish_ef_fit(
    method: str,
    params: CarrParams,
    r: np.ndarray,
    presample: float,
    config: FitConfig,
    gnorm: float,
    iterations: int,
    message: str = "converged",
) -> FitResult:
    psi, grad = carr_psi_grad(
        params.omega, params.alpha_array(), params.beta_array(), r, presample
    )
    path = PsiPath(psi, grad)
    eps = r / psi
    _, eq_moments = _finalize_moments(eps)
    if eq_moments is None:
        info = None
        ses = None
        message += "; residuals are degenerate (zero variance), no standard errors"
    else:
        info = info_matrix_lef(path, eq_moments) if method == "lef" else info_matrix_cef(path, eq_moments)
        ses = _std_errors(info)
    message += _boundary_note(params, config.max_persistence)
    rmspe, mape = prediction_metrics(r, psi)
    return FitResult(
        method=method,
        params=params,
        psi_hat=path,
        residuals=eps,
        error_moments=eq_moments,
        std_errors=ses,
        info_matrix=info,
        rmspe=rmspe,
        mape=mape,
        presample=presample,
        converged=True,
        iterations=iterations,
        message=message,
        eq_norm=gnorm,
    )


# ---------------------------------------------------------------------------
# CEF


def fit_cef(series: RangeSeries, config: FitConfig, init: FitResult | None = None) -> FitResult:
    """Combined estimating-function fit.

    `init` may pass a ready LEF fit on the same series and configuration to
    avoid recomputing the initializer (the Monte Carlo harness does this).
    """
    _require_method(config, "cef")
    r, presample = _prepare(series, config)
    u, v, cap = config.u, config.v, config.max_persistence

    if init is None:
        init = fit_lef(
            series,
            FitConfig(
                u=u,
                v=v,
                method="lef",
                max_iterations=config.max_iterations,
                tolerance=config.tolerance,
                presample=presample,
                max_persistence=cap,
            ),
        )
    elif init.method != "lef" or abs(init.presample - presample) > 1e-12:
        raise ValueError("init must be an LEF fit on the same series and presample")

    # Degenerate data (zero residual variance) make the quadratic term
    # vacuous: the linear root is exact and no moment weights exist.
    _, init_moments = _finalize_moments(init.residuals)
    if init_moments is None:
        return _finish_ef_fit(
            "cef",
            init.params,
            r,
            presample,
            config,
            init.eq_norm if init.eq_norm is not None else 0.0,
            iterations=1,
            message="degenerate residual variance; quadratic component vacuous, linear root returned",
        )

    moments = init_moments
    z = _theta_to_z(init.params.omega, np.asarray(init.params.alpha + init.params.beta), cap)
    theta_prev = init.params.as_array()
    gnorm = math.inf
    iterations = 0
    converged = False
    for it in range(1, config.max_iterations + 1):
        iterations = it
        if moments.cef_denominator < _CEF_DENOM_FLOOR:
            raise EstimationError(
                f"combined-equation weights are ill-conditioned: kappa + 2 - gamma^2 = "
                f"{moments.cef_denominator:.3e} < {_CEF_DENOM_FLOOR:.0e}",
                best_params=CarrParams.from_array(theta_prev, u, v),
            )
        current = moments

        def gfun(omega, coefs, _m=current):
            return _cef_g(omega, coefs[:u], coefs[u:], r, presample, _m)

        z, gnorm = _solve_equation(gfun, z, cap, warm=it > 1)
        omega, coefs = _z_to_theta(z, cap)
        theta = np.concatenate(([omega], coefs))
        psi = carr_psi(omega, coefs[:u].copy(), coefs[u:].copy(), r, presample)
        moments = _equation_moments(r / psi, CarrParams.from_array(theta, u, v))
        delta = float(np.max(np.abs(theta - theta_prev)))
        theta_prev = theta
        if delta < config.tolerance:
            converged = True
            break
    if not converged:
        raise EstimationError(
            f"CEF moment iteration did not converge in {config.max_iterations} iterations",
            best_params=CarrParams.from_array(theta_prev, u, v),
        )

    # One polish under the settled moments so the reported equation norm
    # belongs to the reported weights.
    def gfun_final(omega, coefs, _m=moments):
        return _cef_g(omega, coefs[:u], coefs[u:], r, presample, _m)

    z, gnorm = _solve_equation(gfun_final, z, cap, warm=True)
    omega, coefs = _z_to_theta(z, cap)
    accepted, eff_norm, note = _check_equation_contract(
        gfun_final(omega, coefs), coefs, gnorm, config.tolerance
    )
    if not accepted:
        polished = _active_set_polish(gfun_final, omega, coefs, cap, config.tolerance)
        if polished is not None:
            omega, coefs, eff_norm = polished
            accepted, note = True, _BOUNDARY_NOTE
    params = CarrParams.from_array(np.concatenate(([omega], coefs)), u, v)
    if not accepted:
        raise EstimationError(
            f"estimating-equation residual {gnorm:.3e} exceeds tolerance {config.tolerance:.1e}",
            best_params=params,
        )
    return _finish_ef_fit(
        "cef", params, r, presample, config, eff_norm, iterations, message="converged" + note
    )


def _equation_moments(residuals: np.ndarray, best: CarrParams) -> ErrorMoments:
    _, eq = _finalize_moments(residuals)
    if eq is None:
        raise EstimationError("residual moments are degenerate", best_params=best)
    return eq


# ---------------------------------------------------------------------------
# ML under standardized GB2 errors


def carr_gb2_loglik(
    series: RangeSeries,
    shape: tuple[float, float, float],
    params: CarrParams,
    presample: float,
) -> float:
    """Log likelihood of the ranges under unit-mean GB2 errors."""
    r = series.values
    psi = carr_psi(params.omega, params.alpha_array(), params.beta_array(), r, float(presample))
    return -_negloglik(*shape, psi, r, np.log(r))


def _negloglik(a, p, q, psi, r, logr) -> float:
    # b* is the unit-mean scale B(p,q) / B(p+1/a, q-1/a); the range density
    # is GB2 with per-observation scale psi_t * b*.
    if a <= 0 or p <= 0 or a * q <= 1.0:
        return 1e300
    log_bpq = special.betaln(p, q)
    log_bstar = log_bpq - special.betaln(p + 1.0 / a, q - 1.0 / a)
    log_scale = np.log(psi) + log_bstar
    z = a * (logr - log_scale)
    ll = (
        math.log(a)
        + (a * p - 1.0) * logr
        - a * p * log_scale
        - log_bpq
        - (p + q) * np.logaddexp(0.0, z)
    )
    total = float(np.sum(ll))
    return -total if math.isfinite(total) else 1e300


def fit_ml(series: RangeSeries, config: FitConfig) -> FitResult:
    """Maximum likelihood over (a, p, q, omega, alpha, beta).

    Shapes are kept in the region a > 0, p > 0, a*q > 1 (mean existence) by
    a smooth reparametrization; standard errors come from the inverse of
    the numerical Hessian of the negative log likelihood at the optimum.
    The reported theta information matrix is the Schur complement of the
    shape block, so sqrt(diag(inverse)) reproduces the theta standard
    errors.
    """
    _require_method(config, "ml")
    r, presample = _prepare(series, config)
    u, v, cap = config.u, config.v, config.max_persistence
    logr = np.log(r)

    def unpack(z):
        z = np.clip(z, -_Z_LIMIT, _Z_LIMIT)
        a = math.exp(z[0])
        p = math.exp(z[1])
        q = (1.0 + math.exp(z[2])) / a
        omega, coefs = _z_to_theta(z[3:], cap)
        return a, p, q, omega, coefs

    def negll_z(z):
        a, p, q, omega, coefs = unpack(z)
        psi = carr_psi(omega, coefs[:u].copy(), coefs[u:].copy(), r, presample)
        return _negloglik(a, p, q, psi, r, logr)

    a0, p0, q0 = config.gb2_start
    omega0, coefs0 = _default_start(r, u, v)
    z0 = np.concatenate(
        ([math.log(a0), math.log(p0), math.log(a0 * q0 - 1.0)], _theta_to_z(omega0, coefs0, cap))
    )
    res = minimize(
        negll_z,
        z0,
        method="L-BFGS-B",
        options={"maxiter": 10 * config.max_iterations, "ftol": 1e-14, "gtol": 1e-9},
    )
    grad_ok = np.max(np.abs(res.jac)) < 1e-4 * (1.0 + abs(res.fun))
    if not (res.success or grad_ok):
        a, p, q, omega, coefs = unpack(res.x)
        raise EstimationError(
            f"likelihood optimizer failed: {res.message}",
            best_params=CarrParams.from_array(np.concatenate(([omega], coefs)), u, v),
        )
    a, p, q, omega, coefs = unpack(res.x)
    params = CarrParams.from_array(np.concatenate(([omega], coefs)), u, v)
    message = "converged" if res.success else f"accepted near-stationary point: {res.message}"
    message += _boundary_note(params, cap)

    psi, grad = carr_psi_grad(params.omega, params.alpha_array(), params.beta_array(), r, presample)
    path = PsiPath(psi, grad)
    eps = r / psi
    _, eq_moments = _finalize_moments(eps)

    lam = np.concatenate(([a, p, q], params.as_array()))

    def negll_natural(x):
        th = x[3:]
        if x[0] <= 0 or x[1] <= 0 or x[0] * x[2] <= 1.0 or th[0] <= 0 or np.any(th[1:] < 0):
            return math.nan
        psi_n = carr_psi(th[0], th[1 : 1 + u].copy(), th[1 + u :].copy(), r, presample)
        return _negloglik(x[0], x[1], x[2], psi_n, r, logr)

    ses = info_theta = shape_ses = None
    try:
        hess = _fd_hessian(negll_natural, lam)
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
        if np.all(np.isfinite(diag)) and np.all(diag > 0):
            ses_all = np.sqrt(diag)
            ses = ses_all[3:]
            shape_ses = tuple(float(s) for s in ses_all[:3])
            h_tt = hess[3:, 3:]
            h_tf = hess[3:, :3]
            h_ff = hess[:3, :3]
            info_theta = h_tt - h_tf @ np.linalg.solve(h_ff, h_tf.T)
        else:
            message += "; Hessian not positive definite, no standard errors"
    except np.linalg.LinAlgError:
        message += "; Hessian inversion failed, no standard errors"

    rmspe, mape = prediction_metrics(r, psi)
    return FitResult(
        method="ml",
        params=params,
        psi_hat=path,
        residuals=eps,
        error_moments=eq_moments,
        std_errors=ses,
        info_matrix=info_theta,
        rmspe=rmspe,
        mape=mape,
        presample=presample,
        converged=True,
        iterations=int(res.nit),
        message=message,
        gb2_shape=(float(a), float(p), float(q)),
        gb2_shape_std_errors=shape_ses,
        loglik=-float(res.fun),
    )


def _fd_hessian(f, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central finite-difference Hessian; shrinks steps that leave the
    function's domain (signalled by NaN)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    for i in range(n):
        for _ in range(30):
            lo, hi = x.copy(), x.copy()
            lo[i] -= h[i]
            hi[i] += h[i]
            if math.isfinite(f(lo)) and math.isfinite(f(hi)):
                break
            h[i] *= 0.5
        else:
            raise EstimationError("could not find a valid finite-difference step")
    f0 = f(x)
    hess = np.empty((n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i])
        for j in range(i + 1, n):
            xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
            xpp[[i, j]] += (h[i], h[j])
            xpm[i] += h[i]
            xpm[j] -= h[j]
            xmp[i] -= h[i]
            xmp[j] += h[j]
            xmm[[i, j]] -= (h[i], h[j])
            hess[i, j] = hess[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(hess)):
        raise EstimationError("finite-difference Hessian is not finite")
    return hess


# ---------------------------------------------------------------------------
# information matrices and residuals


def info_matrix_lef(psi: PsiPath, moments: ErrorMoments) -> np.ndarray:
    """Godambe information of the optimal linear equation:
    sum_t mu^2 / (psi_t^2 sigma^2) dpsi_t dpsi_t'."""
    w = (moments.mu_eps**2) / (psi.psi**2 * moments.sigma_eps**2)
    return (psi.grad * w[:, None]).T @ psi.grad


def info_matrix_cef(psi: PsiPath, moments: ErrorMoments) -> np.ndarray:
    """Linear-equation information plus the orthogonal quadratic gain:
    sum_t (gamma mu - 2 sigma)^2 / (psi_t^2 sigma^2 (kappa + 2 - gamma^2))
    dpsi_t dpsi_t'."""
    denom = moments.cef_denominator
    if denom < _CEF_DENOM_FLOOR:
        raise EstimationError(
            f"kappa + 2 - gamma^2 = {denom:.3e} is below the {_CEF_DENOM_FLOOR:.0e} floor"
        )
    base = info_matrix_lef(psi, moments)
    c = (moments.gamma_eps * moments.mu_eps - 2.0 * moments.sigma_eps) ** 2 / (
        psi.psi**2 * moments.sigma_eps**2 * denom
    )
    return base + (psi.grad * c[:, None]).T @ psi.grad


def residuals(series: RangeSeries, psi: PsiPath) -> np.ndarray:
    """Standardized residuals eps_hat_t = r_t / psi_hat_t."""
    if len(series) != len(psi):
        raise ValueError("series and psi path lengths differ")
    return series.values / psi.psi


def fit(series: RangeSeries, config: FitConfig) -> FitResult:
    """Dispatch to the fitter selected by config.method."""
    if config.method == "ml":
        return fit_ml(series, config)
    if config.method == "lef":
        return fit_lef(series, config)
    if config.method == "cef":
        return fit_cef(series, config)
    raise ValueError(f"unknown method {config.method!r}")
