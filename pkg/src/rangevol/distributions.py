"""GB2 and standardized lognormal error distributions, plus the sample
moments used by the combined estimating-function weights.

The GB2 density with shapes (a, p, q) and scale b is

    f(x) = |a| x^(ap-1) / ( b^ap B(p, q) [1 + (x/b)^a]^(p+q) ),   x > 0,

and E[X^h] = b^h B(p + h/a, q - h/a) / B(p, q) when the moment exists.
Everything is evaluated in log space so large shape parameters do not
overflow the beta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class Gb2Params:
    """GB2 shape parameters (a, p, q) and scale b."""

    a: float
    b: float
    p: float
    q: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "p", "q"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.a == 0 or not math.isfinite(self.a):
            raise ValueError("shape a must be a nonzero real")
        for name in ("b", "p", "q"):
            val = getattr(self, name)
            if not math.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be positive, got {val!r}")

    def moment_exists(self, h: float) -> bool:
        """True iff the h-th moment exists: -a*p < h < a*q (strict)."""
        return -self.a * self.p < h < self.a * self.q


@dataclass(frozen=True)
class ErrorMoments:
    """Mean, standard deviation, skewness and excess kurtosis of the errors.

    The combined estimating function divides by kappa + 2 - gamma^2, which
    the moment inequality keeps non-negative for any sample; construction
    only rejects values that are impossible up to numerical noise. Fitting
    routines apply a stricter floor before using the moments as weights.
    """

    mu_eps: float
    sigma_eps: float
    gamma_eps: float
    kappa_eps: float

    def __post_init__(self) -> None:
        for name in ("mu_eps", "sigma_eps", "gamma_eps", "kappa_eps"):
            val = float(getattr(self, name))
            object.__setattr__(self, name, val)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
        if self.sigma_eps <= 0:
            raise ValueError("sigma_eps must be positive")
        if self.cef_denominator < -1e-9:
            raise ValueError(
                "kappa + 2 - gamma^2 is negative, which violates the moment inequality"
            )

    @property
    def cef_denominator(self) -> float:
        return self.kappa_eps + 2.0 - self.gamma_eps**2


def gb2_logpdf(x, params: Gb2Params):
    """Log density of the GB2 distribution at x > 0 (scalar or array)."""
    scalar = np.isscalar(x)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("GB2 support is x > 0")
    a, b, p, q = params.a, params.b, params.p, params.q
    logx = np.log(arr)
    z = a * (logx - math.log(b))
    out = (
        math.log(abs(a))
        + (a * p - 1.0) * logx
        - a * p * math.log(b)
        - special.betaln(p, q)
        - (p + q) * np.logaddexp(0.0, z)
    )
    return float(out) if scalar else out


def gb2_pdf(x, params: Gb2Params):
    return np.exp(gb2_logpdf(x, params))


def gb2_moment(params: Gb2Params, h: float) -> float:
    """E[X^h] = b^h B(p + h/a, q - h/a) / B(p, q); errors if nonexistent."""
    if not params.moment_exists(h):
        raise ValueError(
            f"moment of order {h} does not exist for (a, p, q) = "
            f"({params.a}, {params.p}, {params.q}): need -a*p < h < a*q"
        )
    a, b, p, q = params.a, params.b, params.p, params.q
    return b**h * math.exp(special.betaln(p + h / a, q - h / a) - special.betaln(p, q))


def gb2_mean(params: Gb2Params) -> float:
    """Mean b * B(p + 1/a, q - 1/a) / B(p, q)."""
    return gb2_moment(params, 1.0)


def standardize_gb2(a: float, p: float, q: float) -> Gb2Params:
    """GB2 with the scale chosen so the mean is exactly one.

    b = B(p, q) / B(p + 1/a, q - 1/a); requires the first moment to exist.
    """
    trial = Gb2Params(a, 1.0, p, q)
    if not trial.moment_exists(1.0):
        raise ValueError(
            f"cannot standardize (a, p, q) = ({a}, {p}, {q}): first moment does not exist"
        )
    b = math.exp(special.betaln(p, q) - special.betaln(p + 1.0 / a, q - 1.0 / a))
    return Gb2Params(a, b, p, q)


def gb2_sample(params: Gb2Params, n: int, seed: int) -> np.ndarray:
    """Exact GB2 draws via the beta-ratio transform.

    With B ~ Beta(p, q), the draw is b * (B / (1 - B))^(1/a); deterministic
    given the seed (PCG64 generator).
    """
    rng = np.random.default_rng(seed)
    b = rng.beta(params.p, params.q, size=int(n))
    draws = params.b * (b / (1.0 - b)) ** (1.0 / params.a)
    if not np.all(np.isfinite(draws)) or np.any(draws <= 0):
        raise RuntimeError("beta-ratio transform produced a degenerate draw")
    return draws


def lognormal_standardized_sample(sigma: float, n: int, seed: int) -> np.ndarray:
    """Unit-mean lognormal draws exp(sigma * Z - sigma^2 / 2), Z ~ N(0, 1)."""
    sigma = float(sigma)
    if not math.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(int(n))
    return np.exp(sigma * z - 0.5 * sigma * sigma)


def sample_moments(x) -> ErrorMoments:
    """Sample mean, sd, skewness and excess kurtosis (divisor n throughout).

    skewness = m3 / m2^(3/2) and excess kurtosis = m4 / m2^2 - 3 with m_k
    the k-th central sample moment.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 4:
        raise ValueError("need at least 4 observations for sample moments")
    mean = float(arr.mean())
    c = arr - mean
    m2 = float(np.mean(c * c))
    if m2 <= 0:
        raise ValueError("sample moments are undefined for constant input")
    m3 = float(np.mean(c * c * c))
    m4 = float(np.mean(c * c * c * c))
    return ErrorMoments(
        mu_eps=mean,
        sigma_eps=math.sqrt(m2),
        gamma_eps=m3 / m2**1.5,
        kappa_eps=m4 / (m2 * m2) - 3.0,
    )


@dataclass(frozen=True)
class StandardizedGb2Errors:
    """Unit-mean GB2 error sampler for simulation designs."""

    a: float
    p: float
    q: float

    def __post_init__(self) -> None:
        standardize_gb2(self.a, self.p, self.q)  # validates shapes and mean existence

    @property
    def params(self) -> Gb2Params:
        return standardize_gb2(self.a, self.p, self.q)

    @property
    def mean(self) -> float:
        return 1.0

    def second_moment(self) -> float:
        """E[eps^2]; errors when the design sits at or past the h=2 boundary."""
        return gb2_moment(self.params, 2.0)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return gb2_sample(self.params, n, seed)


@dataclass(frozen=True)
class StandardizedLognormalErrors:
    """Unit-mean lognormal error sampler with log-scale sigma."""

    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def mean(self) -> float:
        return 1.0

    def second_moment(self) -> float:
        return math.exp(self.sigma**2)

    def moments(self) -> ErrorMoments:
        """Exact moments: handy as an oracle for estimator invariants."""
        w = math.exp(self.sigma**2)
        return ErrorMoments(
            mu_eps=1.0,
            sigma_eps=math.sqrt(w - 1.0),
            gamma_eps=(w + 2.0) * math.sqrt(w - 1.0),
            kappa_eps=w**4 + 2.0 * w**3 + 3.0 * w**2 - 6.0,
        )

    def sample(self, n: int, seed: int) -> np.ndarray:
        return lognormal_standardized_sample(self.sigma, n, seed)


@dataclass(frozen=True)
class ConstantErrors:
    """Degenerate sampler returning a constant; useful for exact-data tests."""

    value: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value <= 0:
            raise ValueError("value must be positive")

    @property
    def mean(self) -> float:
        return self.value

    def sample(self, n: int, seed: int) -> np.ndarray:
        return np.full(int(n), self.value)
