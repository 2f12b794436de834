"""CARR(u, v) range model: domain types, conditional-mean path with exact
gradients, simulation, and closed-form unconditional moments.

The model for a positive range series is r_t = psi_t * eps_t with iid
unit-mean positive errors eps_t and

    psi_t = omega + sum_{i=1..u} alpha_i r_{t-i} + sum_{j=1..v} beta_j psi_{t-j}.

Initialization convention: psi_1 is pinned to the pre-sample value (the
simulation protocol sets it explicitly; estimation defaults it to the sample
mean of the ranges) and pre-sample r and psi lags use that same constant.
Pinned and pre-sample values are treated as constants, so they carry zero
parameter gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .recursions import carr_psi_grad, carr_simulate


@dataclass(frozen=True)
class CarrParams:
    """Coefficients (omega, alpha_1..alpha_u, beta_1..beta_v)."""

    omega: float
    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"omega must be a positive real, got {self.omega!r}")
        for name, coefs in (("alpha", self.alpha), ("beta", self.beta)):
            for k, c in enumerate(coefs, start=1):
                if not np.isfinite(c) or c < 0:
                    raise ValueError(f"{name}_{k} must be non-negative, got {c!r}")

    @property
    def order(self) -> tuple[int, int]:
        return len(self.alpha), len(self.beta)

    @property
    def persistence(self) -> float:
        return float(sum(self.alpha) + sum(self.beta))

    @property
    def is_stationary(self) -> bool:
        return self.persistence < 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, *self.alpha, *self.beta], dtype=float)

    @classmethod
    def from_array(cls, theta: Sequence[float], u: int, v: int) -> "CarrParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (1 + u + v,):
            raise ValueError(f"expected {1 + u + v} parameters, got shape {theta.shape}")
        return cls(theta[0], tuple(theta[1 : 1 + u]), tuple(theta[1 + u :]))

    def alpha_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


@dataclass
class RangeSeries:
    """Time-indexed positive range observations."""

    values: np.ndarray
    timestamps: list[str] | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("range series must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"range value at index {bad} is not finite")
        nonpos = np.flatnonzero(values <= 0)
        if nonpos.size:
            bad = int(nonpos[0])
            raise ValueError(
                f"range value at index {bad} is {values[bad]!r}; ranges must be strictly positive"
            )
        self.values = values
        if self.timestamps is not None:
            self.timestamps = list(self.timestamps)
            if len(self.timestamps) != values.size:
                raise ValueError("timestamps length does not match values")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass
class PsiPath:
    """Conditional-mean path psi_t with per-t gradients d psi_t / d theta."""

    psi: np.ndarray
    grad: np.ndarray

    def __post_init__(self) -> None:
        self.psi = np.asarray(self.psi, dtype=float)
        self.grad = np.asarray(self.grad, dtype=float)
        if self.psi.ndim != 1 or self.grad.ndim != 2 or self.grad.shape[0] != self.psi.shape[0]:
            raise ValueError("psi must be (T,) and grad (T, d) with matching T")
        if np.any(self.psi <= 0) or not np.all(np.isfinite(self.psi)):
            raise ValueError("conditional means must be positive and finite")

    def __len__(self) -> int:
        return int(self.psi.size)


def compute_range(log_price_intervals: Sequence[Sequence[float]]) -> RangeSeries:
    """Per-interval range: 100 * (max - min) of the interval's log prices.

    Each interval needs at least two observations. A flat interval yields a
    zero range, which the RangeSeries constructor rejects; that error is the
    caller's signal to clean the data rather than have zeros floored away.
    """
    if len(log_price_intervals) == 0:
        raise ValueError("no intervals supplied")
    values = np.empty(len(log_price_intervals))
    for t, interval in enumerate(log_price_intervals):
        arr = np.asarray(interval, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"interval {t} needs at least 2 log-price observations")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"interval {t} contains non-finite log prices")
        values[t] = 100.0 * (float(arr.max()) - float(arr.min()))
    return RangeSeries(values)


def range_from_high_low(
    high: Sequence[float], low: Sequence[float], timestamps: list[str] | None = None
) -> RangeSeries:
    """Daily form of the range: 100 * (ln High_t - ln Low_t)."""
    high = np.asarray(high, dtype=float)
    low = np.asarray(low, dtype=float)
    if high.shape != low.shape or high.ndim != 1 or high.size == 0:
        raise ValueError("high and low must be non-empty 1-d arrays of equal length")
    for name, arr in (("high", high), ("low", low)):
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            bad = int(np.flatnonzero(~np.isfinite(arr) | (arr <= 0))[0])
            raise ValueError(f"{name} price at index {bad} is not a positive real")
    below = np.flatnonzero(high < low)
    if below.size:
        bad = int(below[0])
        raise ValueError(f"high {high[bad]!r} is below low {low[bad]!r} at index {bad}")
    return RangeSeries(100.0 * (np.log(high) - np.log(low)), timestamps)


def psi_path(params: CarrParams, series: RangeSeries, presample_psi: float) -> PsiPath:
    """Conditional-mean recursion over the sample with exact gradients.

    psi_1 is pinned to presample_psi; pre-sample r and psi lags equal the
    same constant. Gradients follow the companion recursions

        d psi_t / d omega  = 1 + sum_j beta_j d psi_{t-j} / d omega,
        d psi_t / d alpha_i = r_{t-i} + sum_j beta_j d psi_{t-j} / d alpha_i,
        d psi_t / d beta_j  = psi_{t-j} + sum_k beta_k d psi_{t-k} / d beta_j,

    with zero gradients for pinned/pre-sample entries.
    """
    presample_psi = float(presample_psi)
    if not np.isfinite(presample_psi) or presample_psi <= 0:
        raise ValueError(f"presample_psi must be positive, got {presample_psi!r}")
    psi, grad = carr_psi_grad(
        params.omega, params.alpha_array(), params.beta_array(), series.values, presample_psi
    )
    return PsiPath(psi=psi, grad=grad)


def simulate_path(params, error_sampler, n: int, psi1: float, seed: int):
    """Simulate (r, psi) arrays of length n; deterministic given the seed.

    `error_sampler` must expose sample(n, seed) returning positive draws
    with unit mean (the mean is the sampler's contract; positivity is
    enforced here).
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one observation")
    psi1 = float(psi1)
    if not np.isfinite(psi1) or psi1 <= 0:
        raise ValueError(f"psi1 must be positive, got {psi1!r}")
    eps = np.asarray(error_sampler.sample(n, seed), dtype=float)
    if eps.shape != (n,):
        raise ValueError(f"error sampler returned shape {eps.shape}, expected ({n},)")
    if not np.all(np.isfinite(eps)) or np.any(eps <= 0):
        raise ValueError("error sampler violated its contract: non-positive or non-finite draw")
    return carr_simulate(params.omega, params.alpha_array(), params.beta_array(), eps, psi1)


def simulate(params, error_sampler, n: int, psi1: float, seed: int) -> RangeSeries:
    """Simulate a range series of length n (see simulate_path)."""
    r, _ = simulate_path(params, error_sampler, n, psi1, seed)
    return RangeSeries(r)


def unconditional_moments(params: CarrParams, e_eps2: float) -> tuple[float, float]:
    """Closed-form unconditional mean and variance of a CARR(1,1) range.

        mu_r     = omega / (1 - alpha1 - beta1)
        sigma2_r = (E[eps^2] - 1) mu_r^2 (1 - beta1^2 - 2 alpha1 beta1)
                   / (1 - alpha1^2 E[eps^2] - beta1^2 - 2 alpha1 beta1)

    Requires stationarity and a positive variance denominator.
    """
    if params.order != (1, 1):
        raise ValueError(f"closed-form moments need CARR(1,1); got order {params.order}")
    e_eps2 = float(e_eps2)
    if e_eps2 < 1.0:
        raise ValueError("E[eps^2] below 1 is impossible for unit-mean errors")
    if not params.is_stationary:
        raise ValueError("non-stationary parameters: alpha1 + beta1 >= 1")
    a1 = params.alpha[0]
    b1 = params.beta[0]
    mu = params.omega / (1.0 - a1 - b1)
    denom = 1.0 - a1 * a1 * e_eps2 - b1 * b1 - 2.0 * a1 * b1
    if denom <= 0:
        raise ValueError(
            "range variance does not exist: 1 - alpha1^2 E[eps^2] - beta1^2 - 2 alpha1 beta1 <= 0"
        )
    sigma2 = (e_eps2 - 1.0) * mu * mu * (1.0 - b1 * b1 - 2.0 * a1 * b1) / denom
    return float(mu), float(sigma2)
