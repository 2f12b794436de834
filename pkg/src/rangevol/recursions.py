"""Sequential CARR recursions compiled with numba.

These are the hot loops shared by simulation, likelihood evaluation and the
estimating-function solvers. They take plain float64 arrays; validation
happens in the calling layer. The first conditional mean is pinned to the
pre-sample value, and lags reaching before the sample use that same value.
Keep the arithmetic order of `carr_psi`, `carr_psi_grad` and `carr_simulate`
identical: simulation followed by filtering must reproduce the psi sequence
bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def carr_psi(omega, alpha, beta, r, presample):
    T = r.shape[0]
    u = alpha.shape[0]
    v = beta.shape[0]
    psi = np.empty(T)
    psi[0] = presample
    for t in range(1, T):
        acc = omega
        for i in range(u):
            s = t - 1 - i
            acc += alpha[i] * (r[s] if s >= 0 else presample)
        for j in range(v):
            s = t - 1 - j
            acc += beta[j] * (psi[s] if s >= 0 else presample)
        psi[t] = acc
    return psi


@njit(cache=True)
def carr_psi_grad(omega, alpha, beta, r, presample):
    """Recursion plus exact gradient of psi_t in (omega, alpha, beta).

    Pre-sample values are constants, so the pinned first entry carries a
    zero gradient row.
    """
    T = r.shape[0]
    u = alpha.shape[0]
    v = beta.shape[0]
    d = 1 + u + v
    psi = np.empty(T)
    grad = np.zeros((T, d))
    psi[0] = presample
    for t in range(1, T):
        acc = omega
        for i in range(u):
            s = t - 1 - i
            rv = r[s] if s >= 0 else presample
            acc += alpha[i] * rv
            grad[t, 1 + i] += rv
        for j in range(v):
            s = t - 1 - j
            pv = psi[s] if s >= 0 else presample
            acc += beta[j] * pv
            grad[t, 1 + u + j] += pv
            if s >= 0:
                for k in range(d):
                    grad[t, k] += beta[j] * grad[s, k]
        grad[t, 0] += 1.0
        psi[t] = acc
    return psi, grad


@njit(cache=True)
def carr_simulate(omega, alpha, beta, eps, psi1):
    """Generate r_t = psi_t * eps_t with psi_1 pinned to psi1."""
    T = eps.shape[0]
    u = alpha.shape[0]
    v = beta.shape[0]
    psi = np.empty(T)
    r = np.empty(T)
    psi[0] = psi1
    r[0] = psi1 * eps[0]
    for t in range(1, T):
        acc = omega
        for i in range(u):
            s = t - 1 - i
            acc += alpha[i] * (r[s] if s >= 0 else psi1)
        for j in range(v):
            s = t - 1 - j
            acc += beta[j] * (psi[s] if s >= 0 else psi1)
        psi[t] = acc
        r[t] = acc * eps[t]
    return r, psi
