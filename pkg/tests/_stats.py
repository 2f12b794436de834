"""Small Monte Carlo statistics helpers shared by the test modules."""

import numpy as np


def batch_mean_se(x, batches=100):
    """Mean and its MC standard error via batch means (handles
    autocorrelated series)."""
    x = np.asarray(x, dtype=float)
    n = x.size // batches * batches
    means = x[:n].reshape(batches, -1).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(batches))


def batch_var_se(x, batches=100):
    """Variance (divisor n) and its MC standard error via batch estimates."""
    x = np.asarray(x, dtype=float)
    n = x.size // batches * batches
    chunks = x[:n].reshape(batches, -1)
    variances = chunks.var(axis=1)
    return float(variances.mean()), float(variances.std(ddof=1) / np.sqrt(batches))


def rmse_with_se(estimates, truth):
    """RMSE of the estimates and the delta-method MC standard error of that
    RMSE estimate."""
    sq = (np.asarray(estimates, dtype=float) - truth) ** 2
    m = sq.mean()
    rmse = np.sqrt(m)
    se_mean_sq = sq.std(ddof=1) / np.sqrt(sq.size)
    return float(rmse), float(se_mean_sq / (2.0 * rmse))
