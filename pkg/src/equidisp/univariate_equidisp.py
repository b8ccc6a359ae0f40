"""Univariate equi-dispersed normal family N(tau, tau)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .numerics import RandomStream

__all__ = [
    "DegenerateSampleError",
    "LRTResult",
    "ueq_logpdf",
    "ueq_loglik",
    "ueq_mle",
    "ueq_lrt",
    "ueq_sample",
]

_LOG_2PI = np.log(2.0 * np.pi)


class DegenerateSampleError(ValueError):
    """The sample carries no information for the requested estimator."""


@dataclass(frozen=True)
class LRTResult:
    """``lam`` can underflow to 0 for huge statistics; ``log_lam`` does not."""

    tau_hat: float
    log_lam: float
    lam: float
    stat: float
    p_value: float


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return tau


def ueq_logpdf(x, tau: float):
    """Log density of N(tau, tau) at ``x`` (scalar or array)."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    return -0.5 * (_LOG_2PI + np.log(tau)) - (x - tau) ** 2 / (2.0 * tau)


def ueq_loglik(xs, tau: float) -> float:
    """Sample log-likelihood; only ``n``, ``sum x`` and ``sum x^2`` matter."""
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(ueq_logpdf(xs, tau)))


def ueq_mle(xs) -> float:
    """Maximum likelihood estimate of ``tau``.

    The score equation reduces to ``tau^2 + tau - m2 = 0`` with
    ``m2 = mean(x^2)``; the estimate is its positive root.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise DegenerateSampleError("empty sample")
    m2 = float(np.mean(xs**2))
    if not m2 > 0:
        raise DegenerateSampleError("all observations are zero; tau_hat would be 0")
    # Rationalized form of sqrt(m2 + 1/4) - 1/2, stable for small m2.
    return m2 / (np.sqrt(m2 + 0.25) + 0.5)


def ueq_lrt(xs) -> LRTResult:
    """Likelihood ratio test of ``mean == variance`` inside the normal family.

    ``lam`` is formed from the two maximized log-likelihoods directly and
    ``-2 log lam`` is referred to chi-square with one degree of freedom.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    if n < 2:
        raise DegenerateSampleError("need at least two observations")
    mu = xs.mean()
    var = float(np.mean((xs - mu) ** 2))
    if not var > 0:
        raise DegenerateSampleError("constant sample; variance estimate is 0")
    tau = ueq_mle(xs)
    ll_full = -0.5 * n * (_LOG_2PI + np.log(var) + 1.0)
    ll_null = ueq_loglik(xs, tau)
    # The restricted maximum cannot exceed the unrestricted one.
    log_lam = min(ll_null - ll_full, 0.0)
    stat = 0.0 - 2.0 * log_lam  # avoids -0.0
    return LRTResult(tau_hat=tau, log_lam=float(log_lam), lam=float(np.exp(log_lam)), stat=float(stat),
                     p_value=float(stats.chi2.sf(stat, df=1)))


def ueq_sample(tau: float, n: int, rng: RandomStream) -> np.ndarray:
    """``n`` independent draws from N(tau, tau)."""
    tau = _check_tau(tau)
    if n < 1:
        raise ValueError("n must be >= 1")
    return rng.generator().normal(tau, np.sqrt(tau), size=n)
