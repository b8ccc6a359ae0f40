"""Normal laws with variance equal to the squared mean, and a pseudo joint law.

The univariate law is N(tau, tau^2) with ``tau != 0``.  The joint density
pairs ``X ~ N(tau1, tau1^2)`` with ``Y | X=x ~ N(tau(x), tau(x)^2)`` under the
affine link ``tau(x) = tau2 + tau3 x``.  The likelihood factorizes, so
``tau1`` and ``(tau2, tau3)`` are estimated separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equidisp_model import Sample2D
from .estimation import FitReport
from .numerics import OptimConfig, RandomStream, minimize_bounded
from .univariate_equidisp import DegenerateSampleError

__all__ = [
    "EPSILON_TAU",
    "VarMeanSqParam",
    "PseudoParams",
    "SingularLinkError",
    "DegenerateLinkError",
    "vms_logpdf",
    "vms_loglik",
    "vms_mle",
    "pseudo_logpdf",
    "pseudo_sample",
    "pseudo_fit",
]

EPSILON_TAU = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_MAX_REJECT_FRACTION = 0.5


class SingularLinkError(ArithmeticError):
    """``|tau(x)|`` fell below ``EPSILON_TAU`` where a density was requested."""


class DegenerateLinkError(ArithmeticError):
    """The sampler rejected more than half of its X draws."""


@dataclass(frozen=True)
class VarMeanSqParam:
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau != 0):
            raise ValueError("tau must be finite and nonzero")


@dataclass(frozen=True)
class PseudoParams:
    tau1: float
    tau2: float
    tau3: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.tau1, self.tau2, self.tau3)):
            raise ValueError("parameters must be finite")
        if self.tau1 == 0:
            raise ValueError("tau1 must be nonzero")

    def link(self, x):
        return self.tau2 + self.tau3 * np.asarray(x, dtype=float)


def _tau(p) -> float:
    return p.tau if isinstance(p, VarMeanSqParam) else VarMeanSqParam(float(p)).tau


def vms_logpdf(x, p):
    """Log density of N(tau, tau^2); ``p`` is a :class:`VarMeanSqParam` or a number."""
    tau = _tau(p)
    x = np.asarray(x, dtype=float)
    return -math.log(abs(tau)) - _HALF_LOG_2PI - (x - tau) ** 2 / (2.0 * tau * tau)


def vms_loglik(xs, tau: float) -> float:
    return float(np.sum(vms_logpdf(xs, tau)))


def vms_mle(xs) -> tuple[VarMeanSqParam, float]:
    """Maximum likelihood for N(tau, tau^2).

    The score vanishes where ``n tau^2 + tau sum(x) - sum(x^2) = 0``.  Its two
    roots have opposite signs; the one with the larger log-likelihood wins,
    and an exact tie (which happens when ``sum(x) = 0``) goes to the positive
    root.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    if n == 0:
        raise DegenerateSampleError("empty sample")
    s1, s2 = float(xs.sum()), float(np.sum(xs * xs))
    if not s2 > 0:
        raise DegenerateSampleError("all observations are zero")
    # q = -(s1 + sign(s1) sqrt(disc)) / 2 avoids cancellation; roots q/n and -s2/q
    q = -0.5 * (s1 + math.copysign(math.sqrt(s1 * s1 + 4.0 * n * s2), s1))
    roots = sorted((q / n, -s2 / q), reverse=True)
    lls = [vms_loglik(xs, r) for r in roots]
    tie = abs(lls[0] - lls[1]) <= 1e-12 * max(1.0, abs(lls[0]))
    k = 0 if (tie or lls[0] > lls[1]) else 1
    return VarMeanSqParam(roots[k]), lls[k]


def pseudo_logpdf(p: PseudoParams, x, y):
    """``vms_logpdf(x; tau1) + vms_logpdf(y; tau2 + tau3 x)``, vectorized.

    Raises:
        SingularLinkError: ``|tau2 + tau3 x| < EPSILON_TAU`` at some ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = p.link(x)
    if np.any(np.abs(t) < EPSILON_TAU):
        raise SingularLinkError(f"|tau(x)| < {EPSILON_TAU:g} for some x")
    cond = -np.log(np.abs(t)) - _HALF_LOG_2PI - (y - t) ** 2 / (2.0 * t * t)
    return vms_logpdf(x, p.tau1) + cond


def pseudo_sample(p: PseudoParams, n: int, rng: RandomStream) -> Sample2D:
    """Draw ``n`` pairs; X draws with a near-singular link are redrawn.

    Raises:
        DegenerateLinkError: more than half of all X draws were rejected.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator()
    kept: list[np.ndarray] = []
    have = drawn = rejected = 0
    while have < n:
        batch = max(n - have, 16)
        x = gen.normal(p.tau1, abs(p.tau1), size=batch)
        ok = np.abs(p.link(x)) >= EPSILON_TAU
        drawn += batch
        rejected += int(batch - ok.sum())
        if rejected > _MAX_REJECT_FRACTION * drawn:
            raise DegenerateLinkError(f"{rejected} of {drawn} X draws hit a singular link")
        kept.append(x[ok])
        have += int(ok.sum())
    x = np.concatenate(kept)[:n]
    t = p.link(x)
    y = gen.normal(t, np.abs(t))
    return Sample2D(x, y)


def _link_nll(theta, x, y) -> float:
    t = theta[0] + theta[1] * x
    if np.any(np.abs(t) < EPSILON_TAU):
        return math.inf
    return float(np.sum(np.log(np.abs(t)) + (y - t) ** 2 / (2.0 * t * t))) + x.size * _HALF_LOG_2PI


def pseudo_fit(s: Sample2D, opt_cfg: OptimConfig = OptimConfig()) -> FitReport:
    """Maximum likelihood for the pseudo model.

    ``tau1`` comes from :func:`vms_mle` on the X sample.  ``(tau2, tau3)``
    minimize the conditional negative log-likelihood by Nelder-Mead, started
    from the least-squares line of ``y`` on ``x``; points with a singular link
    are rejected.
    """
    if s.n < 3:
        raise DegenerateSampleError(f"need at least 3 observations, got {s.n}")
    p1, ll1 = vms_mle(s.x)
    x, y = s.x, s.y
    design = np.column_stack([np.ones_like(x), x])
    start = np.linalg.lstsq(design, y, rcond=None)[0]
    if not math.isfinite(_link_nll(start, x, y)):
        # nudge the intercept until every link value clears the exclusion zone
        for shift in (1e-3, -1e-3, 1e-1, -1e-1, 1.0, -1.0, 10.0, -10.0):
            cand = start + np.array([shift * max(1.0, abs(start[0])), 0.0])
            if math.isfinite(_link_nll(cand, x, y)):
                start = cand
                break
        else:
            raise SingularLinkError("no starting link avoids the singular set")
    cfg = OptimConfig(
        param_tol=opt_cfg.param_tol,
        objective_tol=opt_cfg.objective_tol,
        max_iterations=opt_cfg.max_iterations,
        lower_bounds=None,
        boundary_epsilon=opt_cfg.boundary_epsilon,
    )
    theta, nll, ok, nit = minimize_bounded(lambda v: _link_nll(v, x, y), start, cfg)
    # one restart from the optimum guards against a collapsed simplex
    theta2, nll2, ok2, nit2 = minimize_bounded(lambda v: _link_nll(v, x, y), theta, cfg)
    if nll2 <= nll:
        theta, nll, ok = theta2, nll2, ok2
    nit += nit2
    notes = [] if ok else ["simplex search hit the iteration limit"]
    return FitReport(
        model_name="pseudo",
        estimates={"tau1": p1.tau, "tau2": float(theta[0]), "tau3": float(theta[1])},
        log_likelihood=ll1 - nll,
        n_params=3,
        converged=ok,
        iterations=nit,
        notes=notes,
    )
