"""Estimation and model comparison.

Four competitors are fitted to paired data:

* Model I   -- equi-dispersed normal conditionals, full likelihood
  (:func:`fit_mle`) or pseudo-likelihood (:func:`fit_pmle`);
* Model II  -- the ``gamma = 0`` submodel, two independent N(tau, tau)
  margins (:func:`fit_independent_equidisp`);
* Model III -- classical bivariate normal;
* Model IV  -- bivariate normal with independent margins.

Both log-likelihood and pseudo-log-likelihood of Model I are concave in
``(alpha, beta, gamma)``: the first because the model is an exponential
family in these natural parameters, the second because each conditional
term is a concave function of an affine combination of them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equidisp_model import (
    EquiDispParams,
    Sample2D,
    log_normalizer,
    model_moments,
    normalize,
)
from .numerics import (
    OptimConfig,
    QuadConfig,
    QuadratureError,
    bisect_decreasing,
    minimize_bounded,
)
from .univariate_equidisp import DegenerateSampleError, ueq_loglik, ueq_mle

__all__ = [
    "FitReport",
    "FIT_QUAD",
    "MLE_OPTIM",
    "SufficientStats",
    "aic",
    "log_pseudo_likelihood",
    "pseudo_score",
    "pseudo_hessian",
    "equidisp_loglik",
    "fit_pmle",
    "fit_mle",
    "fit_independent_equidisp",
    "fit_bivariate_normal",
    "compare_models",
]

log = logging.getLogger(__name__)

FIT_QUAD = QuadConfig(abs_tol=1e-9, rel_tol=1e-13)
MLE_OPTIM = OptimConfig(param_tol=1e-7, objective_tol=1e-9, max_iterations=4000)

_BRACKET_LO, _BRACKET_HI, _BRACKET_MAX = 1e-8, 1e4, 1e12
_PL_TOL = 1e-8
_PL_MAX_CYCLES = 500

_LABELS = {
    "equidisp-mle": "Model I",
    "equidisp-pmle": "Model I (pseudo-likelihood)",
    "equidisp-indep": "Model II",
    "bvn": "Model III",
    "bvn-indep": "Model IV",
    "pseudo": "Pseudo model",
}


def aic(log_likelihood: float, n_params: int) -> float:
    """Akaike information criterion, ``2k - 2 loglik`` (lower is better)."""
    return 2.0 * n_params - 2.0 * log_likelihood


@dataclass
class FitReport:
    """Outcome of fitting one model.

    ``aic`` is derived from ``log_likelihood`` and ``n_params`` and is kept
    in sync on construction.
    """

    model_name: str
    estimates: dict[str, float]
    log_likelihood: float
    n_params: int
    converged: bool = True
    iterations: int = 0
    gradient_norm: float = 0.0
    notes: list[str] = field(default_factory=list)
    label: str = ""
    aic: float = field(init=False)

    def __post_init__(self):
        self.aic = aic(self.log_likelihood, self.n_params)
        if not self.label:
            self.label = _LABELS.get(self.model_name, "")

    def params(self) -> EquiDispParams:
        e = self.estimates
        return EquiDispParams(e["alpha"], e["beta"], e.get("gamma", 0.0))

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "label": self.label,
            "estimates": {k: float(v) for k, v in self.estimates.items()},
            "loglik": _json_float(self.log_likelihood),
            "aic": _json_float(self.aic),
            "n_params": self.n_params,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": _json_float(self.gradient_norm),
            "notes": "; ".join(self.notes),
        }


def _json_float(v: float):
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class SufficientStats:
    """Everything the Model I likelihood needs from a sample."""

    n: int
    sx: float
    sy: float
    sx2: float
    sy2: float
    sx2y2: float

    @classmethod
    def of(cls, s: Sample2D) -> "SufficientStats":
        x2, y2 = s.x**2, s.y**2
        return cls(s.n, float(s.x.sum()), float(s.y.sum()), float(x2.sum()),
                   float(y2.sum()), float((x2 * y2).sum()))


def _require(s: Sample2D, min_n: int = 3):
    if s.n < min_n:
        raise DegenerateSampleError(f"need at least {min_n} observations, got {s.n}")


# ---------------------------------------------------------------------------
# Pseudo-likelihood
# ---------------------------------------------------------------------------


def log_pseudo_likelihood(theta, s: Sample2D) -> float:
    """Sum over observations of ``log f(x|y) + log f(y|x)``.

    Each conditional is N(1/(2u), 1/(2u)) with ``u = gamma y^2 + alpha`` (resp.
    ``gamma x^2 + beta``), so ``log f(x|y) = -log(pi)/2 + log(u)/2 - u x^2 + x
    - 1/(4u)``.
    """
    a, b, g = (float(t) for t in theta)
    x2, y2 = s.x**2, s.y**2
    u = g * y2 + a
    v = g * x2 + b
    if np.any(u <= 0) or np.any(v <= 0):
        return -np.inf
    per = (0.5 * np.log(u) - u * x2 - 0.25 / u) + (0.5 * np.log(v) - v * y2 - 0.25 / v)
    return float(per.sum() + s.x.sum() + s.y.sum() - s.n * np.log(np.pi))


def _lhs(w):
    # (1/2)/w + 1/(4 w^2): the common building block of the score equations
    return 0.5 / w + 0.25 / (w * w)


def pseudo_score(theta, s: Sample2D) -> np.ndarray:
    """Gradient of :func:`log_pseudo_likelihood`.

    Component ``k`` is the left side minus the right side of the ``k``-th
    pseudo-likelihood equation.
    """
    a, b, g = (float(t) for t in theta)
    x2, y2 = s.x**2, s.y**2
    lu = _lhs(g * y2 + a)
    lv = _lhs(g * x2 + b)
    return np.array([
        lu.sum() - x2.sum(),
        lv.sum() - y2.sum(),
        (y2 * lu).sum() + (x2 * lv).sum() - 2.0 * (x2 * y2).sum(),
    ])


def pseudo_hessian(theta, s: Sample2D) -> np.ndarray:
    a, b, g = (float(t) for t in theta)
    x2, y2 = s.x**2, s.y**2
    u = g * y2 + a
    v = g * x2 + b
    wu = 0.5 / u**2 + 0.5 / u**3
    wv = 0.5 / v**2 + 0.5 / v**3
    h = np.zeros((3, 3))
    h[0, 0] = -wu.sum()
    h[1, 1] = -wv.sum()
    h[0, 2] = h[2, 0] = -(y2 * wu).sum()
    h[1, 2] = h[2, 1] = -(x2 * wv).sum()
    h[2, 2] = -(y2 * y2 * wu).sum() - (x2 * x2 * wv).sum()
    return h


def _root_positive(g, lo=_BRACKET_LO, hi=_BRACKET_HI):
    """Root of decreasing ``g`` on ``(0, inf)``; ``None`` if ``g(lo) <= 0``."""
    if g(lo) <= 0:
        return None
    while g(hi) >= 0:
        if hi >= _BRACKET_MAX:
            return math.inf
        hi *= 10.0
    return bisect_decreasing(g, lo, hi, tol=1e-15)


def _pl_residual(theta, score):
    r = score.copy()
    if theta[2] == 0.0:
        # boundary: only an upward pull on gamma counts as a violation
        r[2] = max(r[2], 0.0)
    return float(np.max(np.abs(r)))


def fit_pmle(s: Sample2D, tol: float = _PL_TOL, max_cycles: int = _PL_MAX_CYCLES) -> FitReport:
    """Maximize the pseudo-likelihood by cyclic coordinate root finding.

    For fixed gamma the alpha equation is decreasing in alpha and the beta
    equation in beta; for fixed (alpha, beta) the gamma equation is decreasing
    in gamma.  Each cycle solves the three equations in turn by bracketing and
    bisection, then tries a safeguarded Newton step on the full system to
    speed up the final approach.  When the gamma equation has no positive
    root, gamma is set to 0 (the independence boundary).

    Stops when the largest score component is below ``tol`` (or at rounding
    level for the data's scale) or after ``max_cycles`` cycles.
    """
    _require(s)
    if not np.any(s.x) or not np.any(s.y):
        raise DegenerateSampleError("all x or all y observations are zero")
    x2, y2 = s.x**2, s.y**2
    sx2, sy2, sx2y2 = x2.sum(), y2.sum(), (x2 * y2).sum()
    # at gamma = 0 the alpha equation is the univariate one: alpha = 1/(2 tau)
    a, b, g = 0.5 / ueq_mle(s.x), 0.5 / ueq_mle(s.y), 0.0
    notes: list[str] = []
    # rounding floor for the score, relative to the size of its terms
    floor = 1e3 * np.finfo(float).eps * max(sx2, sy2, 2 * sx2y2, s.n)
    converged = False
    boundary_hits = 0
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        ra = _root_positive(lambda t: _lhs(g * y2 + t).sum() - sx2)
        rb = _root_positive(lambda t: _lhs(g * x2 + t).sum() - sy2)
        if ra is None or rb is None or math.isinf(ra) or math.isinf(rb):
            notes.append("alpha/beta equation has no root in (1e-8, 1e12)")
            a = min(max(ra or _BRACKET_LO, _BRACKET_LO), _BRACKET_MAX)
            b = min(max(rb or _BRACKET_LO, _BRACKET_LO), _BRACKET_MAX)
            break
        a, b = ra, rb

        def g_eq(t):
            return (y2 * _lhs(t * y2 + a)).sum() + (x2 * _lhs(t * x2 + b)).sum() - 2 * sx2y2

        if g_eq(0.0) <= 0:
            g = 0.0
            boundary_hits += 1
        else:
            rg = _root_positive(g_eq, lo=0.0)
            if math.isinf(rg):
                notes.append("gamma equation has no root below 1e12")
                break
            g = rg

        theta = _newton_polish(np.array([a, b, g]), s)
        a, b, g = theta
        res = _pl_residual(theta, pseudo_score(theta, s))
        if res < tol or res < floor:
            converged = True
            break

    theta = np.array([a, b, g])
    score = pseudo_score(theta, s)
    if g == 0.0:
        notes.append("boundary solution gamma = 0")
    notes.append("log_likelihood is the pseudo-log-likelihood")
    if not converged and cycles >= max_cycles:
        notes.append(f"no convergence after {max_cycles} cycles")
    return FitReport(
        model_name="equidisp-pmle",
        estimates={"alpha": float(a), "beta": float(b), "gamma": float(g)},
        log_likelihood=log_pseudo_likelihood(theta, s),
        n_params=3,
        converged=converged,
        iterations=cycles,
        gradient_norm=_pl_residual(theta, score),
        notes=notes,
    )


def _newton_polish(theta: np.ndarray, s: Sample2D, steps: int = 8) -> np.ndarray:
    """A few damped Newton steps on the pseudo-likelihood, kept feasible."""
    f0 = log_pseudo_likelihood(theta, s)
    for _ in range(steps):
        grad = pseudo_score(theta, s)
        free = [0, 1, 2] if (theta[2] > 0 or grad[2] > 0) else [0, 1]
        h = pseudo_hessian(theta, s)[np.ix_(free, free)]
        try:
            step = np.zeros(3)
            step[free] = np.linalg.solve(h, -grad[free])
        except np.linalg.LinAlgError:
            break
        t = 1.0
        for _ in range(40):
            cand = theta + t * step
            cand[2] = max(cand[2], 0.0)
            if cand[0] > 0 and cand[1] > 0:
                fc = log_pseudo_likelihood(cand, s)
                if fc >= f0:
                    break
            t *= 0.5
        else:
            break
        if np.all(cand == theta):
            break
        theta, f0 = cand, fc
    return theta


# ---------------------------------------------------------------------------
# Maximum likelihood
# ---------------------------------------------------------------------------


def equidisp_loglik(p: EquiDispParams, st: SufficientStats, quad_cfg: QuadConfig = FIT_QUAD) -> float:
    """Model I log-likelihood; the cross term is ``gamma * sum(x_i^2 y_i^2)``."""
    return (-st.n * log_normalizer(p, quad_cfg) - p.alpha * st.sx2 - p.beta * st.sy2
            - p.gamma * st.sx2y2 + st.sx + st.sy)


def _mle_gradient(p: EquiDispParams, st: SufficientStats, quad_cfg: QuadConfig) -> np.ndarray:
    # d loglik / d theta = n E[T] - sum(T) for T = (X^2, Y^2, X^2 Y^2)
    mo = model_moments(normalize(p, quad_cfg))
    ex2 = mo.var_x + mo.ex**2
    ey2 = mo.var_y + mo.ey**2
    return np.array([st.n * ex2 - st.sx2, st.n * ey2 - st.sy2, st.n * mo.ex2y2 - st.sx2y2])


def fit_mle(
    s: Sample2D,
    init: Optional[EquiDispParams] = None,
    quad_cfg: QuadConfig = FIT_QUAD,
    opt_cfg: OptimConfig = MLE_OPTIM,
) -> FitReport:
    """Maximum likelihood for Model I with the normalizer recomputed per step.

    The ``gamma = 0`` boundary candidate is the Model II fit.  There
    ``d loglik / d gamma = n E[X^2] E[Y^2] - sum(x^2 y^2)`` in closed form; if
    it is not positive, concavity makes the boundary point the global
    maximum and no search is needed.  Otherwise Nelder-Mead runs from
    ``init`` (default: the pseudo-likelihood estimate) with ``alpha, beta >=
    boundary_epsilon`` and ``gamma >= 0``.
    """
    _require(s)
    st = SufficientStats.of(s)
    notes: list[str] = []
    tx, ty = ueq_mle(s.x), ueq_mle(s.y)
    edge = EquiDispParams(0.5 / tx, 0.5 / ty, 0.0)
    dgamma = st.n * (tx + tx * tx) * (ty + ty * ty) - st.sx2y2
    if dgamma <= 0:
        notes.append("boundary solution gamma = 0 (score for gamma <= 0 at the independence fit)")
        return FitReport(
            model_name="equidisp-mle",
            estimates={"alpha": edge.alpha, "beta": edge.beta, "gamma": 0.0},
            log_likelihood=equidisp_loglik(edge, st, quad_cfg),
            n_params=3,
            converged=True,
            iterations=0,
            gradient_norm=0.0,
            notes=notes,
        )

    if init is None:
        pm = fit_pmle(s)
        start = np.array([pm.estimates["alpha"], pm.estimates["beta"], pm.estimates["gamma"]])
        if not pm.converged:
            notes.append("pseudo-likelihood start did not converge")
    else:
        start = np.array(init.as_tuple())
    eps = opt_cfg.boundary_epsilon
    cfg = OptimConfig(
        param_tol=opt_cfg.param_tol,
        objective_tol=opt_cfg.objective_tol,
        max_iterations=opt_cfg.max_iterations,
        lower_bounds=(eps, eps, 0.0),
        boundary_epsilon=eps,
    )
    rejected = 0

    def objective(v):
        nonlocal rejected
        try:
            return -equidisp_loglik(EquiDispParams(*v), st, quad_cfg)
        except (QuadratureError, ValueError):
            rejected += 1
            return math.inf

    x, fval, ok, nit = minimize_bounded(objective, start, cfg)
    best = EquiDispParams(*x)
    ll = -fval
    ll_edge = equidisp_loglik(edge, st, quad_cfg)
    if ll_edge > ll:
        best, ll = edge, ll_edge
        notes.append("independence fit beat the simplex optimum")
    if rejected:
        notes.append(f"{rejected} parameter points rejected after quadrature failure")
    if not ok:
        notes.append("simplex search hit the iteration limit")
    grad = _mle_gradient(best, st, quad_cfg)
    if best.gamma == 0.0:
        grad[2] = max(grad[2], 0.0)
    return FitReport(
        model_name="equidisp-mle",
        estimates={"alpha": best.alpha, "beta": best.beta, "gamma": best.gamma},
        log_likelihood=ll,
        n_params=3,
        converged=ok,
        iterations=nit,
        gradient_norm=float(np.max(np.abs(grad))),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Competitors
# ---------------------------------------------------------------------------


def fit_independent_equidisp(s: Sample2D) -> FitReport:
    """Model II: independent N(tau_x, tau_x) and N(tau_y, tau_y) margins.

    Reported on the Model I scale, ``alpha = 1/(2 tau_x)`` and
    ``beta = 1/(2 tau_y)``.
    """
    tx, ty = ueq_mle(s.x), ueq_mle(s.y)
    ll = ueq_loglik(s.x, tx) + ueq_loglik(s.y, ty)
    return FitReport(
        model_name="equidisp-indep",
        estimates={"alpha": 0.5 / tx, "beta": 0.5 / ty, "tau_x": tx, "tau_y": ty},
        log_likelihood=ll,
        n_params=2,
    )


def fit_bivariate_normal(s: Sample2D, independent: bool = False) -> FitReport:
    """Closed-form Gaussian MLE (divisor ``n``), with or without covariance."""
    _require(s, 2)
    n = s.n
    mx, my = s.x.mean(), s.y.mean()
    dx, dy = s.x - mx, s.y - my
    vx, vy = float(np.mean(dx * dx)), float(np.mean(dy * dy))
    if vx <= 0 or vy <= 0:
        raise DegenerateSampleError("a margin is constant")
    est = {"mu1": float(mx), "mu2": float(my), "var1": vx, "var2": vy}
    if independent:
        logdet = math.log(vx) + math.log(vy)
        k = 4
    else:
        c = float(np.mean(dx * dy))
        det = vx * vy - c * c
        if det <= 0:
            raise DegenerateSampleError("sample covariance matrix is singular")
        est["cov"] = c
        logdet = math.log(det)
        k = 5
    ll = -0.5 * n * (2.0 * math.log(2.0 * math.pi) + logdet + 2.0)
    return FitReport(
        model_name="bvn-indep" if independent else "bvn",
        estimates=est,
        log_likelihood=ll,
        n_params=k,
    )


def compare_models(
    s: Sample2D,
    quad_cfg: QuadConfig = FIT_QUAD,
    opt_cfg: OptimConfig = MLE_OPTIM,
) -> list[FitReport]:
    """Fit Models I-IV and return them sorted by AIC (best first).

    A model that fails to fit is reported with ``converged=False``, infinite
    AIC and the error in ``notes``; the others are unaffected.
    """
    fitters = {
        "equidisp-mle": lambda: fit_mle(s, quad_cfg=quad_cfg, opt_cfg=opt_cfg),
        "equidisp-indep": lambda: fit_independent_equidisp(s),
        "bvn": lambda: fit_bivariate_normal(s, independent=False),
        "bvn-indep": lambda: fit_bivariate_normal(s, independent=True),
    }
    n_params = {"equidisp-mle": 3, "equidisp-indep": 2, "bvn": 5, "bvn-indep": 4}
    reports = []
    for name, fit in fitters.items():
        try:
            rep = fit()
        except (ArithmeticError, ValueError) as exc:
            log.warning("%s fit failed: %s", name, exc)
            rep = FitReport(name, {}, -math.inf, n_params[name], converged=False,
                            notes=[f"fit failed: {exc}"])
        reports.append(rep)
    return sorted(reports, key=lambda r: r.aic)
