"""Shared numerical kernel.

One-dimensional adaptive quadrature over the real line, bounded
derivative-free minimization, root finding for decreasing functions and
a reproducible random stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

__all__ = [
    "QuadConfig",
    "OptimConfig",
    "RandomStream",
    "QuadratureError",
    "TailTruncationError",
    "SearchError",
    "BracketError",
    "integrate_real_line",
    "minimize_bounded",
    "bisect_decreasing",
]


class QuadratureError(ArithmeticError):
    """Integrand returned a non-finite value or the error target was missed."""


class TailTruncationError(QuadratureError):
    """Integrand did not decay at the window endpoints after all doublings."""


class SearchError(ArithmeticError):
    """Objective became NaN or -inf during a minimization."""

    def __init__(self, message: str, point: np.ndarray):
        super().__init__(f"{message} at {np.array2string(point, precision=10)}")
        self.point = point


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances for :func:`integrate_real_line`.

    ``max_subdivisions`` bounds how many times the truncation window may be
    doubled; ``max_intervals`` bounds the adaptive partition of the window.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    max_subdivisions: int = 8
    truncation_radius_multiplier: float = 8.0
    max_intervals: int = 4000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.truncation_radius_multiplier < 6:
            raise ValueError("truncation_radius_multiplier must be >= 6")


@dataclass(frozen=True)
class OptimConfig:
    """Settings for :func:`minimize_bounded`.

    ``lower_bounds`` may be ``None`` (unbounded) or a sequence whose entries
    are finite bounds or ``-inf``.
    """

    param_tol: float = 1e-7
    objective_tol: float = 1e-9
    max_iterations: int = 4000
    lower_bounds: Optional[Sequence[float]] = None
    boundary_epsilon: float = 1e-8

    def __post_init__(self):
        if not (self.param_tol > 0 and self.objective_tol > 0):
            raise ValueError("optimizer tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (0 < self.boundary_epsilon < 1e-3):
            raise ValueError("boundary_epsilon must lie in (0, 1e-3)")


@dataclass(frozen=True)
class RandomStream:
    """Seeded, splittable random source.

    Every ``(seed, stream_index)`` pair maps to an independent Philox
    counter stream, so parallel workers just take distinct indices.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are every other Kronrod node (odd indices in _XGK order).
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[9, 11, 13]] = _WG[2::-1]
_GAUSS_W[7] = _WG[3]
_ROUNDOFF = 50 * np.finfo(float).eps


def _eval(f: Callable, t: np.ndarray) -> np.ndarray:
    v = np.asarray(f(t), dtype=float)
    if v.shape != t.shape:
        v = np.broadcast_to(v, t.shape)
    if not np.all(np.isfinite(v)):
        bad = t[~np.isfinite(v)]
        raise QuadratureError(f"non-finite integrand value at t={bad.flat[0]!r}")
    return v


def _gk15(f: Callable, a: np.ndarray, b: np.ndarray):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    t = mid[:, None] + half[:, None] * _NODES[None, :]
    v = _eval(f, t)
    k = half * (v @ _KRONROD_W)
    g = half * (v @ _GAUSS_W)
    mag = np.abs(half) * (np.abs(v) @ _KRONROD_W)
    return k, np.abs(k - g), mag


def _adaptive(f, lo, hi, breaks, cfg: QuadConfig) -> float:
    edges = np.unique(np.concatenate([np.linspace(lo, hi, 9), [p for p in breaks if lo < p < hi]]))
    a, b = edges[:-1], edges[1:]
    est, err, mag = _gk15(f, a, b)
    width = hi - lo
    while True:
        total = est.sum()
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if err.sum() <= tol:
            return float(total)
        # Refine every interval whose error density exceeds the uniform share.
        split = err > tol * (b - a) / width
        if not split.any():
            split = err >= err.max()
        split &= err > _ROUNDOFF * mag
        if not split.any():
            return float(total)
        if a.size + split.sum() > cfg.max_intervals:
            raise QuadratureError(
                f"error target {tol:.3g} not met within {cfg.max_intervals} intervals "
                f"(estimated error {err.sum():.3g})"
            )
        sa, sb = a[split], b[split]
        sm = 0.5 * (sa + sb)
        na = np.concatenate([sa, sm])
        nb = np.concatenate([sm, sb])
        ne, nr, nm = _gk15(f, na, nb)
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        est = np.concatenate([est[keep], ne])
        err = np.concatenate([err[keep], nr])
        mag = np.concatenate([mag[keep], nm])


def integrate_real_line(
    f: Callable[[np.ndarray], np.ndarray],
    center: float,
    scale: float,
    cfg: QuadConfig = QuadConfig(),
    points: Sequence[float] = (),
) -> float:
    """Integrate a decaying ``f`` over the whole real line.

    The integral is taken over ``center +/- m * scale`` where ``m`` starts at
    ``cfg.truncation_radius_multiplier``.  Before integrating, both endpoints
    must satisfy ``|f| < abs_tol * 1e-3``; otherwise the half-width is doubled,
    at most ``cfg.max_subdivisions`` times.  Inside the window an adaptive
    Gauss-Kronrod (7, 15) rule refines until the summed error estimate is
    below ``max(abs_tol, rel_tol * |result|)``.

    ``f`` is called with numpy arrays and must be vectorized.  ``points`` are
    optional interior breakpoints (e.g. a known narrow peak).

    Raises:
        QuadratureError: ``f`` produced a non-finite value, or the adaptive
            partition hit ``cfg.max_intervals``.
        TailTruncationError: the integrand never decayed at the endpoints.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    radius = cfg.truncation_radius_multiplier * scale
    floor = cfg.abs_tol * 1e-3
    for _ in range(cfg.max_subdivisions + 1):
        ends = np.array([center - radius, center + radius])
        if np.all(np.abs(_eval(f, ends)) < floor):
            return _adaptive(f, ends[0], ends[1], points, cfg)
        radius *= 2.0
    raise TailTruncationError(
        f"integrand not below {floor:.3g} at center +/- {radius / 2:.6g} "
        f"after {cfg.max_subdivisions} doublings"
    )


def minimize_bounded(
    objective: Callable[[np.ndarray], float],
    init: Sequence[float],
    cfg: OptimConfig = OptimConfig(),
) -> tuple[np.ndarray, float, bool, int]:
    """Nelder-Mead minimization subject to per-coordinate lower bounds.

    Trial points outside the feasible box are projected onto it, so the
    returned point may sit exactly on a bound.  ``+inf`` objective values are
    treated as rejected points; NaN or ``-inf`` abort the search.

    Returns:
        ``(argmin, min_value, converged, iterations)``.  ``converged`` is
        False when ``cfg.max_iterations`` was reached; the best point found
        is returned in either case.
    """
    x0 = np.asarray(init, dtype=float).copy()
    if cfg.lower_bounds is None:
        lower = np.full(x0.size, -np.inf)
    else:
        lower = np.asarray(cfg.lower_bounds, dtype=float)
        if lower.shape != x0.shape:
            raise ValueError("lower_bounds must match init in length")
    # Strictly interior start; finite bounds of zero stay reachable.
    x0 = np.where(np.isfinite(lower), np.maximum(x0, lower + cfg.boundary_epsilon), x0)

    def wrapped(v: np.ndarray) -> float:
        v = np.maximum(v, lower)
        val = float(objective(v))
        if np.isnan(val) or val == -np.inf:
            raise SearchError("objective not finite", v.copy())
        return val

    f0 = wrapped(x0)
    if not np.isfinite(f0):
        raise SearchError("objective not finite at the initial point", x0)

    bounds = None
    if np.isfinite(lower).any():
        bounds = optimize.Bounds(lower, np.full(x0.size, np.inf))
    res = optimize.minimize(
        wrapped,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "xatol": cfg.param_tol,
            "fatol": cfg.objective_tol * max(1.0, abs(f0)),
            "maxiter": cfg.max_iterations,
            "maxfev": 4 * cfg.max_iterations,
            "adaptive": x0.size > 3,
        },
    )
    x = np.maximum(res.x, lower)
    return x, wrapped(x), bool(res.success), int(res.nit)


def bisect_decreasing(
    g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12
) -> float:
    """Root of a strictly decreasing ``g`` bracketed by ``g(lo) > 0 > g(hi)``.

    The root is refined with Brent's method until the bracket is narrower
    than ``tol`` (relative to the root's magnitude when it exceeds 1).

    Raises:
        BracketError: the sign pattern at ``lo``/``hi`` is wrong.
    """
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise BracketError(f"need g(lo) > 0 > g(hi); got g({lo})={glo}, g({hi})={ghi}")
    return float(optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))
