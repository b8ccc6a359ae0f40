"""Bivariate distribution with equi-dispersed normal conditionals.

The density is

    f(x, y) = kappa * exp(-(alpha x^2 + beta y^2 + gamma x^2 y^2 - x - y))

with ``alpha > 0``, ``beta > 0`` and ``gamma >= 0``.  Given ``X = x`` the
variable ``Y`` is N(m, m) with ``m = 1 / (2 (gamma x^2 + beta))`` and
symmetrically for ``X`` given ``Y``.  Integrating ``y`` out analytically gives
the X-marginal

    f_X(x) = kappa * sqrt(pi / s) * exp(-alpha x^2 + x + 1 / (4 s)),
    s = gamma x^2 + beta,

so the normalizing constant, marginal moments and the marginal sampler all
reduce to one-dimensional work.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .numerics import QuadConfig, RandomStream, integrate_real_line

__all__ = [
    "EquiDispParams",
    "Sample2D",
    "NormalizedModel",
    "GridSpec",
    "DensityGrid",
    "Moments",
    "Margin",
    "SamplerStallError",
    "GridSizeError",
    "DEFAULT_QUAD",
    "log_unnorm_density",
    "log_normalizer",
    "log_normalizer_independent",
    "normalize",
    "logpdf",
    "conditional_law",
    "marginal_logpdf",
    "sample",
    "density_grid",
    "local_maxima",
    "model_moments",
]

DEFAULT_QUAD = QuadConfig(abs_tol=1e-10, rel_tol=1e-12)
MAX_GRID_POINTS = 10**7
_STALL_WINDOW = 10**6
_STALL_RATE = 1e-4


class SamplerStallError(RuntimeError):
    pass


class GridSizeError(ValueError):
    pass


class Margin(enum.Enum):
    X = "X"
    Y = "Y"


@dataclass(frozen=True)
class EquiDispParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if not (self.gamma >= 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    def swapped(self) -> "EquiDispParams":
        """Parameters of ``(Y, X)``."""
        return EquiDispParams(self.beta, self.alpha, self.gamma)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class Sample2D:
    """Paired observations ``(x[i], y[i])``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("observations must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs) -> "Sample2D":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def n(self) -> int:
        return int(self.x.size)

    def swapped(self) -> "Sample2D":
        return Sample2D(self.y, self.x)

    def __len__(self):
        return self.n


def log_unnorm_density(p: EquiDispParams, x, y):
    """``-(alpha x^2 + beta y^2 + gamma x^2 y^2 - x - y)``, vectorized."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x2, y2 = x * x, y * y
    return -(p.alpha * x2 + p.beta * y2 + p.gamma * x2 * y2 - x - y)


def _log_marginal_kernel(a: float, b: float, g: float, t):
    # log of the y-integral of exp(-(a t^2 + b y^2 + g t^2 y^2 - t - y))
    s = g * t * t + b
    return 0.5 * np.log(np.pi / s) - a * t * t + t + 0.25 / s


def _offset_kernel(a: float, b: float, g: float, d):
    # _log_marginal_kernel(t) - 1/(4a) written in d = t - 1/(2a), which keeps
    # full precision when 1/(2a) is large
    t = d + 0.5 / a
    s = g * t * t + b
    return 0.5 * np.log(np.pi / s) + 0.25 / s - a * d * d


def log_normalizer_independent(alpha: float, beta: float) -> float:
    """``log(1/kappa)`` at ``gamma = 0`` in closed form."""
    return np.log(np.pi) - 0.5 * np.log(alpha * beta) + 0.25 / alpha + 0.25 / beta


def _integrate_kernel(a, b, g, weight, cfg: QuadConfig):
    """Return ``(log_ref, I)`` such that ``log_ref + log(I)`` is the log of
    ``int weight(t) exp(kernel(t)) dt``.  ``I`` is signed for signed weights."""
    center = 0.5 / a
    scale = np.sqrt(0.5 / a)
    probe = np.concatenate([np.linspace(-8 * scale, 8 * scale, 257), [-center, 0.0]])
    shift = float(np.max(_offset_kernel(a, b, g, probe)))

    def f(d):
        return weight(d + center) * np.exp(_offset_kernel(a, b, g, d) - shift)

    points = [-center, 0.0]
    if g > 0:
        # sqrt(pi/s) exp(1/(4s)) peaks at t = 0; its width is ~sqrt(b/g) when
        # b is large and ~2b/sqrt(g) when b is small, possibly far narrower
        # than the Gaussian window.
        w = sorted((np.sqrt(b / g), 2 * b / np.sqrt(g)))
        k = int(np.ceil(np.log(w[1] / w[0]) / np.log(4.0))) + 2
        widths = w[0] * 4.0 ** np.arange(-1, k)
        points += [sgn * v - center for v in widths for sgn in (-1, 1)]
    # The exponent carries terms up to 1/(4b) in size, which bounds the
    # relative accuracy of any evaluation of f.
    floor = 64 * np.finfo(float).eps * (0.25 / b + abs(shift) + 40.0)
    if floor > cfg.rel_tol:
        cfg = replace(cfg, rel_tol=floor)
    val = integrate_real_line(f, 0.0, scale, cfg, points=points)
    return shift + 0.25 / a, val


def _one(t):
    return np.ones_like(t)


def log_normalizer(p: EquiDispParams, cfg: QuadConfig = DEFAULT_QUAD,
                   margin: Margin = Margin.X) -> float:
    """``log(1/kappa)`` by quadrature over one margin.

    ``margin=Margin.Y`` integrates ``x`` out first instead; both routes must
    agree, which makes a useful self-check.
    """
    a, b = (p.alpha, p.beta) if Margin(margin) is Margin.X else (p.beta, p.alpha)
    log_ref, val = _integrate_kernel(a, b, p.gamma, _one, cfg)
    return log_ref + float(np.log(val))


@dataclass(frozen=True)
class NormalizedModel:
    params: EquiDispParams
    log_kappa: float
    quad_cfg: QuadConfig = field(default=DEFAULT_QUAD, repr=False)


def normalize(p: EquiDispParams, cfg: QuadConfig = DEFAULT_QUAD) -> NormalizedModel:
    """Attach ``log kappa`` (so that ``a00 = -log kappa``) to ``p``."""
    return NormalizedModel(p, -log_normalizer(p, cfg), cfg)


def logpdf(m: NormalizedModel, x, y):
    return m.log_kappa + log_unnorm_density(m.params, x, y)


def conditional_law(p: EquiDispParams, axis, t):
    """Mean and variance (equal) of X | Y=t or Y | X=t.

    ``axis`` is ``"XgivenY"`` or ``"YgivenX"`` (or the :class:`Axis` enum from
    :mod:`equidisp.normal_conditionals`).
    """
    axis = getattr(axis, "value", axis)
    t = np.asarray(t, dtype=float)
    if axis == "XgivenY":
        m = 1.0 / (2.0 * (p.gamma * t * t + p.alpha))
    elif axis == "YgivenX":
        m = 1.0 / (2.0 * (p.gamma * t * t + p.beta))
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return m, m


def marginal_logpdf(m: NormalizedModel, margin, t):
    """Log density of the X or Y marginal at ``t``."""
    p = m.params
    if Margin(margin) is Margin.X:
        return m.log_kappa + _log_marginal_kernel(p.alpha, p.beta, p.gamma, np.asarray(t, float))
    return m.log_kappa + _log_marginal_kernel(p.beta, p.alpha, p.gamma, np.asarray(t, float))


def _log_accept(p: EquiDispParams, x):
    # target / (M * envelope) for the N(1/(2 alpha), 1/(2 alpha)) proposal;
    # sqrt(pi/s) exp(1/(4s)) is largest at s = beta, i.e. x = 0.
    s = p.gamma * x * x + p.beta
    return 0.5 * np.log(p.beta / s) + 0.25 / s - 0.25 / p.beta


def sample(m: NormalizedModel, n: int, rng: RandomStream) -> Sample2D:
    """Draw ``n`` pairs: X by rejection from its marginal, then Y | X.

    The proposal for X is N(1/(2 alpha), 1/(2 alpha)); its overall acceptance
    rate equals ``kappa(alpha, beta, 0) / kappa(alpha, beta, gamma)``.

    Raises:
        SamplerStallError: fewer than 1 in 10^4 proposals accepted over the
            first 10^6.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = m.params
    gen = rng.generator()
    rate = float(np.exp(log_normalizer_independent(p.alpha, p.beta) + m.log_kappa))
    rate = min(max(rate, _STALL_RATE), 1.0)
    mu = 0.5 / p.alpha
    sd = np.sqrt(mu)
    chunks, got, proposed = [], 0, 0
    while got < n:
        batch = int(min(max(1.2 * (n - got) / rate + 64, 1024), 2**22))
        prop = gen.normal(mu, sd, size=batch)
        keep = prop[np.log(gen.random(batch)) < _log_accept(p, prop)]
        proposed += batch
        chunks.append(keep)
        got += keep.size
        if proposed >= _STALL_WINDOW and got < _STALL_RATE * proposed:
            raise SamplerStallError(
                f"acceptance rate {got / proposed:.2e} over {proposed} proposals"
            )
    x = np.concatenate(chunks)[:n]
    my, _ = conditional_law(p, "YgivenX", x)
    y = gen.normal(my, np.sqrt(my))
    return Sample2D(x, y)


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -10.0
    x_max: float = 15.0
    y_min: float = -10.0
    y_max: float = 15.0
    nx: int = 200
    ny: int = 200

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid bounds must satisfy min < max")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid counts must be positive")
        if self.nx * self.ny > MAX_GRID_POINTS:
            raise GridSizeError(f"grid has {self.nx * self.ny} points; limit is {MAX_GRID_POINTS}")


class DensityGrid(NamedTuple):
    xs: np.ndarray
    ys: np.ndarray
    density: np.ndarray  # shape (nx, ny), density[i, j] at (xs[i], ys[j])

    def rows(self) -> Iterator[tuple[float, float, float]]:
        """Row-major ``(x, y, density)`` triples, x varying slowest."""
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                yield float(x), float(y), float(self.density[i, j])


def density_grid(m: NormalizedModel, g: GridSpec) -> DensityGrid:
    xs = np.linspace(g.x_min, g.x_max, g.nx)
    ys = np.linspace(g.y_min, g.y_max, g.ny)
    dens = np.exp(logpdf(m, xs[:, None], ys[None, :]))
    return DensityGrid(xs, ys, dens)


def local_maxima(grid: DensityGrid, rel_floor: float = 1e-8) -> list[tuple[float, float, float]]:
    """Interior grid points strictly above all eight neighbours.

    Points below ``rel_floor * max(density)`` are ignored so underflowed
    tails cannot register as modes.
    """
    d = grid.density
    if d.shape[0] < 3 or d.shape[1] < 3:
        return []
    core = d[1:-1, 1:-1]
    is_max = core > rel_floor * d.max()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = d[1 + di:d.shape[0] - 1 + di, 1 + dj:d.shape[1] - 1 + dj]
            is_max &= core > nb
    ii, jj = np.nonzero(is_max)
    out = [(float(grid.xs[i + 1]), float(grid.ys[j + 1]), float(core[i, j])) for i, j in zip(ii, jj)]
    return sorted(out, key=lambda r: -r[2])


class Moments(NamedTuple):
    ex: float
    ey: float
    var_x: float
    var_y: float
    cov: float
    ex2y2: float


def _expect_x(m: NormalizedModel, h) -> float:
    # E[h(X)] under the X-marginal
    p = m.params
    log_ref, val = _integrate_kernel(p.alpha, p.beta, p.gamma, h, m.quad_cfg)
    return float(val * np.exp(log_ref + m.log_kappa))


def model_moments(m: NormalizedModel) -> Moments:
    """Means, variances and covariance of ``(X, Y)``, plus ``E[X^2 Y^2]``.

    Everything is an expectation over the X-marginal, using
    ``E[Y | X] = E[Y^2 | X] - E[Y | X]^2 = c(X)`` with
    ``c(x) = 1 / (2 (gamma x^2 + beta))``.
    """
    p = m.params

    def c(t):
        return 0.5 / (p.gamma * t * t + p.beta)

    ex = _expect_x(m, lambda t: t)
    ex2 = _expect_x(m, lambda t: t * t)
    ey = _expect_x(m, c)
    ey2 = _expect_x(m, lambda t: c(t) + c(t) ** 2)
    exy = _expect_x(m, lambda t: t * c(t))
    ex2y2 = _expect_x(m, lambda t: t * t * (c(t) + c(t) ** 2))
    return Moments(ex, ey, ex2 - ex * ex, ey2 - ey * ey, exy - ex * ey, ex2y2)
