"""General normal-conditionals family.

The joint density is ``exp(-(1, x, x^2) A (1, y, y^2)^T)`` for a 3x3
coefficient matrix ``A`` (``A[i, j]`` multiplies ``x**i * y**j``).  This
module classifies coefficient matrices, evaluates conditional moments and
implements the admissibility predicates for the equi-dispersed,
variance-equals-squared-mean and mean/variance-ordering subclasses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .equidisp_model import EquiDispParams

__all__ = [
    "NCMatrix",
    "NCClass",
    "Classification",
    "Axis",
    "ConditionalVarianceError",
    "InvalidModelError",
    "NotEquiDispersed",
    "IndependentSolution",
    "NotAdmissible",
    "MeanVarianceOrder",
    "validate_nc",
    "nc_conditional_moments",
    "nc_equidisp_reduce",
    "nc_check_var_eq_meansq",
    "nc_mean_variance_order",
    "equidisp_matrix",
]

EQ_TOL = 1e-12


class ConditionalVarianceError(ArithmeticError):
    pass


class InvalidModelError(ValueError):
    pass


class Axis(enum.Enum):
    X_GIVEN_Y = "XgivenY"
    Y_GIVEN_X = "YgivenX"


class NCClass(enum.Enum):
    CLASSICAL_BIVARIATE_NORMAL = "ClassicalBivariateNormal"
    GENERAL_NC = "GeneralNC"
    INVALID = "Invalid"


@dataclass(frozen=True)
class Classification:
    kind: NCClass
    reason: str = ""

    @property
    def valid(self) -> bool:
        return self.kind is not NCClass.INVALID


class NCMatrix:
    """Coefficient matrix with ``a[i, j]`` multiplying ``x**i * y**j``.

    Any finite matrix is accepted; use :func:`validate_nc` for admissibility.
    """

    __slots__ = ("a",)

    def __init__(self, a):
        a = np.array(a, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a.setflags(write=False)
        self.a = a

    @classmethod
    def from_entries(cls, **entries: float) -> "NCMatrix":
        """Build from keywords like ``a20=1.0, a12=-1``; missing entries are 0."""
        a = np.zeros((3, 3))
        for key, val in entries.items():
            if len(key) != 3 or key[0] != "a" or not key[1:].isdigit():
                raise ValueError(f"bad entry name {key!r}")
            a[int(key[1]), int(key[2])] = val
        return cls(a)

    def __getitem__(self, ij):
        return self.a[ij]

    def __repr__(self):
        return f"NCMatrix({self.a.tolist()!r})"


def equidisp_matrix(alpha: float, beta: float, gamma: float, a00: float = 0.0) -> NCMatrix:
    """Embed equi-dispersed parameters into the general coefficient matrix."""
    return NCMatrix.from_entries(a00=a00, a20=alpha, a02=beta, a22=gamma, a10=-1.0, a01=-1.0)


def validate_nc(A: NCMatrix) -> Classification:
    """Classify ``A`` as classical bivariate normal, general NC, or invalid.

    The classical branch requires a positive definite quadratic form,
    ``a11^2 < 4 a20 a02``.
    """
    a = A.a
    if a[2, 2] == 0 and a[1, 2] == 0 and a[2, 1] == 0:
        if not a[2, 0] > 0:
            return Classification(NCClass.INVALID, "a20 > 0 violated")
        if not a[0, 2] > 0:
            return Classification(NCClass.INVALID, "a02 > 0 violated")
        if not a[1, 1] ** 2 < 4 * a[0, 2] * a[2, 0]:
            return Classification(NCClass.INVALID, "a11^2 < 4 a02 a20 violated")
        return Classification(NCClass.CLASSICAL_BIVARIATE_NORMAL)
    if not a[2, 2] > 0:
        return Classification(NCClass.INVALID, "a22 > 0 violated")
    if not 4 * a[2, 2] * a[0, 2] > a[1, 2] ** 2:
        return Classification(NCClass.INVALID, "4 a22 a02 > a12^2 violated")
    if not 4 * a[2, 0] * a[2, 2] > a[2, 1] ** 2:
        return Classification(NCClass.INVALID, "4 a20 a22 > a21^2 violated")
    return Classification(NCClass.GENERAL_NC)


def _moment_terms(A: NCMatrix, axis: Axis, t):
    a = A.a
    t = np.asarray(t, dtype=float)
    if axis is Axis.X_GIVEN_Y:
        num = a[1, 2] * t**2 + a[1, 1] * t + a[1, 0]
        den = a[2, 2] * t**2 + a[2, 1] * t + a[2, 0]
    else:
        num = a[2, 1] * t**2 + a[1, 1] * t + a[0, 1]
        den = a[2, 2] * t**2 + a[1, 2] * t + a[0, 2]
    return num, den


def nc_conditional_moments(A: NCMatrix, axis: Axis, t):
    """Mean and variance of X | Y=t (``XgivenY``) or Y | X=t (``YgivenX``).

    Vectorized over ``t``.

    Raises:
        ConditionalVarianceError: the variance denominator is not positive.
    """
    axis = Axis(axis)
    num, den = _moment_terms(A, axis, t)
    if np.any(den <= 0):
        raise ConditionalVarianceError(f"nonpositive variance denominator for {axis.value}")
    return -num / (2 * den), 1.0 / (2 * den)


@dataclass(frozen=True)
class NotEquiDispersed:
    reason: str


def nc_equidisp_reduce(A: NCMatrix, tol: float = EQ_TOL):
    """Return ``(alpha, beta, gamma)`` if ``A`` has equi-dispersed conditionals.

    Requires ``a11 = a12 = a21 = 0`` and ``a10 = a01 = -1``; otherwise a
    :class:`NotEquiDispersed` naming the first failed constraint.
    """
    a = A.a
    for (i, j), target in (((1, 1), 0.0), ((1, 2), 0.0), ((2, 1), 0.0),
                           ((1, 0), -1.0), ((0, 1), -1.0)):
        if abs(a[i, j] - target) > tol:
            return NotEquiDispersed(f"a{i}{j} != {target:g}")
    return EquiDispParams(a[2, 0], a[0, 2], a[2, 2])


@dataclass(frozen=True)
class IndependentSolution:
    """Independent N(tau, tau^2) marginals; ``tau_x = -1/a10``, ``tau_y = -1/a01``."""

    tau_x: float
    tau_y: float


@dataclass(frozen=True)
class NotAdmissible:
    reason: str


def nc_check_var_eq_meansq(A: NCMatrix, tol: float = EQ_TOL):
    """Check whether every conditional variance equals the squared conditional mean.

    Matching polynomial coefficients leaves only the independent case
    ``a11 = a12 = a21 = a22 = 0``, ``a20 = a10^2/2``, ``a02 = a01^2/2``.  The
    conditional of X is then N(-1/a10, 1/a10^2), and likewise for Y.
    """
    a = A.a

    def nz(v):
        return abs(v) > tol

    if nz(a[2, 2]):
        return NotAdmissible("a22 != 0")
    if nz(a[1, 2]):
        return NotAdmissible("a12 != 0")
    if nz(a[2, 1]):
        return NotAdmissible("a21 != 0")
    if nz(a[1, 1]):
        # forces a10 = a01 = a20 = a02 = 0, which is not integrable
        return NotAdmissible("a11 != 0 (nonintegrable)")
    if not nz(a[1, 0]):
        return NotAdmissible("a10 == 0")
    if not nz(a[0, 1]):
        return NotAdmissible("a01 == 0")
    if abs(a[2, 0] - a[1, 0] ** 2 / 2) > tol * max(1.0, abs(a[2, 0])):
        return NotAdmissible("a20 != a10^2 / 2")
    if abs(a[0, 2] - a[0, 1] ** 2 / 2) > tol * max(1.0, abs(a[0, 2])):
        return NotAdmissible("a02 != a01^2 / 2")
    return IndependentSolution(tau_x=-1.0 / a[1, 0], tau_y=-1.0 / a[0, 1])


class MeanVarianceOrder(enum.Enum):
    MEAN_EXCEEDS_VARIANCE = "MeanExceedsVariance"
    VARIANCE_EXCEEDS_MEAN = "VarianceExceedsMean"
    NEITHER = "Neither"


def nc_mean_variance_order(A: NCMatrix) -> MeanVarianceOrder:
    """Uniform ordering of conditional means against conditional variances.

    For a general NC matrix the ordering holds for all arguments when
    ``a12 y^2 + a11 y + a10 + 1`` and ``a21 x^2 + a11 x + a01 + 1`` have no
    real roots; the sign of ``a12``/``a21`` then fixes the direction.
    """
    if validate_nc(A).kind is not NCClass.GENERAL_NC:
        raise InvalidModelError("ordering predicate requires a general NC matrix")
    a = A.a
    positive_var = a[1, 2] ** 2 < 4 * a[2, 2] * a[0, 2] and a[2, 1] ** 2 < 4 * a[2, 2] * a[2, 0]
    no_roots = (4 * a[1, 2] * (a[1, 0] + 1) > a[1, 1] ** 2
                and 4 * a[2, 1] * (a[0, 1] + 1) > a[1, 1] ** 2)
    if positive_var and no_roots:
        if a[1, 2] < 0 and a[2, 1] < 0:
            return MeanVarianceOrder.MEAN_EXCEEDS_VARIANCE
        if a[1, 2] > 0 and a[2, 1] > 0:
            return MeanVarianceOrder.VARIANCE_EXCEEDS_MEAN
    return MeanVarianceOrder.NEITHER

