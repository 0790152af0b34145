"""Cavity geometry, mirror motion and the weak-field static metric.

Units are natural (c = G = hbar = 1).  The cavity spans
``[0, a0] x [0, a0] x [0, a(t)]`` with gravity pointing along ``-z``; the
metric is the isotropic Schwarzschild line element expanded around the
cavity position,

    ds^2 = -(1 - 2 chi + 2 gamma z) dt^2 + (1 + 2 chi - 2 gamma z) dr^2,

with ``chi = M/R`` and ``gamma = M/R**2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import MetricDegeneracyError, OutOfRangeError, WeakFieldError

WEAK_FIELD_LIMIT = 0.1
SMALL_CAVITY_LIMIT = 1e-3
PERTURBATIVE_WARNING = 0.1


@dataclass(frozen=True)
class MetricParams:
    """Weak-field parameters: potential ``chi`` and acceleration ``gamma``.

    ``chi == gamma == 0`` is Minkowski space.  ``gamma`` is independent of
    ``chi`` so the uniform-potential theory (``gamma = 0``) can be set up
    directly.
    """

    chi: float = 0.0
    gamma: float = 0.0
    allow_strong_field: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.chi) and math.isfinite(self.gamma)):
            raise WeakFieldError("chi and gamma must be finite")
        if self.chi < 0 or self.gamma < 0:
            raise WeakFieldError(f"chi and gamma must be non-negative, got {self.chi}, {self.gamma}")
        if self.chi >= WEAK_FIELD_LIMIT and not self.allow_strong_field:
            raise WeakFieldError(
                f"chi = {self.chi} violates the weak-field limit chi < {WEAK_FIELD_LIMIT}"
            )

    @classmethod
    def from_dimensionless(cls, chi: float, gamma_a0: float, a0: float, **kwargs) -> "MetricParams":
        return cls(chi=chi, gamma=gamma_a0 / a0, **kwargs)

    @property
    def is_flat(self) -> bool:
        return self.chi == 0.0 and self.gamma == 0.0

    def gamma_a0(self, a0: float) -> float:
        """Dimensionless product ``gamma * a0``."""
        return self.gamma * a0


def weak_field_expand(M: float, R: float, allow_strong_field: bool = False) -> MetricParams:
    """Expand ``M/r`` around ``r = R``: returns ``chi = M/R``, ``gamma = M/R**2``."""
    if M < 0 or R <= 0:
        raise WeakFieldError(f"need M >= 0 and R > 0, got M={M}, R={R}")
    return MetricParams(chi=M / R, gamma=M / R**2, allow_strong_field=allow_strong_field)


def metric_coefficients(z, p: MetricParams):
    """Diagonal metric components at height ``z``.

    Returns
    -------
    g00, gii, sqrt_neg_g
        ``g00 = -(1 - 2chi + 2gamma z)``, the common spatial component
        ``gii = 1 + 2chi - 2gamma z`` and ``sqrt(-det g)``.
    """
    z = np.asarray(z, dtype=float)
    lapse2 = 1.0 - 2.0 * p.chi + 2.0 * p.gamma * z
    if np.any(lapse2 <= 0):
        raise MetricDegeneracyError("g00 >= 0: the weak-field expansion has broken down")
    g00 = -lapse2
    gii = 1.0 + 2.0 * p.chi - 2.0 * p.gamma * z
    sqrt_neg_g = np.sqrt(-g00 * gii**3)
    if g00.ndim == 0:
        return float(g00), float(gii), float(sqrt_neg_g)
    return g00, gii, sqrt_neg_g


def lapse_ratio(p: MetricParams) -> float:
    """``sqrt(-g00/gzz)`` of the uniform-potential metric, ``1 - 2chi + O(chi**2)``."""
    return math.sqrt((1.0 - 2.0 * p.chi) / (1.0 + 2.0 * p.chi))


def inner_product_weight(z, p: MetricParams, order: int):
    """Weight ``-sqrt(-g) g^00`` used by the mode inner product.

    Order 1 (uniform potential) uses the exact constant value.  Order 2 uses
    its expansion to first order in ``chi`` and ``gamma z``, the same order at
    which the Airy-type mode equation is derived; the modes are orthogonal
    with respect to exactly this weight.
    """
    z = np.asarray(z, dtype=float)
    if order == 1:
        _, gii, sqrt_neg_g = metric_coefficients(0.0, MetricParams(p.chi, 0.0, p.allow_strong_field))
        return np.full_like(z, sqrt_neg_g / (1.0 - 2.0 * p.chi))
    return 1.0 + 4.0 * p.chi - 4.0 * p.gamma * z


@dataclass(frozen=True)
class CavityConfig:
    """Cavity of size ``a0 x a0 x a(t)`` at distance ``R`` from the source."""

    a0: float = 1.0
    R: float = math.inf
    allow_large_cavity: bool = False

    def __post_init__(self):
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.a0 / self.R >= SMALL_CAVITY_LIMIT and not self.allow_large_cavity:
            raise WeakFieldError(
                f"a0/R = {self.a0 / self.R:g} is not small (limit {SMALL_CAVITY_LIMIT:g})"
            )


@dataclass(frozen=True)
class Sine:
    """``f(t) = sin(varpi t)``."""

    varpi: float

    def f(self, t):
        return np.sin(self.varpi * np.asarray(t, dtype=float))

    def fdot(self, t):
        return self.varpi * np.cos(self.varpi * np.asarray(t, dtype=float))

    @property
    def sup(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Tabulated:
    """Sampled ``f(t)`` with cubic-spline interpolation between samples."""

    times: tuple
    values: tuple
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 4:
            raise ValueError("need at least four matching time/value samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "values", tuple(v))
        object.__setattr__(self, "_spline", CubicSpline(t, v))

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        if np.any((t < lo) | (t > hi)):
            raise OutOfRangeError(f"t outside the tabulated range [{lo}, {hi}]")
        return t

    def f(self, t):
        return self._spline(self._check(t))

    def fdot(self, t):
        return self._spline(self._check(t), 1)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


MotionLaw = Union[Sine, Tabulated]


@dataclass(frozen=True)
class MirrorMotion:
    """Mirror trajectory ``a(t) = a0 (1 + epsilon f(t))``."""

    epsilon: float
    law: MotionLaw

    def __post_init__(self):
        amplitude = abs(self.epsilon) * self.law.sup
        if amplitude >= 1.0:
            raise ValueError(f"epsilon * sup|f| = {amplitude:g} must be below 1")
        if amplitude > PERTURBATIVE_WARNING:
            warnings.warn(
                f"epsilon * sup|f| = {amplitude:g} is outside the perturbative regime",
                stacklevel=2,
            )

    def with_epsilon(self, epsilon: float) -> "MirrorMotion":
        return MirrorMotion(epsilon, self.law)

    @property
    def varpi(self) -> float | None:
        return getattr(self.law, "varpi", None)


def mirror_position(t, m: MirrorMotion, cfg: CavityConfig):
    """Mirror position ``a(t)`` and velocity ``da/dt``."""
    a = cfg.a0 * (1.0 + m.epsilon * m.law.f(t))
    adot = cfg.a0 * m.epsilon * m.law.fdot(t)
    if np.ndim(a) == 0:
        return float(a), float(adot)
    return a, adot


def to_proper_units(a0: float, t: float, p: MetricParams, order: int = 1) -> tuple[float, float]:
    """Coordinate (length, time) to proper (length, time).

    Order 1 evaluates ``a_p = int sqrt(g_zz) dz`` and ``t_p = int sqrt(-g00) dt``
    exactly for the uniform potential.  Order 2 is the first-order inverse of
    ``a0 = a_p (1 + chi + gamma a_p / 2)``, ``t = (1 + chi - gamma a_p) t_p``.
    """
    if order == 1:
        return a0 * math.sqrt(1.0 + 2.0 * p.chi), t * math.sqrt(1.0 - 2.0 * p.chi)
    if order == 2:
        a_p = a0 * (1.0 - p.chi - 0.5 * p.gamma * a0)
        t_p = t * (1.0 - p.chi + p.gamma * a_p)
        return a_p, t_p
    raise ValueError(f"order must be 1 or 2, got {order}")


def from_proper_units(a_p: float, t_p: float, p: MetricParams, order: int = 1) -> tuple[float, float]:
    """Proper (length, time) to coordinate (length, time); inverse of :func:`to_proper_units`.

    At order 2, ``p.gamma`` is the coordinate acceleration parameter and the
    relations are used as written, to first order in ``chi`` and ``gamma a_p``.
    """
    if order == 1:
        return a_p / math.sqrt(1.0 + 2.0 * p.chi), t_p / math.sqrt(1.0 - 2.0 * p.chi)
    if order == 2:
        a0 = a_p * (1.0 + p.chi + 0.5 * p.gamma * a_p)
        t = t_p * (1.0 + p.chi - p.gamma * a_p)
        return a0, t
    raise ValueError(f"order must be 1 or 2, got {order}")


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Positive mode numbers ``(nx, ny, nz)``; ``k_i = n_i pi / L_i``."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.nx**2 + self.ny**2 + self.nz**2)

    @property
    def transverse(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def __str__(self):
        return f"({self.nx},{self.ny},{self.nz})"
