"""Instantaneous cavity modes and eigenfrequencies.

Two mode families are provided:

* order 1 (``gamma = 0``): products of sines, with the uniform-potential
  redshift folded into the frequency;
* order 2 (``gamma > 0``): transverse sines times the large-argument Airy
  profile ``v**(-1/4) sin(S(0) - S(z))``, ``S = (2/3) v**(3/2)``, where
  ``v(z) = (Omega^2 / (4 gamma omega^2) - z) (4 gamma omega^2)**(1/3)``.
  By default the next asymptotic correction is kept
  (``S -= (5/48) v**(-3/2)``, amplitude ``*= 1 - 5/(64 v**3)``);
  ``airy_terms=1`` selects the bare leading-order form.

For order 2 the frequency is the root of the quantization condition
``S(0) - S(a) = nz pi`` (so the profile vanishes at the moving mirror), seeded
at the closed-form estimate.  Normalisation constants are obtained by
quadrature against :func:`geometry.inner_product_weight`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import AiryBranchError, ConvergenceError, OutOfRangeError
from .geometry import (
    CavityConfig,
    MetricParams,
    MirrorMotion,
    ModeIndex,
    inner_product_weight,
    lapse_ratio,
    metric_coefficients,
    mirror_position,
)
from .quadrature import composite_rule

V_MIN_DEFAULT = 5.0
QUAD_ORDER = 16


def _panels(nz: int) -> int:
    return max(4, 2 * nz)


@dataclass(frozen=True)
class Eigenfrequency:
    """Mode frequency at time ``t``.

    ``value`` is the frequency the modes actually use (closed form at order
    1, quantization root at order 2); ``closed_form`` is the analytic
    estimate.
    """

    value: float
    index: ModeIndex
    order: int
    t: float
    closed_form: float


@dataclass(frozen=True)
class _AiryData:
    omega: float
    c: float
    omega2: float  # Omega^2
    norm: float
    domega_da: float
    dnorm_da: float


class ModeSolver:
    """Mode functions for one cavity, metric and mirror motion.

    Per-mode data (normalisation and quantized frequency) is cached by
    ``(index, a)`` on first use.
    """

    def __init__(
        self,
        cavity: CavityConfig,
        metric: MetricParams,
        motion: Optional[MirrorMotion] = None,
        order: int = 1,
        v_min: float = V_MIN_DEFAULT,
        airy_terms: int = 2,
    ):
        if order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {order}")
        if order == 2 and metric.gamma <= 0:
            raise AiryBranchError("the Airy mode family needs gamma > 0; use order 1")
        self.cavity = cavity
        self.metric = metric
        self.motion = motion
        self.order = order
        self.v_min = v_min
        if airy_terms not in (1, 2):
            raise ValueError(f"airy_terms must be 1 or 2, got {airy_terms}")
        self.airy_terms = airy_terms
        self._cache: dict = {}

    # -- kinematics -------------------------------------------------------

    @property
    def a0(self) -> float:
        return self.cavity.a0

    def length(self, t: float) -> float:
        if self.motion is None:
            return self.a0
        return mirror_position(t, self.motion, self.cavity)[0]

    def kperp2(self, k: ModeIndex) -> float:
        return (math.pi / self.a0) ** 2 * (k.nx**2 + k.ny**2)

    def wavenumber(self, k: ModeIndex, a: float) -> float:
        """``sqrt(kx(0)^2 + ky(0)^2 + kz(a)^2)``."""
        return math.sqrt(self.kperp2(k) + (k.nz * math.pi / a) ** 2)

    def weight(self, z):
        return inner_product_weight(z, self.metric, self.order)

    # -- frequencies --------------------------------------------------------

    def closed_form_frequency(self, k: ModeIndex, a: float, order: Optional[int] = None) -> float:
        """Analytic frequency: ``lapse * |k|`` (order 1), ``(lapse + gamma a) |k|`` (order 2)."""
        order = self.order if order is None else order
        factor = lapse_ratio(self.metric)
        if order == 2:
            factor += self.metric.gamma * a
        return factor * self.wavenumber(k, a)

    def omega(self, k: ModeIndex, a: float) -> float:
        if self.order == 1:
            return self.closed_form_frequency(k, a, 1)
        return self._airy(k, a).omega

    def domega_da(self, k: ModeIndex, a: float) -> float:
        if self.order == 1:
            kz2 = (k.nz * math.pi / a) ** 2
            return -self.omega(k, a) * kz2 / (a * self.wavenumber(k, a) ** 2)
        return self._airy(k, a).domega_da

    def eigenfrequency(self, k: ModeIndex, t: float, order: Optional[int] = None) -> Eigenfrequency:
        order = self.order if order is None else order
        a = self.length(t)
        closed = self.closed_form_frequency(k, a, order)
        value = self.omega(k, a) if order == self.order else closed
        return Eigenfrequency(value=value, index=k, order=order, t=t, closed_form=closed)

    # -- Airy-phase machinery (order 2) ------------------------------------

    def _omega_parts(self, k: ModeIndex, omega: float):
        chi, gamma = self.metric.chi, self.metric.gamma
        c = (4.0 * gamma * omega**2) ** (1.0 / 3.0)
        omega2 = omega**2 * (1.0 + 4.0 * chi) - self.kperp2(k)
        return c, omega2

    def _v(self, z, k: ModeIndex, omega: float):
        c, omega2 = self._omega_parts(k, omega)
        return omega2 / c**2 - c * np.asarray(z, dtype=float)

    def _v_omega(self, z, k: ModeIndex, omega: float):
        chi = self.metric.chi
        c, omega2 = self._omega_parts(k, omega)
        c_w = 2.0 * c / (3.0 * omega)
        d_omega2 = 2.0 * omega * (1.0 + 4.0 * chi)
        return d_omega2 / c**2 - 2.0 * omega2 * c_w / c**3 - c_w * np.asarray(z, dtype=float)

    # Modulus-phase form of the Airy solutions: xi = A(v) sin(psi(v(0)) - psi(v(z))).
    # One asymptotic term gives A = v**-0.25, psi = (2/3) v**1.5; the second adds
    # the first large-v corrections to both.

    def _psi(self, v):
        psi = (2.0 / 3.0) * v**1.5
        if self.airy_terms > 1:
            psi = psi - (5.0 / 48.0) * v**-1.5
        return psi

    def _psi_v(self, v):
        d = np.sqrt(v)
        if self.airy_terms > 1:
            d = d + (5.0 / 32.0) * v**-2.5
        return d

    def _amplitude(self, v):
        amp = v**-0.25
        if self.airy_terms > 1:
            amp = amp * (1.0 - 5.0 / (64.0 * v**3))
        return amp

    def _amplitude_v(self, v):
        d = -0.25 * v**-1.25
        if self.airy_terms > 1:
            d = d * (1.0 - 5.0 / (64.0 * v**3)) + v**-0.25 * 15.0 / (64.0 * v**4)
        return d

    def _phase(self, z, k: ModeIndex, omega: float):
        v = np.maximum(self._v(z, k, omega), 1e-300)
        v0 = self._v(0.0, k, omega)
        return self._psi(v0) - self._psi(v)

    def _phase_omega(self, z, k: ModeIndex, omega: float):
        v = self._v(z, k, omega)
        v0 = self._v(0.0, k, omega)
        return self._psi_v(v0) * self._v_omega(0.0, k, omega) - self._psi_v(v) * self._v_omega(z, k, omega)

    def _raw_profile(self, z, k: ModeIndex, omega: float):
        v = self._v(z, k, omega)
        return self._amplitude(v) * np.sin(self._phase(z, k, omega))

    def _raw_profile_omega(self, z, k: ModeIndex, omega: float):
        v = self._v(z, k, omega)
        phase = self._phase(z, k, omega)
        return (
            self._amplitude_v(v) * self._v_omega(z, k, omega) * np.sin(phase)
            + self._amplitude(v) * np.cos(phase) * self._phase_omega(z, k, omega)
        )

    def _quantize(self, k: ModeIndex, a: float) -> float:
        target = k.nz * math.pi

        def condition(omega):
            c, omega2 = self._omega_parts(k, omega)
            if omega2 <= 0 or self._v(a, k, omega) <= 0:
                return -target
            return float(self._phase(a, k, omega)) - target

        seed = self.closed_form_frequency(k, a, 2)
        lo, hi = seed * 0.97, seed * 1.03
        for _ in range(60):
            if condition(lo) < 0 < condition(hi):
                break
            lo, hi = lo * 0.97, hi * 1.03
        else:
            raise ConvergenceError(f"could not bracket the quantization root for {k}")
        omega = brentq(condition, lo, hi, xtol=1e-15 * seed, rtol=1e-15, maxiter=200)
        # Newton polish on the analytic derivative
        for _ in range(2):
            slope = float(self._phase_omega(a, k, omega))
            omega -= condition(omega) / slope
        return omega

    def _airy(self, k: ModeIndex, a: float) -> _AiryData:
        key = (k, float(a))
        data = self._cache.get(key)
        if data is not None:
            return data
        omega = self._quantize(k, a)
        c, omega2 = self._omega_parts(k, omega)
        v_end = float(self._v(a, k, omega))
        if v_end < self.v_min:
            raise AiryBranchError(
                f"v({a:g}) = {v_end:.3g} < v_min = {self.v_min:g} for mode {k}: "
                "large-argument Airy form invalid"
            )
        z, w = composite_rule(0.0, a, _panels(k.nz), QUAD_ORDER)
        weight = self.weight(z)
        raw = self._raw_profile(z, k, omega)
        raw_w = self._raw_profile_omega(z, k, omega)
        integral = float(np.dot(w, weight * raw**2))
        norm = integral**-0.5
        phase_a = c * float(self._psi_v(v_end))
        phase_w = float(self._phase_omega(a, k, omega))
        domega_da = -phase_a / phase_w
        d_integral = 2.0 * domega_da * float(np.dot(w, weight * raw * raw_w))
        dnorm_da = -0.5 * integral**-1.5 * d_integral
        data = _AiryData(omega, c, omega2, norm, domega_da, dnorm_da)
        self._cache[key] = data
        return data

    def airy_coordinate(self, z, k: ModeIndex, t: float):
        """``v_k(z)`` at time ``t``, using the quantized frequency."""
        if self.order != 2:
            raise AiryBranchError("airy_coordinate is defined for the order-2 (gamma > 0) modes only")
        a = self.length(t)
        omega = self._quantize(k, a)
        v = self._v(z, k, omega)
        if float(self._v(a, k, omega)) <= 0:
            raise AiryBranchError(f"v <= 0 inside the cavity for mode {k}")
        return v

    def airy_coordinate_closed_form(self, z, k: ModeIndex, t: float):
        """``v_k(z)`` with the closed-form frequency estimate instead of the root."""
        a = self.length(t)
        return self._v(z, k, self.closed_form_frequency(k, a, 2))

    # -- profiles -----------------------------------------------------------

    def normalization(self, k: ModeIndex, a: float) -> float:
        if self.order == 1:
            return float(self.weight(0.0)) ** -0.5 * math.sqrt(2.0 / a)
        return self._airy(k, a).norm

    def profile(self, z, k: ModeIndex, a: float):
        """Normalised longitudinal profile ``xi_k(z)`` at mirror position ``a``."""
        z = np.asarray(z, dtype=float)
        if self.order == 1:
            return self.normalization(k, a) * np.sin(k.nz * math.pi * z / a)
        data = self._airy(k, a)
        return data.norm * self._raw_profile(z, k, data.omega)

    def profile_da(self, z, k: ModeIndex, a: float):
        """``d xi_k / d a`` at fixed ``z`` (the mode's parametric velocity)."""
        z = np.asarray(z, dtype=float)
        if self.order == 1:
            kz = k.nz * math.pi / a
            c = float(self.weight(0.0)) ** -0.5
            base = c * math.sqrt(2.0 / a)
            return -0.5 / a * base * np.sin(kz * z) - base * np.cos(kz * z) * kz * z / a
        data = self._airy(k, a)
        return data.dnorm_da * self._raw_profile(z, k, data.omega) + data.norm * data.domega_da * (
            self._raw_profile_omega(z, k, data.omega)
        )

    def transverse(self, x, y, k: ModeIndex):
        return (2.0 / self.a0) * np.sin(k.nx * math.pi * np.asarray(x) / self.a0) * np.sin(
            k.ny * math.pi * np.asarray(y) / self.a0
        )

    def mode_function(self, k: ModeIndex, t: float) -> "ModeFunction":
        a = self.length(t)
        return ModeFunction(
            solver=self,
            index=k,
            order=self.order,
            t=t,
            a=a,
            omega=self.omega(k, a),
            normalization=self.normalization(k, a),
        )

    def _check_inside(self, x, y, z, a):
        tol = 1e-12 * max(self.a0, a)
        for coord, upper in ((x, self.a0), (y, self.a0), (z, a)):
            coord = np.asarray(coord)
            if np.any(coord < -tol) or np.any(coord > upper + tol):
                raise OutOfRangeError("point lies outside the instantaneous cavity")

    def mode_first_order(self, x, y, z, k: ModeIndex, t: float):
        """``u_k(x; t)`` for the uniform-potential modes."""
        if self.order != 1:
            raise ValueError("solver is not configured for order-1 modes")
        a = self.length(t)
        self._check_inside(x, y, z, a)
        return self.transverse(x, y, k) * self.profile(z, k, a)

    def mode_second_order(self, x, y, z, k: ModeIndex, t: float):
        """``u_k(x; t)`` for the Airy-phase modes."""
        if self.order != 2:
            raise ValueError("solver is not configured for order-2 modes")
        a = self.length(t)
        self._check_inside(x, y, z, a)
        return self.transverse(x, y, k) * self.profile(z, k, a)

    def mode(self, x, y, z, k: ModeIndex, t: float):
        if self.order == 1:
            return self.mode_first_order(x, y, z, k, t)
        return self.mode_second_order(x, y, z, k, t)

    # -- diagnostics ----------------------------------------------------------

    def mode_ode_residual(self, k: ModeIndex, t: float, samples: int = 9) -> float:
        """Relative residual of the field equation for mode ``k``.

        Applies ``-sqrt(-g) g^00 omega^2 + d_i sqrt(-g) g^ij d_j`` with the
        metric coefficients of the line element, spatial derivatives by
        5-point central differences with step ``a0 / 2048``, on an interior
        sample grid; returns ``max|residual| / max|sqrt(-g) g^00 omega^2 u|``.
        """
        a = self.length(t)
        omega = self.omega(k, a)
        h = self.a0 / 2048.0
        pad = 4 * h
        gx = np.linspace(pad, self.a0 - pad, samples)
        gz = np.linspace(pad, a - pad, samples)
        X, Y, Z = np.meshgrid(gx, gx, gz, indexing="ij")
        metric = self.metric if self.order == 2 else MetricParams(self.metric.chi, 0.0, True)

        def u(x, y, z):
            return self.transverse(x, y, k) * self.profile(z, k, a)

        def second(f, axis):
            offsets = [np.zeros(3) for _ in range(5)]
            for j, m in enumerate((-2, -1, 0, 1, 2)):
                offsets[j][axis] = m * h
            vals = [f(X + o[0], Y + o[1], Z + o[2]) for o in offsets]
            return (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)

        def first(f, axis):
            offsets = [np.zeros(3) for _ in range(4)]
            for j, m in enumerate((-2, -1, 1, 2)):
                offsets[j][axis] = m * h
            vals = [f(X + o[0], Y + o[1], Z + o[2]) for o in offsets]
            return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)

        g00, gii, sqrt_neg_g = metric_coefficients(Z, metric)
        time_coeff = sqrt_neg_g / (-g00)
        space_coeff = sqrt_neg_g / gii
        # d_z(space_coeff) analytically: space_coeff = sqrt(-g00 * gii)
        dspace = (metric.gamma * gii - metric.gamma * (-g00)) / space_coeff
        u0 = u(X, Y, Z)
        laplacian = second(u, 0) + second(u, 1) + second(u, 2)
        residual = time_coeff * omega**2 * u0 + space_coeff * laplacian + dspace * first(u, 2)
        scale = np.max(np.abs(time_coeff * omega**2 * u0))
        return float(np.max(np.abs(residual)) / scale)


@dataclass(frozen=True)
class ModeFunction:
    """A normalised instantaneous mode bound to its solver and time."""

    solver: ModeSolver
    index: ModeIndex
    order: int
    t: float
    a: float
    omega: float
    normalization: float

    def __call__(self, x, y, z):
        return self.solver.mode(x, y, z, self.index, self.t)

    def profile(self, z):
        return self.solver.profile(z, self.index, self.a)


def inner_product(u: ModeFunction, w: ModeFunction, t: Optional[float] = None) -> float:
    """``-int d^3x sqrt(-g) g^00 u w`` over the instantaneous cavity.

    The weight depends on ``z`` only, so the volume integral is evaluated as
    the product of three one-dimensional Gauss-Legendre quadratures.
    """
    if u.solver is not w.solver:
        raise ValueError("modes must come from the same solver")
    t = u.t if t is None else t
    if u.t != t or w.t != t:
        raise ValueError("modes must be evaluated at the same time")
    solver = u.solver
    a0, a = solver.a0, u.a
    nmax = max(u.index.nx, u.index.ny, w.index.nx, w.index.ny, u.index.nz, w.index.nz)
    xs, wx = composite_rule(0.0, a0, _panels(nmax), QUAD_ORDER)
    zs, wz = composite_rule(0.0, a, _panels(nmax), QUAD_ORDER)
    sx = lambda n: np.sin(n * math.pi * xs / a0)
    ix = np.dot(wx, sx(u.index.nx) * sx(w.index.nx))
    iy = np.dot(wx, sx(u.index.ny) * sx(w.index.ny))
    iz = np.dot(wz, solver.weight(zs) * u.profile(zs) * w.profile(zs))
    return float((2.0 / a0) ** 2 * ix * iy * iz)
