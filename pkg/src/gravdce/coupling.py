"""Intermode coupling coefficients and their expansion in the mirror amplitude.

The coupling between instantaneous modes is

    G_kk'(t) = (dw_k/dt) / (2 w_k) delta_kk'
               + sqrt(w_k / w_k') int sqrt(-g) g^00 (du_k'/dt) u_k d^3x.

Every mode depends on time only through the mirror position ``a(t)``, so
``G(t) = adot(t) * H(a(t))`` with a position-only matrix ``H``.  Transverse
orthogonality makes ``H`` block diagonal in ``(nx, ny)``; a
:class:`SectorCoupling` handles one block.

``Lambda`` and ``Xi`` are the epsilon-expansion coefficients of
``G_(kk') exp(i[Theta_k + Theta_k'])`` and ``G_[kk'] exp(i[Theta_k - Theta_k'])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev

from .errors import ConvergenceError
from .geometry import MirrorMotion, ModeIndex, Sine, lapse_ratio, mirror_position
from .modes import QUAD_ORDER, ModeSolver, _panels
from .quadrature import adaptive_gauss_legendre, composite_rule, cumulative_gauss_legendre

FD_BASE_STEP = 2.0**-10
CHEB_NODES = 12


def split_parts(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and antisymmetric parts of a square matrix."""
    G = np.asarray(G)
    return 0.5 * (G + G.T), 0.5 * (G - G.T)


@dataclass(frozen=True)
class CouplingMatrix:
    """``G_kk'`` over one transverse sector at time ``t``."""

    t: float
    indices: tuple
    G: np.ndarray
    sym: np.ndarray
    antisym: np.ndarray

    @classmethod
    def from_G(cls, t: float, indices, G: np.ndarray) -> "CouplingMatrix":
        sym, antisym = split_parts(G)
        return cls(t, tuple(indices), G, sym, antisym)


@dataclass(frozen=True)
class ExpansionCoefficients:
    """``Lambda^(l)`` and ``Xi^(l)`` sampled on a time grid, ``l = 1..max_order``.

    ``lam[l - 1]`` and ``xi[l - 1]`` have shape ``(len(times), N, N)``.
    """

    times: np.ndarray
    indices: tuple
    lam: tuple
    xi: tuple

    @property
    def max_order(self) -> int:
        return len(self.lam)


class SectorCoupling:
    """Coupling data for the modes ``(nx, ny, 1..nz_max)``.

    Parameters
    ----------
    solver:
        Mode solver; its motion supplies ``a(t)``.
    transverse:
        ``(nx, ny)`` of the sector.
    nz_max:
        Longitudinal cutoff.
    method:
        ``"closed"`` uses the analytic sine-mode integrals (order 1 only),
        ``"quadrature"`` integrates the mode functions numerically;
        ``"auto"`` picks closed form when available.
    span:
        Relative half-width of the mirror-position interval on which
        order-2 quantities are interpolated.
    """

    def __init__(
        self,
        solver: ModeSolver,
        transverse: tuple[int, int],
        nz_max: int,
        method: str = "auto",
        span: Optional[float] = None,
    ):
        if method == "auto":
            method = "closed" if solver.order == 1 else "quadrature"
        if method == "closed" and solver.order != 1:
            raise ValueError("closed-form couplings exist for order-1 modes only")
        if method not in ("closed", "quadrature"):
            raise ValueError(f"unknown coupling method {method!r}")
        self.solver = solver
        self.transverse = tuple(transverse)
        self.nz_max = nz_max
        self.method = method
        self.indices = tuple(ModeIndex(transverse[0], transverse[1], n) for n in range(1, nz_max + 1))
        if span is None:
            eps = abs(solver.motion.epsilon) * solver.motion.law.sup if solver.motion else 0.0
            span = 1.05 * max(eps, 2.0 * FD_BASE_STEP)
        self.span = span
        self._H_cache: dict = {}
        self._interp = None

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def a0(self) -> float:
        return self.solver.a0

    # -- exact evaluation at a given mirror position --------------------------

    def _omega_exact(self, a: float) -> np.ndarray:
        return np.array([self.solver.omega(k, a) for k in self.indices])

    def _domega_exact(self, a: float) -> np.ndarray:
        return np.array([self.solver.domega_da(k, a) for k in self.indices])

    def _H_exact(self, a: float) -> np.ndarray:
        key = float(a)
        cached = self._H_cache.get(key)
        if cached is not None:
            return cached
        omega = self._omega_exact(a)
        domega = self._domega_exact(a)
        ratio = np.sqrt(omega[:, None] / omega[None, :])
        if self.method == "closed":
            n = np.arange(1, self.nz_max + 1, dtype=float)
            num = 2.0 * n[:, None] * n[None, :]
            den = a * (n[None, :] ** 2 - n[:, None] ** 2)
            np.fill_diagonal(den, 1.0)
            sign = (-1.0) ** (n[:, None] + n[None, :])
            overlap = -sign * num / den
            np.fill_diagonal(overlap, 0.0)
        else:
            z, w = composite_rule(0.0, a, _panels(self.nz_max), QUAD_ORDER)
            weight = self.solver.weight(z)
            P = np.array([self.solver.profile(z, k, a) for k in self.indices])
            dP = np.array([self.solver.profile_da(z, k, a) for k in self.indices])
            overlap = (P * (w * weight)) @ dP.T
        H = np.diag(0.5 * domega / omega) - ratio * overlap
        if self.method == "quadrature":
            self._H_cache[key] = H
        return H

    # -- interpolated evaluation (order 2) ------------------------------------

    def _build_interp(self):
        lo = self.a0 * (1.0 - self.span)
        hi = self.a0 * (1.0 + self.span)
        x = np.cos(np.pi * (np.arange(CHEB_NODES) + 0.5) / CHEB_NODES)
        nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        n = self.size
        omegas = np.array([self._omega_exact(a) for a in nodes])
        domegas = np.array([self._domega_exact(a) for a in nodes])
        Hs = np.array([self._H_exact(a).ravel() for a in nodes])
        deg = CHEB_NODES - 1
        self._interp = (
            lo,
            hi,
            chebyshev.chebfit(x, omegas, deg),
            chebyshev.chebfit(x, domegas, deg),
            chebyshev.chebfit(x, Hs, deg),
            n,
        )

    def _cheb(self, which: int, a):
        if self._interp is None:
            self._build_interp()
        lo, hi = self._interp[0], self._interp[1]
        a = np.asarray(a, dtype=float)
        if np.any(a < lo * (1 - 1e-12)) or np.any(a > hi * (1 + 1e-12)):
            raise ValueError(f"mirror position outside the interpolation interval [{lo}, {hi}]")
        x = (2.0 * a - (lo + hi)) / (hi - lo)
        return chebyshev.chebval(x, self._interp[which])

    def omega(self, a) -> np.ndarray:
        """Mode frequencies at mirror position(s) ``a``; shape ``(..., N)``."""
        if self.solver.order == 1:
            a = np.asarray(a, dtype=float)
            n = np.arange(1, self.nz_max + 1)
            kperp2 = self.solver.kperp2(self.indices[0])
            return lapse_ratio(self.solver.metric) * np.sqrt(kperp2 + (n * math.pi / a[..., None]) ** 2)
        if np.ndim(a) == 0 and float(a) == self.a0:
            return self._omega_exact(self.a0)
        values = self._cheb(2, a)
        return np.moveaxis(values, 0, -1) if np.ndim(a) else values

    def domega_da(self, a: float) -> np.ndarray:
        if self.solver.order == 1 or float(a) == self.a0:
            return self._domega_exact(a)
        return self._cheb(3, a)

    def H(self, a: float) -> np.ndarray:
        """Position-only coupling matrix: ``G = adot * H(a)``."""
        if self.method == "closed" or float(a) == self.a0:
            return self._H_exact(a)
        return self._cheb(4, a).reshape(self.size, self.size)

    def H_derivative(self, a: float, rel_step: float = 1e-4) -> np.ndarray:
        """``dH/da`` by a fourth-order central difference."""
        h = rel_step * a
        if self.method == "closed":
            f = self._H_exact
        else:
            f = lambda x: self._cheb(4, x).reshape(self.size, self.size)
        return (f(a - 2 * h) - 8 * f(a - h) + 8 * f(a + h) - f(a + 2 * h)) / (12 * h)

    # -- time-dependent quantities ---------------------------------------------

    def coupling_matrix(self, t: float, motion: Optional[MirrorMotion] = None) -> CouplingMatrix:
        motion = self.solver.motion if motion is None else motion
        a, adot = mirror_position(t, motion, self.solver.cavity)
        G = adot * self.H(a) if adot != 0.0 else np.zeros((self.size, self.size))
        return CouplingMatrix.from_G(t, self.indices, G)

    def theta(self, t: float, t0: float = 0.0, motion: Optional[MirrorMotion] = None, atol: float = 1e-12):
        """Accumulated phases ``Theta_k(t) = int_t0^t w_k(tau) dtau`` for the sector."""
        motion = self.solver.motion if motion is None else motion
        if t < t0:
            raise ValueError("t must not precede t0")
        if motion is None or motion.epsilon == 0.0:
            return self._omega_exact(self.a0) * (t - t0)
        if t == t0:
            return np.zeros(self.size)
        cavity = self.solver.cavity

        def integrand(tau):
            return self.omega(mirror_position(tau, motion, cavity)[0])

        panels = 1
        if motion.varpi:
            panels = max(1, int(math.ceil(motion.varpi * (t - t0) / math.pi)))
        value, _ = adaptive_gauss_legendre(integrand, t0, t, atol=atol, order=12, initial_panels=panels)
        return np.asarray(value)


class CouplingModel:
    """Couplings for all transverse sectors of a mode solver."""

    def __init__(self, solver: ModeSolver, nz_max: int, method: str = "auto"):
        self.solver = solver
        self.nz_max = nz_max
        self.method = method
        self._sectors: dict = {}

    def sector(self, transverse) -> SectorCoupling:
        transverse = tuple(transverse)
        sc = self._sectors.get(transverse)
        if sc is None:
            sc = SectorCoupling(self.solver, transverse, self.nz_max, self.method)
            self._sectors[transverse] = sc
        return sc

    def _pair(self, k: ModeIndex, kp: ModeIndex):
        if max(k.nz, kp.nz) > self.nz_max:
            raise ValueError(f"modes {k}, {kp} exceed the truncation nz_max = {self.nz_max}")
        return self.sector(k.transverse), k.nz - 1, kp.nz - 1

    def coupling_G(self, k: ModeIndex, kp: ModeIndex, t: float) -> float:
        if k.transverse != kp.transverse:
            return 0.0
        sc, i, j = self._pair(k, kp)
        return float(sc.coupling_matrix(t).G[i, j])

    def coupling_matrix(self, transverse, t: float) -> CouplingMatrix:
        return self.sector(transverse).coupling_matrix(t)

    def phase_theta(self, k: ModeIndex, t: float, t0: float = 0.0) -> float:
        sc, i, _ = self._pair(k, k)
        return float(sc.theta(t, t0)[i])

    def lambda_xi_closed_form(self, k: ModeIndex, kp: ModeIndex, t: float, t0: float = 0.0):
        """First-order ``(Lambda, Xi)`` for sine-mode cavities and sinusoidal motion."""
        solver = self.solver
        if solver.order != 1 or solver.motion is None or not isinstance(solver.motion.law, Sine):
            raise ValueError("closed-form Lambda/Xi need order-1 modes and a sinusoidal mirror")
        if k.transverse != kp.transverse:
            return 0j, 0j
        varpi = solver.motion.law.varpi
        a0 = solver.a0
        w, wp = solver.omega(k, a0), solver.omega(kp, a0)
        n, npr = k.magnitude, kp.magnitude
        drive = varpi * math.cos(varpi * t)
        if k.nz == kp.nz:
            lam_bracket = -(k.nz**2) / (2.0 * n**2)
            xi_bracket = 0.0
        else:
            common = (-1.0) ** (k.nz + kp.nz) * k.nz * kp.nz / (kp.nz**2 - k.nz**2) / math.sqrt(n * npr)
            lam_bracket = common * (n - npr)
            xi_bracket = common * (n + npr)
        lam = drive * np.exp(1j * (w + wp) * (t - t0)) * lam_bracket
        xi = drive * np.exp(1j * (w - wp) * (t - t0)) * xi_bracket
        return complex(lam), complex(xi)

    def lambda_xi_numeric_sector(
        self,
        transverse,
        t: float,
        order: int = 1,
        t0: float = 0.0,
        base_step: float = FD_BASE_STEP,
        rtol: float = 1e-6,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Sector matrices ``(Lambda^(l), Xi^(l))`` by central differences in epsilon.

        Steps ``h`` and ``h/2`` are combined by Richardson extrapolation.
        The extrapolated value must agree with the finer raw difference to
        ``rtol`` relative to the largest entry (a loose sanity bound on the
        leftover ``O(h**2)`` term); otherwise :class:`ConvergenceError`.
        """
        if order not in (1, 2):
            raise ValueError("only orders 1 and 2 are supported")
        motion = self.solver.motion
        if motion is None:
            raise ValueError("solver has no mirror motion")
        sc = self.sector(transverse)

        def F(eps):
            m = motion.with_epsilon(eps)
            cm = sc.coupling_matrix(t, m)
            theta = sc.theta(t, t0, m)
            lam = cm.sym * np.exp(1j * (theta[:, None] + theta[None, :]))
            xi = cm.antisym * np.exp(1j * (theta[:, None] - theta[None, :]))
            return np.stack([lam, xi])

        def derivative(h):
            if order == 1:
                return (F(h) - F(-h)) / (2 * h)
            return (F(h) + F(-h)) / (2 * h * h)  # F(0) = 0; this is F''(0)/2!

        coarse, fine = derivative(base_step), derivative(base_step / 2)
        extrapolated = (4.0 * fine - coarse) / 3.0
        scale = max(float(np.max(np.abs(extrapolated))), 1e-300)
        if np.max(np.abs(extrapolated - fine)) > max(rtol, 64 * base_step**2) * scale:
            raise ConvergenceError("Richardson extrapolation in epsilon did not settle")
        return extrapolated[0], extrapolated[1]

    def lambda_xi_numeric(self, k: ModeIndex, kp: ModeIndex, t: float, order: int = 1, **kwargs):
        """``(Lambda^(l), Xi^(l))`` for one pair; see :meth:`lambda_xi_numeric_sector`."""
        if k.transverse != kp.transverse:
            return 0j, 0j
        _, i, j = self._pair(k, kp)
        lam, xi = self.lambda_xi_numeric_sector(k.transverse, t, order, **kwargs)
        return complex(lam[i, j]), complex(xi[i, j])


def _drive_integral(motion: MirrorMotion, times: np.ndarray, t0: float) -> np.ndarray:
    """``int_t0^t f(tau) dtau`` on the grid."""
    law = motion.law
    if isinstance(law, Sine):
        return (np.cos(law.varpi * t0) - np.cos(law.varpi * times)) / law.varpi
    grid = np.concatenate([[t0], times]) if times[0] != t0 else times
    out = cumulative_gauss_legendre(lambda x: law.f(x), grid)
    return out[1:] if times[0] != t0 else out


def expansion_coefficients(
    sector: SectorCoupling,
    times,
    max_order: int = 1,
    t0: float = 0.0,
    rwa: bool = False,
) -> ExpansionCoefficients:
    """``Lambda^(l)``, ``Xi^(l)`` on a time grid from the factorisation ``G = adot H(a)``.

    With ``a = a0 (1 + eps f)``, ``adot = eps a0 fdot`` is exactly linear in
    ``eps``; expanding ``H(a)`` and ``Theta`` to the needed order gives

        Lambda^(1) = a0 fdot H_sym(a0) exp(i [w_k + w_k'] (t - t0))
        Lambda^(2) = a0 fdot [a0 f H'_sym(a0) + i H_sym(a0) (T_k + T_k')] exp(...)

    with ``T_k = a0 w_k'(a0) int f``, and the same with the antisymmetric
    part and phase differences for ``Xi``.  ``rwa`` keeps only the
    co-rotating half of ``fdot`` in the first-order terms (sinusoidal
    motion only).
    """
    solver = sector.solver
    motion = solver.motion
    if motion is None:
        raise ValueError("solver has no mirror motion")
    times = np.asarray(times, dtype=float)
    a0 = solver.a0
    omega = sector.omega(a0)
    H_sym, H_anti = split_parts(sector.H(a0))
    fdot = motion.law.fdot(times)
    dt = times - t0
    e = np.exp(1j * omega[None, :] * dt[:, None])
    sum_phase = e[:, :, None] * e[:, None, :]
    diff_phase = e[:, :, None] * np.conj(e)[:, None, :]

    if rwa:
        if not isinstance(motion.law, Sine):
            raise ValueError("the rotating-wave option needs a sinusoidal mirror")
        varpi = motion.law.varpi
        detuning = omega[:, None] - omega[None, :]
        counter = np.exp(-1j * varpi * times)[:, None, None]
        co = np.exp(1j * varpi * times)[:, None, None]
        drive_lam = 0.5 * varpi * counter * np.ones_like(detuning)[None]
        drive_xi = np.where(
            detuning[None] > 0,
            0.5 * varpi * counter,
            np.where(detuning[None] < 0, 0.5 * varpi * co, varpi * np.cos(varpi * times)[:, None, None]),
        )
    else:
        drive_lam = drive_xi = fdot[:, None, None]

    lam1 = a0 * drive_lam * H_sym[None] * sum_phase
    xi1 = a0 * drive_xi * H_anti[None] * diff_phase
    lam, xi = [lam1], [xi1]

    if max_order >= 2:
        f = motion.law.f(times)
        F = _drive_integral(motion, times, t0)
        dH_sym, dH_anti = split_parts(sector.H_derivative(a0))
        T = a0 * sector.domega_da(a0)[None, :] * F[:, None]  # (T, N)
        plus = T[:, :, None] + T[:, None, :]
        minus = T[:, :, None] - T[:, None, :]
        base = a0 * fdot[:, None, None]
        lam.append(base * (a0 * f[:, None, None] * dH_sym[None] + 1j * H_sym[None] * plus) * sum_phase)
        xi.append(base * (a0 * f[:, None, None] * dH_anti[None] + 1j * H_anti[None] * minus) * diff_phase)
    if max_order > 2:
        raise ValueError("expansion coefficients are provided up to second order")
    return ExpansionCoefficients(times, sector.indices, tuple(lam), tuple(xi))
