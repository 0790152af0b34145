"""Order-by-order Bogoliubov coefficients.

With ``alpha~ = sum eps**l alpha~^(l)`` (same for ``beta~``), the order-``l``
coefficients follow from the lower ones by

    alpha~^(l)(t) = sum_{l'<l} int_t0^t [Xi^(l-l') alpha~^(l') + Lambda^(l-l') conj(beta~^(l'))] dtau
    beta~^(l)(t)  = sum_{l'<l} int_t0^t [Xi^(l-l') beta~^(l')  + Lambda^(l-l') conj(alpha~^(l'))] dtau

(matrix products over the intermediate mode), starting from
``alpha~^(0) = 1`` and ``beta~^(0) = 0``.  Time integrals use
cumulative Simpson quadrature on a uniform grid fine enough to resolve the
fastest phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .coupling import CouplingModel, ExpansionCoefficients, expansion_coefficients
from .geometry import CavityConfig, MetricParams, MirrorMotion, ModeIndex
from .modes import ModeSolver

POINTS_PER_PERIOD = 160
MAX_ORDER = 2


@dataclass(frozen=True)
class ModeSet:
    """All modes with ``nx <= nx_max``, ``ny <= ny_max``, ``nz <= nz_max``.

    Modes are ordered lexicographically, so each transverse sector occupies
    a contiguous block of ``nz_max`` rows.  ``sectors`` restricts the set to
    chosen ``(nx, ny)`` pairs.
    """

    nz_max: int
    nx_max: int = 1
    ny_max: int = 1
    sectors: Optional[tuple] = None
    indices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if min(self.nx_max, self.ny_max, self.nz_max) < 1:
            raise ValueError("mode cutoffs must be positive")
        if self.sectors is None:
            sectors = tuple(
                (nx, ny) for nx in range(1, self.nx_max + 1) for ny in range(1, self.ny_max + 1)
            )
        else:
            sectors = tuple(sorted({(int(nx), int(ny)) for nx, ny in self.sectors}))
            if not sectors:
                raise ValueError("at least one transverse sector is required")
            if any(nx < 1 or ny < 1 for nx, ny in sectors):
                raise ValueError("sector indices must be positive")
        object.__setattr__(self, "sectors", sectors)
        object.__setattr__(
            self,
            "indices",
            tuple(ModeIndex(nx, ny, nz) for nx, ny in sectors for nz in range(1, self.nz_max + 1)),
        )

    @classmethod
    def single_sector(cls, nx: int, ny: int, nz_max: int) -> "ModeSet":
        return cls(nz_max=nz_max, nx_max=nx, ny_max=ny, sectors=((nx, ny),))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k) -> bool:
        return k.transverse in self.sectors and 1 <= k.nz <= self.nz_max

    def index_of(self, k: ModeIndex) -> int:
        if k not in self:
            raise KeyError(f"mode {k} is not in the mode set")
        return self.sectors.index(k.transverse) * self.nz_max + k.nz - 1

    def sector_slice(self, transverse) -> slice:
        start = self.sectors.index(tuple(transverse)) * self.nz_max
        return slice(start, start + self.nz_max)


@dataclass(frozen=True)
class BogoliubovState:
    """Expansion coefficients ``alpha~^(l)``, ``beta~^(l)`` at the output times.

    ``alpha[l]`` and ``beta[l]`` have shape ``(len(times), N, N)`` for
    ``l = 0..max_order``.
    """

    modes: ModeSet
    times: np.ndarray
    alpha: tuple
    beta: tuple
    epsilon: float
    metadata: dict

    @property
    def max_order(self) -> int:
        return len(self.alpha) - 1

    def _time_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-12, abs_tol=1e-12):
            raise KeyError(f"t = {t} is not an output time")
        return i

    def reconstruct(self, t: float, epsilon: Optional[float] = None, max_order: Optional[int] = None):
        """``(alpha~, beta~) = sum_l eps**l (alpha~^(l), beta~^(l))`` at grid time ``t``."""
        eps = self.epsilon if epsilon is None else epsilon
        top = self.max_order if max_order is None else max_order
        i = self._time_index(t)
        a = sum(eps**l * self.alpha[l][i] for l in range(top + 1))
        b = sum(eps**l * self.beta[l][i] for l in range(top + 1))
        return a, b

    def order(self, l: int, t: float):
        """``(alpha~^(l), beta~^(l))`` at grid time ``t``."""
        i = self._time_index(t)
        return self.alpha[l][i], self.beta[l][i]


def to_plain(alpha_tilde: np.ndarray, beta_tilde: np.ndarray, theta: np.ndarray):
    """Undo the phase rotation: ``alpha_kk' = exp(-i Theta_k) alpha~_kk'``, same for beta."""
    phase = np.exp(-1j * np.asarray(theta))[:, None]
    return phase * alpha_tilde, phase * beta_tilde


def time_grid(t0: float, t_end: float, max_frequency: float, varpi: Optional[float] = None,
              points_per_period: int = POINTS_PER_PERIOD) -> np.ndarray:
    """Uniform grid on ``[t0, t_end]`` with spacing at most ``period / points_per_period``."""
    periods = [2 * math.pi / max_frequency]
    if varpi:
        periods.append(2 * math.pi / varpi)
    h = min(periods) / points_per_period
    n = max(1, int(math.ceil((t_end - t0) / h)))
    return np.linspace(t0, t_end, n + 1)


def _refine(t_grid: np.ndarray, h_max: float):
    """Split each interval of ``t_grid`` so no step exceeds ``h_max``."""
    pieces = [t_grid[:1]]
    index = [0]
    for lo, hi in zip(t_grid[:-1], t_grid[1:]):
        m = max(1, int(math.ceil((hi - lo) / h_max)))
        pieces.append(np.linspace(lo, hi, m + 1)[1:])
        index.append(index[-1] + m)
    return np.concatenate(pieces), np.array(index)


def _simpson(values: np.ndarray, dx: float) -> np.ndarray:
    real = cumulative_simpson(values.real, dx=dx, axis=0, initial=0)
    imag = cumulative_simpson(values.imag, dx=dx, axis=0, initial=0)
    return real + 1j * imag


def _cumulative(times: np.ndarray, values: np.ndarray, breaks=None, dense: bool = True) -> np.ndarray:
    """``int_times[0]^t values dtau`` at every grid point, or only at ``breaks``.

    ``breaks`` lists grid indices that split ``times`` into uniformly spaced
    segments (defaults to the whole grid, which must then be uniform).  With
    ``dense=False`` the result has one entry per break.
    """
    if breaks is None:
        breaks = [0, times.size - 1]
    if times.size < 2:
        shape = values.shape if dense else (len(breaks),) + values.shape[1:]
        return np.zeros(shape, dtype=complex)
    if not dense:
        pieces = [np.zeros(values.shape[1:], complex)]
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            dx = (times[hi] - times[lo]) / (hi - lo)
            seg = values[lo : hi + 1]
            pieces.append(simpson(seg.real, dx=dx, axis=0) + 1j * simpson(seg.imag, dx=dx, axis=0))
        return np.cumsum(np.stack(pieces), axis=0)
    out = np.zeros_like(values, dtype=complex)
    offset = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo == 1:
            piece = np.stack([0 * values[lo], 0.5 * (times[hi] - times[lo]) * (values[lo] + values[hi])])
        else:
            piece = _simpson(values[lo : hi + 1], (times[hi] - times[lo]) / (hi - lo))
        out[lo : hi + 1] = offset + piece
        offset = out[hi]
    return out


def recurrence_step(order: int, coeffs: ExpansionCoefficients, alpha: list, beta: list, breaks=None,
                    dense: bool = True):
    """Order-``order`` coefficients on the grid of ``coeffs`` from the lower orders.

    ``alpha`` and ``beta`` hold the arrays for orders ``0..order-1``; the
    order-0 entries are taken to be the initial values ``1`` and ``0``.
    ``breaks`` and ``dense`` are passed to the cumulative integrator.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if len(alpha) < order or len(beta) < order:
        raise ValueError(f"history for orders below {order} is incomplete")
    if order > coeffs.max_order:
        raise ValueError(f"expansion coefficients available only to order {coeffs.max_order}")
    da = np.zeros_like(coeffs.lam[0])
    db = np.zeros_like(coeffs.lam[0])
    # order 0 is alpha~ = 1, beta~ = 0 by the initial conditions
    da += coeffs.xi[order - 1]
    db += coeffs.lam[order - 1]
    for lp in range(1, order):
        xi = coeffs.xi[order - lp - 1]
        lam = coeffs.lam[order - lp - 1]
        da += xi @ alpha[lp] + lam @ np.conj(beta[lp])
        db += xi @ beta[lp] + lam @ np.conj(alpha[lp])
    return _cumulative(coeffs.times, da, breaks, dense), _cumulative(coeffs.times, db, breaks, dense)


def solve_perturbative(
    max_order: int,
    modes: ModeSet,
    t_grid,
    motion: MirrorMotion,
    metric: MetricParams,
    metric_order: int = 1,
    cavity: Optional[CavityConfig] = None,
    rwa: bool = False,
    points_per_period: int = POINTS_PER_PERIOD,
    solver: Optional[ModeSolver] = None,
) -> BogoliubovState:
    """Fill ``alpha~^(l)``, ``beta~^(l)`` for ``l <= max_order`` over ``t_grid``.

    ``t_grid[0]`` is the start time ``t0``; results are stored at the
    ``t_grid`` points.  Integration runs on an internal refinement whose
    steps do not exceed ``1/points_per_period`` of the shorter of the drive
    period and the fastest mode period.  Sectors are independent and are
    solved one at a time.
    """
    if max_order not in (1, MAX_ORDER):
        raise ValueError(f"max_order must be 1 or {MAX_ORDER}")
    if rwa and max_order > 1:
        raise ValueError("the rotating-wave option applies to first order only")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-D array")
    cavity = CavityConfig() if cavity is None else cavity
    if solver is None:
        solver = ModeSolver(cavity, metric, motion, order=metric_order)
    model = CouplingModel(solver, modes.nz_max)

    omega_max = max(
        float(np.max(model.sector(s).omega(solver.a0))) for s in modes.sectors
    )
    periods = [2 * math.pi / omega_max]
    if motion.varpi:
        periods.append(2 * math.pi / motion.varpi)
    times, output_index = _refine(t_grid, min(periods) / points_per_period)
    T, N = times.size, len(modes)

    alpha = [np.zeros((t_grid.size, N, N), complex) for _ in range(max_order + 1)]
    beta = [np.zeros((t_grid.size, N, N), complex) for _ in range(max_order + 1)]
    alpha[0][:] = np.eye(N)
    for s in modes.sectors:
        block = modes.sector_slice(s)
        coeffs = expansion_coefficients(model.sector(s), times, max_order, t0=times[0], rwa=rwa)
        n = modes.nz_max
        a_hist = [np.broadcast_to(np.eye(n, dtype=complex), (T, n, n))]
        b_hist = [np.zeros((T, n, n), complex)]
        for l in range(1, max_order + 1):
            # only lower orders need the full history
            dense = l < max_order
            a_l, b_l = recurrence_step(l, coeffs, a_hist, b_hist, list(output_index), dense)
            a_hist.append(a_l)
            b_hist.append(b_l)
            alpha[l][:, block, block] = a_l[output_index] if dense else a_l
            beta[l][:, block, block] = b_l[output_index] if dense else b_l

    metadata = {
        "grid_points": T,
        "metric_order": metric_order,
        "chi": metric.chi,
        "gamma": metric.gamma,
        "a0": cavity.a0,
        "law": type(motion.law).__name__,
        "varpi": motion.varpi,
        "nz_max": modes.nz_max,
        "sectors": modes.sectors,
        "rwa": rwa,
    }
    return BogoliubovState(
        modes=modes,
        times=t_grid.copy(),
        alpha=tuple(alpha),
        beta=tuple(beta),
        epsilon=motion.epsilon,
        metadata=metadata,
    )
