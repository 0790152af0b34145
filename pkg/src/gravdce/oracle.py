"""Direct integration of the phase-rotated Bogoliubov equations.

The state ``(alpha~, beta~, Theta)`` of each transverse sector obeys

    d alpha~/dt = (G_[.] * P-) alpha~ + (G_(.) * P+) conj(beta~)
    d beta~/dt  = (G_[.] * P-) beta~  + (G_(.) * P+) conj(alpha~)
    d Theta/dt  = w(a(t))

with ``P-_kk'' = exp(i[Theta_k - Theta_k''])`` and
``P+_kk'' = exp(i[Theta_k + Theta_k''])``.  No expansion in epsilon is made,
so this path validates the perturbative solver.
"""

from __future__ import annotations

import dataclasses
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .bogoliubov import ModeSet
from .coupling import CouplingModel, SectorCoupling, split_parts
from .errors import ConvergenceError
from .geometry import CavityConfig, MetricParams, MirrorMotion, mirror_position
from .modes import ModeSolver


@dataclass(frozen=True)
class OracleRun:
    """Configuration and, once integrated, results of one oracle run.

    Result arrays are ``None`` until :func:`integrate_exact` fills them:
    ``alpha`` and ``beta`` have shape ``(len(times), N, N)``, ``theta``
    ``(len(times), N)``, ``unitarity`` ``(len(times),)``.
    """

    modes: ModeSet
    motion: MirrorMotion
    metric: MetricParams
    t_eval: np.ndarray
    cavity: CavityConfig = field(default_factory=CavityConfig)
    metric_order: int = 1
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    times: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    unitarity: Optional[np.ndarray] = None
    nfev: int = 0
    elapsed: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t_eval, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("t_eval must be a strictly increasing 1-D array")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "t_eval", t)

    @property
    def completed(self) -> bool:
        return self.alpha is not None

    def at(self, t: float):
        """``(alpha~, beta~)`` at an output time."""
        if not self.completed:
            raise RuntimeError("run has not been integrated")
        i = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[i], t, rtol=1e-12, atol=1e-12):
            raise KeyError(f"t = {t} is not an output time")
        return self.alpha[i], self.beta[i]


def unitarity_defect(alpha: np.ndarray, beta: np.ndarray) -> float:
    """``max_k |sum_k'' (|alpha_kk''|^2 - |beta_kk''|^2) - 1|``."""
    rows = np.sum(np.abs(alpha) ** 2 - np.abs(beta) ** 2, axis=-1)
    return float(np.max(np.abs(rows - 1.0)))


def _sector_rhs(sector: SectorCoupling, motion: MirrorMotion, cavity: CavityConfig):
    n = sector.size
    nn = n * n

    def rhs(t, y):
        alpha = y[:nn].reshape(n, n)
        beta = y[nn : 2 * nn].reshape(n, n)
        theta = y[2 * nn :].real
        a, adot = mirror_position(t, motion, cavity)
        out = np.empty_like(y)
        out[2 * nn :] = sector.omega(a)
        if adot == 0.0:
            out[: 2 * nn] = 0.0
            return out
        sym, anti = split_parts(adot * sector.H(a))
        pm = np.exp(1j * (theta[:, None] - theta[None, :]))
        pp = np.exp(1j * (theta[:, None] + theta[None, :]))
        A = anti * pm
        S = sym * pp
        out[:nn] = (A @ alpha + S @ np.conj(beta)).ravel()
        out[nn : 2 * nn] = (A @ beta + S @ np.conj(alpha)).ravel()
        return out

    return rhs


def integrate_exact(run: OracleRun, solver: Optional[ModeSolver] = None) -> OracleRun:
    """Integrate ``run`` from ``t_eval[0]`` and return the completed run.

    Raises
    ------
    ConvergenceError
        If the Runge-Kutta integrator fails (for example, step-size underflow).
    """
    start = _time.perf_counter()
    if solver is None:
        solver = ModeSolver(run.cavity, run.metric, run.motion, order=run.metric_order)
    model = CouplingModel(solver, run.modes.nz_max)
    t_eval = run.t_eval
    T, N, n = t_eval.size, len(run.modes), run.modes.nz_max
    alpha = np.zeros((T, N, N), complex)
    beta = np.zeros((T, N, N), complex)
    theta = np.zeros((T, N))
    nfev = 0
    for s in run.modes.sectors:
        sector = model.sector(s)
        block = run.modes.sector_slice(s)
        y0 = np.concatenate([np.eye(n, dtype=complex).ravel(), np.zeros(n * n + n, complex)])
        if T == 1:
            alpha[0, block, block] = np.eye(n)
            continue
        sol = solve_ivp(
            _sector_rhs(sector, run.motion, run.cavity),
            (t_eval[0], t_eval[-1]),
            y0,
            method=run.method,
            t_eval=t_eval,
            rtol=run.rtol,
            atol=run.atol,
        )
        if not sol.success:
            raise ConvergenceError(f"oracle integration failed: {sol.message}")
        nfev += sol.nfev
        y = sol.y.T
        alpha[:, block, block] = y[:, : n * n].reshape(T, n, n)
        beta[:, block, block] = y[:, n * n : 2 * n * n].reshape(T, n, n)
        theta[:, block] = y[:, 2 * n * n :].real
    alpha[0] = np.eye(N)  # exact initial conditions
    beta[0] = 0.0
    unitarity = np.array([unitarity_defect(alpha[i], beta[i]) for i in range(T)])
    return dataclasses.replace(
        run,
        times=t_eval.copy(),
        alpha=alpha,
        beta=beta,
        theta=theta,
        unitarity=unitarity,
        nfev=nfev,
        elapsed=_time.perf_counter() - start,
    )
