"""Mean particle numbers: closed forms and numerical pipelines.

Closed forms cover the first-order (uniform potential) sum over coupled
modes, the parametric-resonance result with a gravitational gradient, and
its proper-unit rewriting.  The pipeline helpers drive the perturbative
solver and the oracle at parametric resonance from proper-unit inputs
``(a_p, tau_p)`` with ``tau_p = eps pi t_p / (2 a_p)``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from typing import Optional, Union

import numpy as np

from .bogoliubov import BogoliubovState, ModeSet, solve_perturbative
from .geometry import (
    CavityConfig,
    MetricParams,
    MirrorMotion,
    ModeIndex,
    Sine,
    from_proper_units,
    lapse_ratio,
)
from .modes import ModeSolver
from .oracle import OracleRun, integrate_exact

METHODS = ("closed-form", "perturbative", "oracle")
RESONANCE_REL_TOL = 1e-9
TAU_P_WARNING = 0.3


@dataclass(frozen=True)
class SpectrumResult:
    """Mean numbers ``N_k`` from a single method."""

    numbers: tuple  # ((ModeIndex, N), ...)
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        numbers = tuple((k, float(n)) for k, n in self.numbers)
        for k, n in numbers:
            if not n >= 0.0:
                raise ValueError(f"negative or undefined mean number {n} for mode {k}")
        object.__setattr__(self, "numbers", numbers)

    def __getitem__(self, k: ModeIndex) -> float:
        for key, n in self.numbers:
            if key == k:
                return n
        raise KeyError(k)


# -- numerical states ---------------------------------------------------------


def mean_number(state: Union[BogoliubovState, OracleRun], k: ModeIndex, t: float,
                epsilon: Optional[float] = None) -> float:
    """``N_k(t) = sum_k' |beta~_kk'(t)|**2`` (sum over the second index).

    A perturbative state contributes ``eps**2 sum_k' |beta~^(1)_kk'|**2``,
    the leading non-vanishing order.
    """
    if isinstance(state, OracleRun):
        i = state.modes.index_of(k)
        beta = state.at(t)[1]
        return float(np.sum(np.abs(beta[i]) ** 2))
    eps = state.epsilon if epsilon is None else epsilon
    i = state.modes.index_of(k)
    beta1 = state.order(1, t)[1]
    return float(eps**2 * np.sum(np.abs(beta1[i]) ** 2))


# -- first-order closed forms -------------------------------------------------


def _same_sector(n: ModeIndex, m: ModeIndex) -> bool:
    return n.nx == m.nx and n.ny == m.ny


def pair_frequency(n: ModeIndex, m: ModeIndex, a0: float, chi: float = 0.0,
                   gamma_a0: float = 0.0, metric_order: int = 1) -> float:
    """``w_n + w_m`` for modes in the same transverse sector (0 otherwise)."""
    if not _same_sector(n, m):
        return 0.0
    factor = lapse_ratio(MetricParams(chi=chi))
    if metric_order == 2:
        factor += gamma_a0
    return factor * math.pi / a0 * (n.magnitude + m.magnitude)


def _sinc_term(detuning: float, t: float, scale: float) -> complex:
    """``(exp(i x) - 1) / x`` with ``x = detuning * t``; ``i`` in the limit."""
    if abs(detuning) < RESONANCE_REL_TOL * scale or t == 0.0:
        return 1j
    x = detuning * t
    return (cmath.exp(1j * x) - 1.0) / x


def f_complex(omega_pair: float, varpi: float, t: float, rwa: bool = False) -> complex:
    """Time-dependent factor of the first-order number, co- plus counter-rotating term."""
    scale = max(abs(omega_pair), abs(varpi), 1e-300)
    value = _sinc_term(omega_pair - varpi, t, scale)
    if not rwa:
        value += _sinc_term(omega_pair + varpi, t, scale)
    return value


def f_factor(omega_pair: float, varpi: float, t: float, rwa: bool = False) -> float:
    """``|f|`` for a pair frequency ``omega_pair`` and drive ``varpi``."""
    return abs(f_complex(omega_pair, varpi, t, rwa))


def coupling_constant_first(n: ModeIndex, m: ModeIndex) -> float:
    """Constant coefficient ``C_nm`` of the first-order number."""
    if not _same_sector(n, m):
        return 0.0
    if n.nz == m.nz:
        return 0.25 * (n.nz**2 / n.magnitude**2) ** 2
    a, b = n.magnitude, m.magnitude
    return (n.nz**2 * m.nz**2 / (m.nz**2 - n.nz**2) ** 2) * (a - b) ** 2 / (a * b)


def n_first_order(k: ModeIndex, epsilon: float, varpi: float, t: float, chi: float = 0.0,
                  a0: float = 1.0, nz_max: int = 16, rwa: bool = False) -> float:
    """``N_k = 1/4 sum_n' eps^2 varpi^2 t^2 C_nn' |f_nn'|^2`` over ``n' = (nx, ny, 1..nz_max)``."""
    total = 0.0
    for nz in range(1, nz_max + 1):
        m = ModeIndex(k.nx, k.ny, nz)
        c = coupling_constant_first(k, m)
        if c == 0.0:
            continue
        f = f_factor(pair_frequency(k, m, a0, chi), varpi, t, rwa)
        total += c * f**2
    return 0.25 * (epsilon * varpi * t) ** 2 * total


def n_first_order_resonant(k: ModeIndex, epsilon: float, t: float, chi: float = 0.0,
                           a0: float = 1.0) -> float:
    """Secular part at ``varpi = 2 w_k``: ``1/4 C_kk (eps varpi t)^2``."""
    varpi = pair_frequency(k, k, a0, chi)
    return 0.25 * coupling_constant_first(k, k) * (epsilon * varpi * t) ** 2


def n_first_order_proper(k: ModeIndex, epsilon: float, t_p: float, a_p: float,
                         chi: float = 0.0) -> float:
    """:func:`n_first_order_resonant` with the length and time given in proper units."""
    a0, t = from_proper_units(a_p, t_p, MetricParams(chi=chi), order=1)
    return n_first_order_resonant(k, epsilon, t, chi, a0)


# -- second order and proper-unit results ------------------------------------


def coupling_constant_second_parametric(n: ModeIndex, gamma_a0: float) -> float:
    """``C2_nn = 1/4 (nz^2/|n|^2 - gamma a0)^2`` at parametric resonance."""
    c = 0.25 * (n.nz**2 / n.magnitude**2 - gamma_a0) ** 2
    if gamma_a0 >= 0.1:
        warnings.warn(f"gamma*a0 = {gamma_a0:g} is outside the weak-gradient regime", stacklevel=2)
    return c


def n_second_order_parametric(k: ModeIndex, epsilon: float, t: float, chi: float,
                              gamma_a0: float, a0: float = 1.0) -> float:
    """``(eps w_k(0) t / 2)^2 (gamma a0 - nz^2/|n|^2)^2`` in coordinate units."""
    omega = 0.5 * pair_frequency(k, k, a0, chi, gamma_a0, metric_order=2)
    return (0.5 * epsilon * omega * t) ** 2 * (gamma_a0 - k.nz**2 / k.magnitude**2) ** 2


def _check_tau(tau_p: float):
    if tau_p > TAU_P_WARNING:
        warnings.warn(f"tau_p = {tau_p:g} is beyond the short-time regime", stacklevel=3)


def n_final(k: ModeIndex, tau_p: float, chi: float = 0.0, gamma_a_p: float = 0.0) -> float:
    """``[nz^2/|n|^2 (1 - 4chi) - gamma a_p (1 + nz^2/|n|^2)]^2 (|n| tau_p)^2``."""
    _check_tau(tau_p)
    q = k.nz**2 / k.magnitude**2
    return (q * (1.0 - 4.0 * chi) - gamma_a_p * (1.0 + q)) ** 2 * (k.magnitude * tau_p) ** 2


def n_fundamental(tau_p: float, chi: float = 0.0, gamma_a_p: float = 0.0) -> float:
    """``[1 - 4chi - 2 gamma a_p]^2 tau_p^2`` for the mode ``(1, 1, 1)``."""
    _check_tau(tau_p)
    return (1.0 - 4.0 * chi - 2.0 * gamma_a_p) ** 2 * tau_p**2


# -- resonances -----------------------------------------------------------------


@dataclass(frozen=True)
class Resonance:
    kind: str  # "degenerate" | "nondegenerate" | "scattering"
    modes: tuple
    varpi: float


@dataclass(frozen=True)
class ResonanceScan:
    resonances: tuple
    coincidences: tuple  # pairs of resonances with coincident drive frequencies

    @property
    def simultaneous(self) -> bool:
        return bool(self.coincidences)


def resonance_scan(modes: ModeSet, varpi_min: float, varpi_max: float, chi: float = 0.0,
                   gamma_a0: float = 0.0, a0: float = 1.0, metric_order: int = 1,
                   rel_tol: float = 1e-9) -> ResonanceScan:
    """All degenerate, nondegenerate and scattering resonances with ``varpi`` in range.

    Frequencies are the closed forms at ``a0``.  Resonances of different
    kinds (or different mode pairs) whose drive frequencies agree to
    ``rel_tol`` are reported as coincidences.
    """
    found = []
    if varpi_max < varpi_min:
        return ResonanceScan((), ())
    factor = lapse_ratio(MetricParams(chi=chi)) + (gamma_a0 if metric_order == 2 else 0.0)
    for s in modes.sectors:
        ks = [k for k in modes if k.transverse == s]
        w = {k: factor * math.pi * k.magnitude / a0 for k in ks}
        for k, m in combinations_with_replacement(ks, 2):
            if k == m:
                candidates = [("degenerate", 2 * w[k])]
            else:
                candidates = [("nondegenerate", w[k] + w[m]), ("scattering", abs(w[k] - w[m]))]
            for kind, varpi in candidates:
                if varpi_min <= varpi <= varpi_max and varpi > 0:
                    found.append(Resonance(kind, (k, m) if k != m else (k,), varpi))
    found.sort(key=lambda r: (r.varpi, r.kind, r.modes))
    coincident = tuple(
        (r, q)
        for r, q in combinations(found, 2)
        if math.isclose(r.varpi, q.varpi, rel_tol=rel_tol)
    )
    return ResonanceScan(tuple(found), coincident)


# -- pipelines at parametric resonance -----------------------------------------


@dataclass(frozen=True)
class ResonantSetup:
    """Coordinate-space parameters for a parametric-resonance run."""

    cavity: CavityConfig
    metric: MetricParams
    motion: MirrorMotion
    t: float
    solver: ModeSolver


def resonant_setup(k: ModeIndex, tau_p: float, epsilon: float, a_p: float = 1.0,
                   chi: float = 0.0, gamma_a_p: float = 0.0, metric_order: int = 1) -> ResonantSetup:
    """Translate proper-unit inputs into a cavity driven at ``varpi = 2 w_k(0)``.

    ``t_p = 2 a_p tau_p / (eps pi)``; coordinates follow from the proper
    ones at the requested metric order.
    """
    if metric_order == 1 and gamma_a_p != 0.0:
        raise ValueError("the order-1 metric has no gravitational gradient")
    t_p = 2.0 * a_p * tau_p / (epsilon * math.pi)
    proper = MetricParams(chi=chi, gamma=gamma_a_p / a_p)
    a0, t = from_proper_units(a_p, t_p, proper, order=metric_order)
    metric = MetricParams(chi=chi, gamma=gamma_a_p / a_p)
    cavity = CavityConfig(a0=a0)
    solver = ModeSolver(cavity, metric, order=metric_order)
    varpi = 2.0 * solver.omega(k, a0)
    motion = MirrorMotion(epsilon, Sine(varpi))
    solver = ModeSolver(cavity, metric, motion, order=metric_order)
    return ResonantSetup(cavity, metric, motion, t, solver)


def pipeline_number(k: ModeIndex, tau_p: float, epsilon: float = 1e-3, a_p: float = 1.0,
                    chi: float = 0.0, gamma_a_p: float = 0.0, metric_order: int = 1,
                    max_order: int = 1, nz_max: int = 8, rwa: bool = True) -> float:
    """Resonant ``N_k`` from the perturbative solver."""
    setup = resonant_setup(k, tau_p, epsilon, a_p, chi, gamma_a_p, metric_order)
    modes = ModeSet.single_sector(k.nx, k.ny, max(nz_max, k.nz))
    state = solve_perturbative(
        max_order, modes, np.array([0.0, setup.t]), setup.motion, setup.metric,
        metric_order, setup.cavity, rwa=rwa, solver=setup.solver,
    )
    return mean_number(state, k, setup.t)


def oracle_number(k: ModeIndex, tau_p: float, epsilon: float = 1e-3, a_p: float = 1.0,
                  chi: float = 0.0, gamma_a_p: float = 0.0, metric_order: int = 1,
                  nz_max: int = 16, rtol: float = 1e-10, atol: float = 1e-12) -> tuple[float, OracleRun]:
    """Resonant ``N_k`` from the oracle, with the completed run."""
    setup = resonant_setup(k, tau_p, epsilon, a_p, chi, gamma_a_p, metric_order)
    modes = ModeSet.single_sector(k.nx, k.ny, max(nz_max, k.nz))
    run = OracleRun(modes, setup.motion, setup.metric, np.array([0.0, setup.t]), setup.cavity,
                    metric_order, rtol=rtol, atol=atol)
    run = integrate_exact(run, solver=setup.solver)
    return mean_number(run, k, setup.t), run
