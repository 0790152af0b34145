"""Gauss-Legendre quadrature: fixed composite rules and an adaptive panel scheme.

Integrands are vectorised callables ``f(x) -> array`` and may return complex
values.  The fixed rule maps a reference node set onto ``[a, b]``, so its
result is a smooth function of the endpoints; the coupling code relies on
that when it differentiates integrals with respect to the mirror position.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConvergenceError

Integrand = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=64)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(a: float, b: float, panels: int = 1, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``."""
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be positive")
    x0, w0 = _reference_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def gauss_legendre(f: Integrand, a: float, b: float, panels: int = 1, order: int = 16):
    """Integrate ``f`` over ``[a, b]`` with a fixed composite rule."""
    nodes, weights = composite_rule(a, b, panels, order)
    return np.dot(weights, f(nodes))


def adaptive_gauss_legendre(
    f: Integrand,
    a: float,
    b: float,
    atol: float = 1e-10,
    rtol: float = 0.0,
    order: int = 10,
    initial_panels: int = 1,
    max_panels: int = 20000,
) -> tuple[complex | float, float]:
    """Adaptive panel integration of ``f`` over ``[a, b]``.

    ``f`` may map the node array ``x`` of shape ``(m,)`` to shape ``(m,)`` or
    ``(m, p)``; vector integrands are refined on their worst component.
    Each panel is compared against the sum over its two halves; the
    difference is taken as the panel error (conservative, since the halved
    rule converges ``2**(2*order)`` times faster).  Panels whose error
    exceeds their share of the budget are split.

    Returns
    -------
    value, error
        Integral estimate (from the refined halves) and the summed error
        estimate.

    Raises
    ------
    ConvergenceError
        If the panel budget is exhausted before the tolerance is met.
    """
    if a == b:
        return 0.0, 0.0
    x0, w0 = _reference_rule(order)
    length = abs(b - a)

    def panel(lo: float, hi: float):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return half * np.tensordot(w0, f(mid + half * x0), axes=(0, 0))

    stack = []
    edges = np.linspace(a, b, initial_panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        stack.append((lo, hi, panel(lo, hi)))

    total = 0.0
    error = 0.0
    n_panels = len(stack)
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        refined = left + right
        err = float(np.max(np.abs(refined - whole)))
        budget = max(atol, rtol * float(np.max(np.abs(refined)))) * abs(hi - lo) / length
        if err <= budget or abs(hi - lo) < 1e-14 * length:
            total = total + refined
            error += err
            continue
        n_panels += 1
        if n_panels > max_panels:
            raise ConvergenceError(
                f"adaptive quadrature exceeded {max_panels} panels on [{a}, {b}]"
            )
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    return total, error


def cumulative_gauss_legendre(f: Integrand, grid: np.ndarray, order: int = 12) -> np.ndarray:
    """Running integral of a scalar-valued ``f`` from ``grid[0]`` to every grid point.

    One Gauss-Legendre panel per grid interval; exact up to polynomial
    degree ``2*order - 1`` on each interval.
    """
    grid = np.asarray(grid, dtype=float)
    x0, w0 = _reference_rule(order)
    half = 0.5 * np.diff(grid)
    mid = 0.5 * (grid[1:] + grid[:-1])
    nodes = mid[:, None] + half[:, None] * x0[None, :]
    values = np.asarray(f(nodes.ravel())).reshape(nodes.shape)
    pieces = (half[:, None] * w0[None, :] * values).sum(axis=1)
    out = np.zeros(grid.size, dtype=pieces.dtype)
    out[1:] = np.cumsum(pieces)
    return out
