"""Similarity and distance functionals between grid densities.

The u-affinity

    D_u(g0, g1) = integral of g1**u * g0**(1-u)

is the objective every least-favorable-pair solver maximizes; total variation
distance and the f-divergences are the constraint/cross-check functionals.
All evaluation happens on a shared grid; mixed-grid inputs are rejected rather
than interpolated.
"""
from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .grid import GridDensity, _check_shared_grid, floored

__all__ = [
    "u_affinity",
    "tv_distance",
    "f_divergence",
    "likelihood_ratio",
    "F_DIVERGENCE_KINDS",
]

F_DIVERGENCE_KINDS = ("kl", "reverse_kl", "squared_hellinger")


def check_u(u: float) -> float:
    if not 0.0 < u < 1.0:
        raise ParameterError(f"u must lie in the open interval (0,1), got {u}")
    return float(u)


def u_affinity(g0: GridDensity, g1: GridDensity, u: float) -> float:
    """Trapezoidal integral of ``g1**u * g0**(1-u)``; in (0, 1] for densities."""
    u = check_u(u)
    grid = _check_shared_grid(g0, g1)
    integrand = floored(g1.values) ** u * floored(g0.values) ** (1.0 - u)
    return float(grid.weights @ integrand)


def tv_distance(g: GridDensity, f: GridDensity) -> float:
    """Total variation distance ``0.5 * integral of |g - f|``; in [0, 1]."""
    grid = _check_shared_grid(g, f)
    return float(0.5 * (grid.weights @ np.abs(g.values - f.values)))


def f_divergence(g0: GridDensity, g1: GridDensity, kind: str) -> float:
    """f-divergence of g0 from g1 with ``f`` applied to the ratio g0/g1.

    kind:
        ``kl``                f(r) = r log r        (KL from g1 to g0)
        ``reverse_kl``        f(r) = -log r
        ``squared_hellinger`` f(r) = (sqrt(r)-1)**2

    Each is evaluated in a numerically stable direct form rather than through
    the raw ratio, so disjoint supports do not overflow. Nonnegative, zero iff
    g0 = g1 pointwise (up to floor effects).
    """
    grid = _check_shared_grid(g0, g1)
    v0 = floored(g0.values)
    v1 = floored(g1.values)
    if kind == "kl":
        integrand = g0.values * (np.log(v0) - np.log(v1))
    elif kind == "reverse_kl":
        integrand = g1.values * (np.log(v1) - np.log(v0))
    elif kind == "squared_hellinger":
        integrand = (np.sqrt(g0.values) - np.sqrt(g1.values)) ** 2
    else:
        raise ParameterError(
            f"unknown f-divergence kind {kind!r}; choose from {F_DIVERGENCE_KINDS}"
        )
    return float(grid.weights @ integrand)


def likelihood_ratio(g1: GridDensity, g0: GridDensity) -> np.ndarray:
    """Pointwise ratio g1/g0 on the shared grid, with the density floor applied."""
    _check_shared_grid(g1, g0)
    return floored(g1.values) / floored(g0.values)
