"""Uniform grids, densities sampled on them, and trapezoidal quadrature.

Every solver in this package operates on densities represented as nonnegative
vectors over a uniform grid, integrated with the trapezoidal rule

    integral = dx * (v_0/2 + v_1 + ... + v_{n-2} + v_{n-1}/2).

Integral bookkeeping throughout the package uses the pointwise weight vector
``grid.weights`` (``dx*[1/2, 1, ..., 1, 1/2]``) so that an integral over a
partition of the grid into index sets sums exactly (to float roundoff) to the
integral over the whole grid.

Densities are clamped to ``DENSITY_FLOOR`` wherever a ratio or a power
``g**u`` is formed; stored values are never floored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DegenerateDensityError,
    DimensionMismatchError,
    ParameterError,
)

__all__ = [
    "DENSITY_FLOOR",
    "MASS_TOL",
    "Grid",
    "GridDensity",
    "trapezoid_integral",
    "gaussian_density",
    "normalize",
    "sample_from",
    "floored",
]

# Floor used inside ratio/power evaluation only (avoids 0**0 and division by 0).
DENSITY_FLOOR = 1e-300

# A GridDensity must carry unit trapezoidal mass within this tolerance.
MASS_TOL = 1e-8

# Default domain: wide enough that Gaussian tails with variance <= 9 carry
# mass < 1e-8 outside of it.
DEFAULT_X_MIN = -12.0
DEFAULT_X_MAX = 12.0
DEFAULT_N = 2001


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[x_min, x_max]`` with ``n`` points.

    Points are ``x_i = x_min + i*dx`` for ``i = 0..n-1`` with
    ``dx = (x_max - x_min)/(n - 1)``; they are reconstructible exactly from
    the three stored fields.
    """

    x_min: float
    x_max: float
    n: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParameterError(f"grid needs n >= 2 points, got n={self.n}")
        if not self.x_max > self.x_min:
            raise ParameterError(
                f"grid needs x_max > x_min, got [{self.x_min}, {self.x_max}]"
            )
        x = self.x_min + np.arange(self.n) * self.dx
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)


def default_grid() -> Grid:
    return Grid(DEFAULT_X_MIN, DEFAULT_X_MAX, DEFAULT_N)


@dataclass(frozen=True)
class GridDensity:
    """A nonnegative, unit-trapezoidal-mass density sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise DimensionMismatchError(
                f"density has shape {values.shape}, grid has n={self.grid.n}"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("density values must be finite")
        if np.any(values < 0.0):
            raise ParameterError("density values must be nonnegative")
        mass = float(self.grid.weights @ values)
        if abs(mass - 1.0) > MASS_TOL:
            raise DegenerateDensityError(
                f"density mass {mass!r} is not 1 within {MASS_TOL}; "
                "normalize() it first"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        return float(self.grid.weights @ self.values)


def _check_shared_grid(*densities: GridDensity) -> Grid:
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise DimensionMismatchError(
                f"densities live on different grids: {d.grid} vs {grid}"
            )
    return grid


def floored(values: np.ndarray) -> np.ndarray:
    """Clamp density values to ``DENSITY_FLOOR`` for ratio/power evaluation."""
    return np.maximum(values, DENSITY_FLOOR)


def trapezoid_integral(grid: Grid, values: np.ndarray) -> float:
    """Trapezoidal integral of ``values`` sampled on ``grid``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise DimensionMismatchError(
            f"values have shape {values.shape}, grid has n={grid.n}"
        )
    return float(grid.weights @ values)


def normalize(d: GridDensity | Grid, values: np.ndarray | None = None) -> GridDensity:
    """Scale a nonnegative vector to unit trapezoidal mass.

    Accepts either a ``GridDensity`` (renormalization cleanup, idempotent) or
    a ``(grid, values)`` pair for raw vectors that are not yet valid
    densities.

    Raises
    ------
    DegenerateDensityError
        If the trapezoidal mass of the input is not strictly positive.
    """
    if isinstance(d, GridDensity):
        grid, values = d.grid, d.values
    else:
        grid = d
        if values is None:
            raise ParameterError("normalize(grid, values) requires values")
    values = np.asarray(values, dtype=float)
    mass = trapezoid_integral(grid, values)
    if not mass > 0.0:
        raise DegenerateDensityError(f"cannot normalize mass {mass!r}")
    return GridDensity(grid, values / mass)


def gaussian_density(grid: Grid, mean: float, variance: float) -> GridDensity:
    """Normal density sampled on the grid, renormalized to unit grid mass.

    Renormalization compensates for the mass truncated outside the grid
    domain, so downstream constraint equations can assume exact unit mass.
    """
    if not variance > 0.0:
        raise ParameterError(f"variance must be positive, got {variance}")
    values = stats.norm.pdf(grid.x, loc=mean, scale=np.sqrt(variance))
    return normalize(grid, values)


def sample_from(d: GridDensity, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. points from ``d`` by inverse-CDF sampling.

    The CDF is the piecewise-linear interpolant of the cumulative trapezoidal
    masses at the grid nodes. Deterministic for a fixed seed.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    grid = d.grid
    cell_mass = 0.5 * grid.dx * (d.values[:-1] + d.values[1:])
    cdf = np.concatenate([[0.0], np.cumsum(cell_mass)])
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    return np.interp(u, cdf, grid.x)
