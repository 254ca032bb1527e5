"""Shared fixtures: grids and the two Gaussian testbeds used throughout."""
from __future__ import annotations

import numpy as np
import pytest

from robust_lfd import Grid, gaussian_density


@pytest.fixture(scope="session")
def wide_grid() -> Grid:
    """Fine grid wide enough that N(+-1,1) tails are negligible."""
    return Grid(-12.0, 12.0, 2001)


@pytest.fixture(scope="session")
def desk_grid() -> Grid:
    """The small everyday grid the convex programs run on."""
    return Grid(-6.0, 6.0, 201)


@pytest.fixture(scope="session")
def unit_pair(wide_grid):
    """Unit-variance nominals centered at -1 and +1."""
    return (
        gaussian_density(wide_grid, -1.0, 1.0),
        gaussian_density(wide_grid, 1.0, 1.0),
    )


@pytest.fixture(scope="session")
def band_pair(desk_grid):
    """Variance-4 nominals for the band studies."""
    return (
        gaussian_density(desk_grid, -1.0, 4.0),
        gaussian_density(desk_grid, 1.0, 4.0),
    )


def assert_unit_mass(grid, values, tol=1e-8):
    assert abs(float(grid.weights @ np.asarray(values)) - 1.0) < tol
