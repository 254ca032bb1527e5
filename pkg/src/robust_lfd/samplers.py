"""Seeded generators of feasible members of the uncertainty classes.

Every sampler constructs members that satisfy the class constraints by
construction (no rejection steps), so downstream checks can attribute any
violation to the solver under test rather than to the sampling. Shapes are
drawn from monotone cubic interpolants of random knots, which stay inside
the knot range and therefore never overshoot prescribed bounds.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .band_general import BandSpec
from .band_solver import ContaminationSpec
from .errors import ParameterError
from .grid import Grid, GridDensity
from .rootfind import bisect
from .tv_solver import TVSpec


def _profile(grid: Grid, rng: np.random.Generator, lo: float, hi: float, knots: int = 9) -> np.ndarray:
    """Smooth random profile with values guaranteed inside [lo, hi]."""
    xk = np.linspace(grid.x_min, grid.x_max, knots)
    yk = rng.uniform(lo, hi, knots)
    return PchipInterpolator(xk, yk)(grid.x)


def _random_density(grid: Grid, rng: np.random.Generator) -> GridDensity:
    vals = _profile(grid, rng, 0.05, 1.0)
    return GridDensity(grid, vals / (grid.weights @ vals))


def _tv_perturb(f: GridDensity, eps: float, rng: np.random.Generator) -> GridDensity:
    """Member of the total-variation ball: move exactly delta <= eps of mass.

    Mass is removed proportionally to f on a random donor half of the grid
    and re-deposited with a random shape on the complement; because the
    added and removed parts have disjoint supports the total-variation
    distance to f equals the moved mass exactly.
    """
    grid = f.grid
    if eps == 0.0:
        return f
    shape = _profile(grid, rng, 0.0, 1.0)
    donor = shape > np.median(shape)
    if donor.all() or not donor.any():
        donor = grid.x < grid.x[grid.n // 2]
    w = grid.weights
    donor_mass = float((w * f.values)[donor].sum())
    delta = min(rng.uniform(0.2, 1.0) * eps, 0.9 * donor_mass)
    removal = np.where(donor, f.values, 0.0) / donor_mass
    add_shape = np.where(donor, 0.0, _profile(grid, rng, 0.1, 1.0))
    addition = add_shape / (w @ add_shape)
    return GridDensity(grid, f.values - delta * removal + delta * addition)


def tv_members(spec: TVSpec, count: int, seed: int) -> list[tuple[GridDensity, GridDensity]]:
    """Seeded pairs (G0, G1) from the total-variation neighborhoods."""
    rng = np.random.default_rng(seed)
    return [
        (_tv_perturb(spec.f0, spec.eps0, rng), _tv_perturb(spec.f1, spec.eps1, rng))
        for _ in range(count)
    ]


def contamination_h(spec: ContaminationSpec, count: int, seed: int) -> list[GridDensity]:
    """Contaminating densities h valid for the spec's direction.

    For the lower model any density works. For the upper model the member
    (1+eps)f - eps*h must stay nonnegative, so h is shaped as f times a
    bounded multiplicative perturbation; the amplitude is capped by the
    largest value that keeps every member nonnegative for the spec's radii.
    Bases alternate f0, f1, ... to line up with the slot order used by
    :func:`contamination_members` (an f1-shaped contaminant is not a valid
    adversary against f0: it overwhelms the f0 tail).
    """
    rng = np.random.default_rng(seed)
    grid = spec.f0.grid
    if spec.direction == "lower":
        return [_random_density(grid, rng) for _ in range(count)]
    eps = max(spec.eps0, spec.eps1)
    amp = min(0.5, 0.9 / (1.0 + 2.0 * eps))
    out = []
    for k in range(count):
        f = (spec.f0, spec.f1)[k % 2]
        psi = _profile(grid, rng, 1.0 - amp, 1.0 + amp)
        vals = f.values * psi
        out.append(GridDensity(grid, vals / (grid.weights @ vals)))
    return out


def contamination_members(
    spec: ContaminationSpec, count: int, seed: int
) -> list[tuple[GridDensity, GridDensity]]:
    """Seeded pairs (G0, G1) from the contamination classes."""
    hs = contamination_h(spec, 2 * count, seed)
    grid = spec.f0.grid
    out = []
    for i in range(count):
        pair = []
        for f, eps, h in ((spec.f0, spec.eps0, hs[2 * i]), (spec.f1, spec.eps1, hs[2 * i + 1])):
            if spec.direction == "lower":
                vals = (1.0 - eps) * f.values + eps * h.values
            else:
                vals = (1.0 + eps) * f.values - eps * h.values
                if vals.min() < -1e-12:
                    raise ParameterError("upper-model member dipped below zero")
                vals = np.clip(vals, 0.0, None)
            pair.append(GridDensity(grid, vals))
        out.append((pair[0], pair[1]))
    return out


def _band_member(lower: np.ndarray, upper: np.ndarray, grid: Grid, rng: np.random.Generator) -> GridDensity:
    """Random density between the bounds: a shifted clipped blend."""
    psi = _profile(grid, rng, 0.0, 1.0)
    gap = upper - lower

    def mass_gap(lam: float) -> float:
        c = np.clip(psi + lam, 0.0, 1.0)
        return float(grid.weights @ (lower + c * gap)) - 1.0

    lam = bisect(mass_gap, -1.5, 1.5, f_tol=1e-13)
    c = np.clip(psi + lam, 0.0, 1.0)
    return GridDensity(grid, lower + c * gap)


def band_members(spec: BandSpec, count: int, seed: int) -> list[tuple[GridDensity, GridDensity]]:
    """Seeded pairs (G0, G1) between the band bounds, unit mass each."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        g0 = _band_member(spec.g0_lower, spec.g0_upper, spec.grid, rng)
        g1 = _band_member(spec.g1_lower, spec.g1_upper, spec.grid, rng)
        out.append((g0, g1))
    return out
