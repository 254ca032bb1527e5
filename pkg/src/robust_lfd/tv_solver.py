"""Least favorable pairs under total variation neighborhoods.

The two classes are TV balls of radius ``eps0`` / ``eps1`` around nominal
densities ``f0`` / ``f1``. The robust likelihood-ratio function is the nominal
ratio ``l = f1/f0`` clipped to ``[t_l, t_u]``, and the thresholds solve the
decoupled residual system

    R_l(t_l) = integral over {l < t_l} of (t_l*f0 - f1)  - eps0*t_l - eps1 = 0
    R_u(t_u) = integral over {l > t_u} of (f1 - t_u*f0)  - eps0*t_u - eps1 = 0.

The least favorable pair mixes the nominals on the clipping regions:

    lfd0 = (1 - beta*t_l)*f0 + beta*f1   on {l < t_l}
         = f0                            on the middle region
         = (1 - sigma*t_u)*f0 + sigma*f1 on {l > t_u}
    lfd1 = clip(l, t_l, t_u) * lfd0

with beta = eps0 / integral_{l<t_l}(t_l*f0 - f1) and
sigma = eps0 / integral_{l>t_u}(f1 - t_u*f0). Because beta and sigma are
computed from the same masked trapezoidal sums as the residuals, unit mass and
TV-constraint activity hold to float roundoff at the solved thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .divergence import likelihood_ratio, tv_distance
from .errors import (
    ClassOverlapError,
    ConvergenceError,
    DomainError,
    InfeasibleClassError,
    ParameterError,
)
from .grid import GridDensity, _check_shared_grid
from .rootfind import damped_newton

__all__ = ["TVSpec", "TVSolution", "tv_residuals", "solve_tv", "eval_clipped_lrf"]

_RESIDUAL_TOL = 1e-10
_POST_TOL = 1e-6


@dataclass(frozen=True)
class TVSpec:
    """Total variation neighborhoods with (possibly unequal) radii."""

    f0: GridDensity
    f1: GridDensity
    eps0: float
    eps1: float

    def __post_init__(self) -> None:
        _check_shared_grid(self.f0, self.f1)
        for name, eps in (("eps0", self.eps0), ("eps1", self.eps1)):
            if not 0.0 <= eps < 1.0:
                raise ParameterError(f"{name} must lie in [0,1), got {eps}")
        if tv_distance(self.f0, self.f1) <= self.eps0 + self.eps1:
            raise ClassOverlapError(
                "TV classes are not disjoint: tv_distance(f0,f1) <= eps0 + eps1"
            )


@dataclass(frozen=True)
class TVSolution:
    """Clipping thresholds, mixing coefficients and the least favorable pair."""

    t_l: float
    t_u: float
    beta: float
    sigma: float
    lfd0: GridDensity
    lfd1: GridDensity
    degenerate: bool = False
    residuals: tuple[float, float] = field(default=(0.0, 0.0))


def _masked_sums(l: np.ndarray, wv: np.ndarray, mask: np.ndarray) -> float:
    return float(wv[mask].sum())


def tv_residuals(spec: TVSpec, t_l: float, t_u: float) -> tuple[float, float]:
    """Residual pair (R_l, R_u) of the threshold system at (t_l, t_u).

    Regions are evaluated against the nominal ratio l = f1/f0; points with
    l == t_l or l == t_u belong to the middle region.
    """
    if not (t_l > 0.0 and np.isfinite(t_l) and t_u > 0.0 and np.isfinite(t_u)):
        raise ParameterError(f"thresholds must be positive finite, got {t_l}, {t_u}")
    grid = spec.f0.grid
    l = likelihood_ratio(spec.f1, spec.f0)
    wf0 = grid.weights * spec.f0.values
    wf1 = grid.weights * spec.f1.values
    low = l < t_l
    up = l > t_u
    r_l = t_l * _masked_sums(l, wf0, low) - _masked_sums(l, wf1, low) \
        - spec.eps0 * t_l - spec.eps1
    r_u = _masked_sums(l, wf1, up) - t_u * _masked_sums(l, wf0, up) \
        - spec.eps0 * t_u - spec.eps1
    return r_l, r_u


def _weighted_quantile(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """Smallest v with cumulative weight >= p (weights assumed to sum to ~1)."""
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, min(max(p, 0.0), cum[-1])))
    return float(values[order][min(idx, len(values) - 1)])


def solve_tv(spec: TVSpec) -> TVSolution:
    """Solve the threshold system and build the least favorable pair.

    Both radii must be strictly positive; the fully degenerate case
    eps0 = eps1 = 0 short-circuits to the nominal pair with the unclipped
    ratio. Mixed zero radii are rejected.
    """
    grid = spec.f0.grid
    f0v, f1v = spec.f0.values, spec.f1.values
    l = likelihood_ratio(spec.f1, spec.f0)

    if spec.eps0 == 0.0 and spec.eps1 == 0.0:
        return TVSolution(
            t_l=float(l.min()),
            t_u=float(l.max()),
            beta=0.0,
            sigma=0.0,
            lfd0=spec.f0,
            lfd1=spec.f1,
            degenerate=True,
        )
    if spec.eps0 == 0.0 or spec.eps1 == 0.0:
        raise ParameterError(
            "solve_tv needs both radii strictly positive (or both zero for the "
            f"degenerate path); got eps0={spec.eps0}, eps1={spec.eps1}"
        )

    wf0 = grid.weights * f0v
    wf1 = grid.weights * f1v
    eps0, eps1 = spec.eps0, spec.eps1

    def rl_and_slope(t: float) -> tuple[float, float]:
        mask = l < t
        a0 = float(wf0[mask].sum())
        a1 = float(wf1[mask].sum())
        return t * a0 - a1 - eps0 * t - eps1, a0 - eps0

    def neg_ru_and_slope(t: float) -> tuple[float, float]:
        mask = l > t
        b0 = float(wf0[mask].sum())
        b1 = float(wf1[mask].sum())
        return -(b1 - t * b0 - eps0 * t - eps1), b0 + eps0

    l_min, l_max = float(l.min()), float(l.max())
    p = 2.0 * eps1 + eps0
    t_l0 = _weighted_quantile(l, wf0, p)
    t_u0 = _weighted_quantile(l, wf1, 1.0 - p)
    try:
        t_l = damped_newton(
            rl_and_slope, l_min * (1.0 - 1e-12), 1.0, t_l0, f_tol=_RESIDUAL_TOL
        )
        t_u = damped_newton(
            neg_ru_and_slope, 1.0, l_max * (1.0 + 1e-12), t_u0, f_tol=_RESIDUAL_TOL
        )
    except InfeasibleClassError as exc:
        raise InfeasibleClassError(
            f"threshold system has no bracketed root for radii "
            f"({eps0}, {eps1}): {exc}"
        ) from exc

    low = l < t_l
    up = l > t_u
    d_l = t_l * float(wf0[low].sum()) - float(wf1[low].sum())
    d_u = float(wf1[up].sum()) - t_u * float(wf0[up].sum())
    if d_l < 1e-12 or d_u < 1e-12:
        raise InfeasibleClassError(
            "clipping region cannot absorb the TV budget "
            f"(denominators {d_l}, {d_u})"
        )
    beta = eps0 / d_l
    sigma = eps0 / d_u

    lfd0v = f0v.copy()
    lfd0v[low] = (1.0 - beta * t_l) * f0v[low] + beta * f1v[low]
    lfd0v[up] = (1.0 - sigma * t_u) * f0v[up] + sigma * f1v[up]
    lfd1v = f1v.copy()
    lfd1v[low] = t_l * lfd0v[low]
    lfd1v[up] = t_u * lfd0v[up]

    lfd0 = GridDensity(grid, lfd0v)
    lfd1 = GridDensity(grid, lfd1v)

    for d, f, eps in ((lfd0, spec.f0, eps0), (lfd1, spec.f1, eps1)):
        if abs(d.mass() - 1.0) > _POST_TOL or abs(tv_distance(d, f) - eps) > _POST_TOL:
            raise ConvergenceError(
                "post-conditions violated: mass or TV activity off at the "
                f"solved thresholds ({t_l}, {t_u})",
                last_iterate=(t_l, t_u),
            )
    return TVSolution(
        t_l=t_l,
        t_u=t_u,
        beta=beta,
        sigma=sigma,
        lfd0=lfd0,
        lfd1=lfd1,
        residuals=tv_residuals(spec, t_l, t_u),
    )


def eval_clipped_lrf(sol: TVSolution, spec: TVSpec, x):
    """Robust likelihood ratio clamp(l(x), t_l, t_u) at point(s) x.

    The nominal ratio is interpolated linearly between grid points. Scalar in,
    scalar out; array in, array out. Points outside the grid domain raise.
    """
    grid = spec.f0.grid
    xs = np.asarray(x, dtype=float)
    if np.any(xs < grid.x_min) or np.any(xs > grid.x_max):
        raise DomainError(
            f"evaluation points must lie in [{grid.x_min}, {grid.x_max}]"
        )
    l = likelihood_ratio(spec.f1, spec.f0)
    vals = np.clip(np.interp(xs, grid.x, l), sol.t_l, sol.t_u)
    return float(vals) if np.isscalar(x) else vals
