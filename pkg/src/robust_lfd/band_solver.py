"""One-sided contamination models: least favorable pairs and clipped LRFs.

Two degenerate band cases are handled here. In the *lower* model each
hypothesis class is ``{G : g >= (1-eps)*f}``, in the *upper* model
``{G : g <= (1+eps)*f}``. Writing ``l`` for the ratio of the bounding
functions, each clipping threshold solves a scalar unit-mass equation:

lower (bounds ``gj = (1-epsj)*fj``)::

    lfd0 = g0 on {l <= t_u},  (1/t_u)*g1 on {l > t_u}
    lfd1 = g1 on {l >= t_l},  t_l*g0     on {l < t_l}

upper (bounds ``gj = (1+epsj)*fj``)::

    lfd0 = g0 on {l >= t_l},  (1/t_l)*g1 on {l < t_l}
    lfd1 = g1 on {l <= t_u},  t_u*g0     on {l > t_u}

In both cases lfd1/lfd0 = clamp(l, t_l, t_u) pointwise and each unit-mass
residual is monotone in its threshold, so plain bisection is the primary
solver.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergence import likelihood_ratio
from .errors import (
    ClassOverlapError,
    ConvergenceError,
    DimensionMismatchError,
    ParameterError,
)
from .grid import GridDensity, _check_shared_grid, floored
from .rootfind import bisect

__all__ = [
    "ContaminationSpec",
    "ContaminationSolution",
    "solve_lower_contamination",
    "solve_upper_contamination",
    "smr_ordering_witness",
]

_MASS_POST_TOL = 1e-8
_F_TOL = 1e-12


@dataclass(frozen=True)
class ContaminationSpec:
    """One-sided contamination neighborhoods around nominal densities."""

    direction: str
    f0: GridDensity
    f1: GridDensity
    eps0: float
    eps1: float

    def __post_init__(self) -> None:
        _check_shared_grid(self.f0, self.f1)
        if self.direction not in ("lower", "upper"):
            raise ParameterError(
                f"direction must be 'lower' or 'upper', got {self.direction!r}"
            )
        for name, eps in (("eps0", self.eps0), ("eps1", self.eps1)):
            if self.direction == "lower":
                if not 0.0 <= eps < 1.0:
                    raise ParameterError(
                        f"lower model needs {name} in [0,1), got {eps}"
                    )
            elif eps <= 0.0 or not np.isfinite(eps):
                raise ParameterError(
                    f"upper model needs {name} > 0, got {eps}"
                )

    def bound0(self) -> np.ndarray:
        scale = (1.0 - self.eps0) if self.direction == "lower" else (1.0 + self.eps0)
        return scale * self.f0.values

    def bound1(self) -> np.ndarray:
        scale = (1.0 - self.eps1) if self.direction == "lower" else (1.0 + self.eps1)
        return scale * self.f1.values


@dataclass(frozen=True)
class ContaminationSolution:
    t_l: float
    t_u: float
    lfd0: GridDensity
    lfd1: GridDensity
    degenerate: bool = False


def _bound_ratio(spec: ContaminationSpec) -> np.ndarray:
    return floored(spec.bound1()) / floored(spec.bound0())


def _finish(
    spec: ContaminationSpec,
    t_l: float,
    t_u: float,
    lfd0v: np.ndarray,
    lfd1v: np.ndarray,
) -> ContaminationSolution:
    if t_l >= t_u:
        raise ClassOverlapError(
            f"solved thresholds do not separate (t_l={t_l} >= t_u={t_u}); "
            "the contamination classes overlap"
        )
    lfd0 = GridDensity(spec.f0.grid, lfd0v)
    lfd1 = GridDensity(spec.f0.grid, lfd1v)
    for d in (lfd0, lfd1):
        if abs(d.mass() - 1.0) > _MASS_POST_TOL:
            raise ConvergenceError(
                f"LFD mass {d.mass()} deviates from 1 beyond {_MASS_POST_TOL}",
                last_iterate=(t_l, t_u),
            )
    return ContaminationSolution(t_l=t_l, t_u=t_u, lfd0=lfd0, lfd1=lfd1)


def solve_lower_contamination(spec: ContaminationSpec) -> ContaminationSolution:
    """Thresholds and LFDs for the lower model by per-threshold bisection."""
    if spec.direction != "lower":
        raise ParameterError(f"expected direction 'lower', got {spec.direction!r}")
    grid = spec.f0.grid
    g0, g1 = spec.bound0(), spec.bound1()
    l = floored(g1) / floored(g0)
    if spec.eps0 == 0.0 and spec.eps1 == 0.0:
        return ContaminationSolution(
            t_l=float(l.min()),
            t_u=float(l.max()),
            lfd0=spec.f0,
            lfd1=spec.f1,
            degenerate=True,
        )
    wg0 = grid.weights * g0
    wg1 = grid.weights * g1

    def upper_residual(t: float) -> float:
        # 1 - [ int_{l<=t} g0 + (1/t) int_{l>t} g1 ], increasing in t.
        mask = l > t
        return 1.0 - (wg0[~mask].sum() + wg1[mask].sum() / t)

    def lower_residual(t: float) -> float:
        # int_{l>=t} g1 + t int_{l<t} g0 - 1, increasing in t.
        mask = l < t
        return wg1[~mask].sum() + t * wg0[mask].sum() - 1.0

    l_min, l_max = float(l.min()), float(l.max())
    t_u = bisect(
        upper_residual,
        min(l_min * (1.0 - 1e-9), 0.5 * (1.0 - spec.eps1)),
        l_max * (1.0 + 1e-9),
        f_tol=_F_TOL,
    )
    t_l = bisect(
        lower_residual,
        l_min * (1.0 - 1e-9),
        max(l_max * (1.0 + 1e-9), 2.0 / (1.0 - spec.eps0)),
        f_tol=_F_TOL,
    )

    up = l > t_u
    low = l < t_l
    lfd0v = np.where(up, g1 / t_u, g0)
    lfd1v = np.where(low, t_l * g0, g1)
    return _finish(spec, t_l, t_u, lfd0v, lfd1v)


def solve_upper_contamination(spec: ContaminationSpec) -> ContaminationSolution:
    """Thresholds and LFDs for the upper model by per-threshold bisection."""
    if spec.direction != "upper":
        raise ParameterError(f"expected direction 'upper', got {spec.direction!r}")
    grid = spec.f0.grid
    g0, g1 = spec.bound0(), spec.bound1()
    l = floored(g1) / floored(g0)
    wg0 = grid.weights * g0
    wg1 = grid.weights * g1

    def lower_residual(t: float) -> float:
        # 1 - [ int_{l>=t} g0 + (1/t) int_{l<t} g1 ], increasing in t.
        mask = l < t
        return 1.0 - (wg0[~mask].sum() + wg1[mask].sum() / t)

    def upper_residual(t: float) -> float:
        # int_{l<=t} g1 + t int_{l>t} g0 - 1, increasing in t.
        mask = l > t
        return wg1[~mask].sum() + t * wg0[mask].sum() - 1.0

    l_min, l_max = float(l.min()), float(l.max())
    t_l = bisect(
        lower_residual,
        l_min * (1.0 - 1e-9),
        max(l_max * (1.0 + 1e-9), 2.0 * (1.0 + spec.eps1)),
        f_tol=_F_TOL,
    )
    t_u = bisect(
        upper_residual,
        min(l_min * (1.0 - 1e-9), 0.5 / (1.0 + spec.eps0)),
        l_max * (1.0 + 1e-9),
        f_tol=_F_TOL,
    )

    low = l < t_l
    up = l > t_u
    lfd0v = np.where(low, g1 / t_l, g0)
    lfd1v = np.where(up, t_u * g0, g1)
    return _finish(spec, t_l, t_u, lfd0v, lfd1v)


def solve_contamination(spec: ContaminationSpec) -> ContaminationSolution:
    """Dispatch on spec.direction."""
    if spec.direction == "lower":
        return solve_lower_contamination(spec)
    return solve_upper_contamination(spec)


def smr_ordering_witness(
    sol: ContaminationSolution,
    spec: ContaminationSpec,
    t: float,
    h: GridDensity,
) -> tuple[float, float, float, float]:
    """Stochastic-ordering probe for one adversarial contamination h.

    Builds the class members G_j = (1 -+ eps_j)*f_j +- eps_j*h (sign per the
    model direction) and returns the four probabilities

        (G0[lhat < t], lfd0[lhat < t], G1[lhat < t], lfd1[lhat < t])

    where lhat = lfd1/lfd0 on the grid. The single-sample robustness of the
    solved pair is the pair of inequalities G0 >= lfd0 and G1 <= lfd1 here.
    """
    grid = _check_shared_grid(spec.f0, spec.f1, h, sol.lfd0, sol.lfd1)
    if not np.isfinite(t):
        raise ParameterError(f"threshold must be finite, got {t}")
    members = []
    for f, eps in ((spec.f0, spec.eps0), (spec.f1, spec.eps1)):
        if spec.direction == "lower":
            gv = (1.0 - eps) * f.values + eps * h.values
        else:
            gv = (1.0 + eps) * f.values - eps * h.values
            if gv.min() < -1e-12:
                raise ParameterError(
                    "contamination h exceeds the upper-model envelope: "
                    f"(1+eps)*f - eps*h dips to {gv.min()}"
                )
            gv = np.clip(gv, 0.0, None)
        members.append(gv)
    lhat = likelihood_ratio(sol.lfd1, sol.lfd0)
    event = lhat < t
    wev = grid.weights * event
    return (
        float(wev @ members[0]),
        float(wev @ sol.lfd0.values),
        float(wev @ members[1]),
        float(wev @ sol.lfd1.values),
    )
