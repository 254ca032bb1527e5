"""General band model: both lower and upper bounding functions active.

A band class is ``{G : gL <= g <= gU pointwise, G a density}``. The robust
LRF for a pair of band classes takes one of three shapes, distinguished by
how the two plateau constants ``k1`` and ``k2`` interleave the four
bound-ratio curves

    r_UL = g1U/g0L,  r_UU = g1U/g0U,  r_LL = g1L/g0L,  r_LU = g1L/g0U.

Type-A (k2 <= k1) walks r_UL -> k2 -> r_UU -> k1 -> r_LU; Type-C (k1 <= k2)
walks r_UL -> k1 -> r_LL -> k2 -> r_LU; Type-B has a single plateau with
interior densities that are not pinned at any bound and must be found
numerically. For Types A and C the two unit-mass equations decouple — the
lfd0 mass depends only on k2 and the lfd1 mass only on k1 — so each constant
is a scalar root-find. When the extreme ratio regions of a solved Type-A/C
structure are empty, the LRF has degenerated into a clipped likelihood ratio
and the solution is labeled ``clipped_limit``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClassOverlapError,
    ConvergenceError,
    DimensionMismatchError,
    InfeasibleClassError,
    ParameterError,
)
from .grid import Grid, GridDensity, floored
from .rootfind import bisect, damped_newton

__all__ = [
    "RULE_R_UL",
    "RULE_CONST_K2",
    "RULE_R_UU",
    "RULE_CONST_K1",
    "RULE_R_LU",
    "RULE_R_LL",
    "RULE_INTERIOR",
    "Region",
    "BandSpec",
    "BandSolution",
    "classify_regions",
    "solve_band",
    "band_overlap_diagnostic",
]

RULE_R_UL = "ratio g1U/g0L"
RULE_CONST_K2 = "const k2"
RULE_R_UU = "ratio g1U/g0U"
RULE_CONST_K1 = "const k1"
RULE_R_LU = "ratio g1L/g0U"
RULE_R_LL = "ratio g1L/g0L"
RULE_INTERIOR = "interior-numeric"

_MASS_F_TOL = 1e-11
_BOUND_TOL = 1e-10


def _runs(mask: np.ndarray) -> tuple[tuple[int, int], ...]:
    """Half-open index runs of True values."""
    if not mask.any():
        return ()
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return tuple((int(a), int(b)) for a, b in zip(edges[::2], edges[1::2]))


@dataclass(frozen=True)
class Region:
    """One template region: its rule and its (possibly empty) index runs."""

    rule: str
    intervals: tuple[tuple[int, int], ...]

    @property
    def empty(self) -> bool:
        return not self.intervals

    def point_count(self) -> int:
        return sum(b - a for a, b in self.intervals)

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        for a, b in self.intervals:
            m[a:b] = True
        return m


@dataclass(frozen=True)
class BandSpec:
    """Pointwise density bands for both hypotheses on a shared grid.

    The bounding functions are plain nonnegative vectors, not unit-mass
    densities; each band must be able to hold a density, i.e.
    ``integral(gL) <= 1 <= integral(gU)``.
    """

    grid: Grid
    g0_lower: np.ndarray
    g0_upper: np.ndarray
    g1_lower: np.ndarray
    g1_upper: np.ndarray

    def __post_init__(self) -> None:
        for name in ("g0_lower", "g0_upper", "g1_lower", "g1_upper"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n,):
                raise DimensionMismatchError(
                    f"{name} has shape {arr.shape}, expected ({self.grid.n},)"
                )
            if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
                raise ParameterError(f"{name} must be finite and nonnegative")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for j, (lo, up) in enumerate(
            ((self.g0_lower, self.g0_upper), (self.g1_lower, self.g1_upper))
        ):
            if np.any(lo > up * (1.0 + 1e-12) + 1e-300):
                raise ParameterError(
                    f"hypothesis {j}: lower bounding function exceeds the upper one"
                )
            m_lo = float(self.grid.weights @ lo)
            m_up = float(self.grid.weights @ up)
            if m_lo > 1.0 + 1e-9 or m_up < 1.0 - 1e-9:
                raise ParameterError(
                    f"hypothesis {j}: band cannot hold a density "
                    f"(lower mass {m_lo}, upper mass {m_up})"
                )

    def ratios(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(r_UL, r_UU, r_LL, r_LU) with the density floor applied."""
        g0l, g0u = floored(self.g0_lower), floored(self.g0_upper)
        g1l, g1u = floored(self.g1_lower), floored(self.g1_upper)
        return g1u / g0l, g1u / g0u, g1l / g0l, g1l / g0u


@dataclass(frozen=True)
class BandSolution:
    band_type: str
    k1: float
    k2: float
    lfd0: GridDensity
    lfd1: GridDensity
    lrf_regions: tuple[Region, ...]

    def lrf(self) -> np.ndarray:
        return floored(self.lfd1.values) / floored(self.lfd0.values)


def classify_regions(spec: BandSpec, k1: float, k2: float) -> tuple[Region, ...]:
    """Assign every grid point to a template region for the given constants.

    ``k2 < k1`` selects the Type-A template, ``k1 < k2`` Type-C, equality the
    merged three-region Type-B template. Each region's index runs are
    returned in template order; for non-monotone bound ratios a region may
    consist of several disjoint runs.
    """
    if not (k1 > 0.0 and k2 > 0.0):
        raise ParameterError(f"constants must be positive, got k1={k1}, k2={k2}")
    r_ul, r_uu, r_ll, r_lu = spec.ratios()
    if k2 < k1:
        masks = _type_a_masks(r_ul, r_uu, r_lu, k1, k2)
        rules = (RULE_R_UL, RULE_CONST_K2, RULE_R_UU, RULE_CONST_K1, RULE_R_LU)
    elif k1 < k2:
        masks = _type_c_masks(r_ul, r_ll, r_lu, k1, k2)
        rules = (RULE_R_UL, RULE_CONST_K1, RULE_R_LL, RULE_CONST_K2, RULE_R_LU)
    else:
        masks = _type_b_masks(r_ul, r_lu, k1)
        rules = (RULE_R_UL, RULE_INTERIOR, RULE_R_LU)
    return tuple(Region(rule, _runs(m)) for rule, m in zip(rules, masks))


def _type_a_masks(r_ul, r_uu, r_lu, k1, k2):
    m1 = r_ul <= k2
    m2 = ~m1 & (r_uu < k2)
    m3 = ~m1 & ~m2 & (r_uu <= k1)
    m4 = ~m1 & ~m2 & ~m3 & (r_lu < k1)
    m5 = ~m1 & ~m2 & ~m3 & ~m4
    return m1, m2, m3, m4, m5


def _type_c_masks(r_ul, r_ll, r_lu, k1, k2):
    m1 = r_ul <= k1
    m2 = ~m1 & (r_ll < k1)
    m3 = ~m1 & ~m2 & (r_ll <= k2)
    m4 = ~m1 & ~m2 & ~m3 & (r_lu < k2)
    m5 = ~m1 & ~m2 & ~m3 & ~m4
    return m1, m2, m3, m4, m5


def _type_b_masks(r_ul, r_lu, k1):
    m1 = r_ul <= k1
    m2 = ~m1 & (r_lu < k1)
    m3 = ~m1 & ~m2
    return m1, m2, m3


def _solve_constant(grid, residual_terms, lo, hi):
    """Root of a monotone-increasing unit-mass residual in log-space.

    ``residual_terms(k)`` returns ``(residual, d residual / d log k)``.
    """
    y_lo, y_hi = math.log(lo), math.log(hi)

    def f_df(y: float) -> tuple[float, float]:
        return residual_terms(math.exp(y))

    y = damped_newton(f_df, y_lo, y_hi, min(max(0.0, y_lo), y_hi),
                      f_tol=_MASS_F_TOL, max_iter=200)
    return math.exp(y)


def _try_analytic(spec: BandSpec, template: str) -> BandSolution | None:
    """Attempt the Type-A or Type-C analytic parameterization.

    Returns None when the solved constants violate the template's ordering
    condition (the structure belongs to another type).
    """
    grid = spec.grid
    w = grid.weights
    r_ul, r_uu, r_ll, r_lu = spec.ratios()
    g0l, g0u = spec.g0_lower, spec.g0_upper
    g1l, g1u = spec.g1_lower, spec.g1_upper

    if template == "A":
        # lfd1 = g1U on {r_UU <= k1}, k1*g0U between, g1L on {r_LU >= k1}.
        def mass1_terms(k: float) -> tuple[float, float]:
            s1 = r_uu <= k
            s2 = ~s1 & (r_lu < k)
            s3 = ~s1 & ~s2
            mid = float(w[s2] @ g0u[s2])
            res = float(w[s1] @ g1u[s1]) + k * mid + float(w[s3] @ g1l[s3]) - 1.0
            return res, k * mid

        # lfd0 = g0L on {r_UL <= k2}, (1/k2)*g1U between, g0U on {r_UU >= k2}.
        def mass0_terms(k: float) -> tuple[float, float]:
            a1 = r_ul <= k
            a2 = ~a1 & (r_uu < k)
            a3 = ~a1 & ~a2
            mid = float(w[a2] @ g1u[a2])
            mass = float(w[a1] @ g0l[a1]) + mid / k + float(w[a3] @ g0u[a3])
            return 1.0 - mass, mid / k

        k1 = _solve_constant(grid, mass1_terms, 0.5 * float(r_lu.min()),
                             2.0 * float(r_uu.max()))
        k2 = _solve_constant(grid, mass0_terms, 0.5 * float(r_uu.min()),
                             2.0 * float(r_ul.max()))
        if k2 > k1 * (1.0 + 1e-9):
            return None
        k2 = min(k2, k1)
        s1 = r_uu <= k1
        s2 = ~s1 & (r_lu < k1)
        lfd1v = np.where(s1, g1u, np.where(s2, k1 * g0u, g1l))
        a1 = r_ul <= k2
        a2 = ~a1 & (r_uu < k2)
        lfd0v = np.where(a1, g0l, np.where(a2, g1u / k2, g0u))
    elif template == "C":
        # lfd1 = g1U on {r_UL <= k1}, k1*g0L between, g1L on {r_LL >= k1}.
        def mass1_terms(k: float) -> tuple[float, float]:
            s1 = r_ul <= k
            s2 = ~s1 & (r_ll < k)
            s3 = ~s1 & ~s2
            mid = float(w[s2] @ g0l[s2])
            res = float(w[s1] @ g1u[s1]) + k * mid + float(w[s3] @ g1l[s3]) - 1.0
            return res, k * mid

        # lfd0 = g0L on {r_LL <= k2}, (1/k2)*g1L between, g0U on {r_LU >= k2}.
        def mass0_terms(k: float) -> tuple[float, float]:
            q1 = r_ll <= k
            q2 = ~q1 & (r_lu < k)
            q3 = ~q1 & ~q2
            mid = float(w[q2] @ g1l[q2])
            mass = float(w[q1] @ g0l[q1]) + mid / k + float(w[q3] @ g0u[q3])
            return 1.0 - mass, mid / k

        k1 = _solve_constant(grid, mass1_terms, 0.5 * float(r_ll.min()),
                             2.0 * float(r_ul.max()))
        k2 = _solve_constant(grid, mass0_terms, 0.5 * float(r_lu.min()),
                             2.0 * float(r_ll.max()))
        if k1 > k2 * (1.0 + 1e-9):
            return None
        k1 = min(k1, k2)
        s1 = r_ul <= k1
        s2 = ~s1 & (r_ll < k1)
        lfd1v = np.where(s1, g1u, np.where(s2, k1 * g0l, g1l))
        q1 = r_ll <= k2
        q2 = ~q1 & (r_lu < k2)
        lfd0v = np.where(q1, g0l, np.where(q2, g1l / k2, g0u))
    else:  # pragma: no cover - internal misuse
        raise ParameterError(f"unknown template {template!r}")

    regions = classify_regions(spec, k1, k2) if k1 != k2 else tuple(
        Region(rule, _runs(m))
        for rule, m in zip(
            (RULE_R_UL, RULE_CONST_K2, RULE_R_UU, RULE_CONST_K1, RULE_R_LU)
            if template == "A"
            else (RULE_R_UL, RULE_CONST_K1, RULE_R_LL, RULE_CONST_K2, RULE_R_LU),
            _type_a_masks(r_ul, r_uu, r_lu, k1, k2)
            if template == "A"
            else _type_c_masks(r_ul, r_ll, r_lu, k1, k2),
        )
    )
    band_type = template
    if regions[0].empty and regions[-1].empty:
        band_type = "clipped_limit"
    return _finish_band(spec, band_type, k1, k2, lfd0v, lfd1v, regions)


def _finish_band(spec, band_type, k1, k2, lfd0v, lfd1v, regions) -> BandSolution:
    for name, v, lo, up in (
        ("lfd0", lfd0v, spec.g0_lower, spec.g0_upper),
        ("lfd1", lfd1v, spec.g1_lower, spec.g1_upper),
    ):
        worst = max(float((lo - v).max()), float((v - up).max()))
        if worst > _BOUND_TOL:
            raise ConvergenceError(
                f"{name} leaves its band by {worst}", last_iterate=(k1, k2)
            )
        mass = float(spec.grid.weights @ v)
        if abs(mass - 1.0) > 1e-6:
            raise ConvergenceError(
                f"{name} mass {mass} is off unit", last_iterate=(k1, k2)
            )
    sol = BandSolution(
        band_type=band_type,
        k1=float(k1),
        k2=float(k2),
        lfd0=GridDensity(spec.grid, lfd0v),
        lfd1=GridDensity(spec.grid, lfd1v),
        lrf_regions=regions,
    )
    if float(np.abs(sol.lrf() - 1.0).max()) < 1e-9:
        raise ClassOverlapError("solved robust LRF is identically 1")
    return sol


def _psi_scan(spec: BandSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Type-B mass-balance residual over a log-spaced k grid.

    psi(k) = k*(1 - outer0(k)) - (1 - outer1(k)), where outer_j collects the
    pinned outer-region mass of lfd_j; a root makes the interior masses of
    the two LFDs consistent with a constant interior ratio k.
    """
    w = spec.grid.weights
    r_ul, _, _, r_lu = spec.ratios()
    ks = np.geomspace(
        max(0.5 * float(r_lu.min()), 1e-12),
        2.0 * float(r_ul.max()),
        4097,
    )
    order_ul = np.argsort(r_ul, kind="stable")
    cum0_l = np.concatenate(([0.0], np.cumsum((w * spec.g0_lower)[order_ul])))
    cum1_u = np.concatenate(([0.0], np.cumsum((w * spec.g1_upper)[order_ul])))
    n_b1 = np.searchsorted(r_ul[order_ul], ks, side="right")

    order_lu = np.argsort(r_lu, kind="stable")
    cum0_u = np.concatenate(([0.0], np.cumsum((w * spec.g0_upper)[order_lu])))
    cum1_l = np.concatenate(([0.0], np.cumsum((w * spec.g1_lower)[order_lu])))
    n_below = np.searchsorted(r_lu[order_lu], ks, side="left")

    outer0 = cum0_l[n_b1] + (cum0_u[-1] - cum0_u[n_below])
    outer1 = cum1_u[n_b1] + (cum1_l[-1] - cum1_l[n_below])
    psi = ks * (1.0 - outer0) - (1.0 - outer1)
    return ks, psi


def _psi_at(spec: BandSpec, k: float) -> float:
    w = spec.grid.weights
    r_ul, _, _, r_lu = spec.ratios()
    b1 = r_ul <= k
    b3 = ~b1 & ~(r_lu < k)
    outer0 = float(w[b1] @ spec.g0_lower[b1]) + float(w[b3] @ spec.g0_upper[b3])
    outer1 = float(w[b1] @ spec.g1_upper[b1]) + float(w[b3] @ spec.g1_lower[b3])
    return k * (1.0 - outer0) - (1.0 - outer1)


def _solve_type_b(spec: BandSpec) -> BandSolution:
    """Numerical Type-B path: convex engine profile plus scalar mass balance.

    The plateau constant solves a scalar equation; the interior densities are
    taken from the u = 0.5 affinity maximizer over the band box, clipped into
    the interior feasibility box and mass-corrected, so that all template
    identities hold to tight tolerance while the density *shape* in the
    interior is the optimizer's.
    """
    from .convex_solver import maximize_affinity_at_u, pointwise_bound_constraints

    grid = spec.grid
    w = grid.weights
    r_ul, _, _, r_lu = spec.ratios()

    c0 = pointwise_bound_constraints(grid, spec.g0_lower, spec.g0_upper, 0)
    c1 = pointwise_bound_constraints(grid, spec.g1_lower, spec.g1_upper, 1)
    g0_star, g1_star, _ = maximize_affinity_at_u(c0, c1, grid, 0.5)

    scale = float(spec.g0_upper.max())
    inner = (g0_star.values > spec.g0_lower + 1e-5 * scale) & (
        g0_star.values < spec.g0_upper - 1e-5 * scale
    )
    if inner.any():
        ratio = floored(g1_star.values[inner]) / floored(g0_star.values[inner])
        k_init = float(np.median(ratio))
    else:
        k_init = 1.0

    ks, psi = _psi_scan(spec)
    sign_flips = np.flatnonzero(np.sign(psi[:-1]) * np.sign(psi[1:]) < 0)
    exact = np.flatnonzero(psi == 0.0)
    if exact.size:
        k1 = float(ks[exact[np.argmin(np.abs(np.log(ks[exact] / k_init)))]])
    elif sign_flips.size:
        mids = np.sqrt(ks[sign_flips] * ks[sign_flips + 1])
        j = int(sign_flips[np.argmin(np.abs(np.log(mids / k_init)))])
        lo, hi = float(ks[j]), float(ks[j + 1])
        if psi[j] > 0.0:  # make the residual increasing through the root
            k1 = bisect(lambda k: -_psi_at(spec, k), lo, hi, f_tol=1e-13)
        else:
            k1 = bisect(lambda k: _psi_at(spec, k), lo, hi, f_tol=1e-13)
    else:
        raise InfeasibleClassError(
            "no mass-balance root for a three-region band structure"
        )

    b1 = r_ul <= k1
    b2 = ~b1 & (r_lu < k1)
    b3 = ~b1 & ~b2
    m0 = 1.0 - float(w[b1] @ spec.g0_lower[b1]) - float(w[b3] @ spec.g0_upper[b3])
    box_lo = np.maximum(spec.g0_lower[b2], spec.g1_lower[b2] / k1)
    box_hi = np.minimum(spec.g0_upper[b2], spec.g1_upper[b2] / k1)
    lo_mass = float(w[b2] @ box_lo)
    hi_mass = float(w[b2] @ box_hi)
    if not lo_mass - 1e-9 <= m0 <= hi_mass + 1e-9:
        raise ConvergenceError(
            f"interior mass {m0} falls outside the feasible range "
            f"[{lo_mass}, {hi_mass}]",
            last_iterate=k1,
        )
    profile = g0_star.values[b2]

    def mass_gap(lam: float) -> float:
        return float(w[b2] @ np.clip(profile + lam, box_lo, box_hi)) - m0

    lam_cap = float(box_hi.max()) + 1.0
    lam = bisect(mass_gap, -lam_cap, lam_cap, f_tol=1e-13)
    p = np.clip(profile + lam, box_lo, box_hi)

    lfd0v = np.where(b1, spec.g0_lower, spec.g0_upper)
    lfd1v = np.where(b1, spec.g1_upper, spec.g1_lower)
    lfd0v[b2] = p
    lfd1v[b2] = k1 * p
    regions = tuple(
        Region(rule, _runs(m))
        for rule, m in zip(
            (RULE_R_UL, RULE_INTERIOR, RULE_R_LU), _type_b_masks(r_ul, r_lu, k1)
        )
    )
    return _finish_band(spec, "B", k1, k1, lfd0v, lfd1v, regions)


def solve_band(spec: BandSpec) -> BandSolution:
    """Solve a band-model pair: try Type-A, then Type-C, then Type-B.

    The analytic attempts are cheap scalar root-finds whose ordering checks
    are decisive; the numerical Type-B path is the catch-all. A solved LRF
    that is identically 1 means the two bands overlap.
    """
    errors: list[Exception] = []
    for template in ("A", "C"):
        try:
            sol = _try_analytic(spec, template)
        except (InfeasibleClassError, ConvergenceError) as exc:
            errors.append(exc)
            continue
        if sol is not None:
            return sol
    try:
        return _solve_type_b(spec)
    except ClassOverlapError:
        raise
    except (InfeasibleClassError, ConvergenceError) as exc:
        errors.append(exc)
        raise InfeasibleClassError(
            "no band structure fits this spec: "
            + "; ".join(str(e) for e in errors)
        ) from exc


def band_overlap_diagnostic(sol: BandSolution) -> float:
    """Grid measure of the set where the robust LRF sits at 1.

    Measured in whole cells: dx times the number of adjacent grid-point
    pairs that both satisfy |lrf - 1| < 1e-6, so an isolated crossing
    through 1 has measure zero.
    """
    near_one = np.abs(sol.lrf() - 1.0) < 1e-6
    pairs = int(np.count_nonzero(near_one[:-1] & near_one[1:]))
    return float(sol.lfd0.grid.dx * pairs)
