"""Reference computations whose outputs are frozen into the test suite.

Every section prints constants that tests assert against. They are slow or
depend only on closed-form/Monte-Carlo machinery deliberately distinct from
the library's own solvers, so they run offline:

* ``huber``    -- clipping thresholds for contamination classes around
                  N(-1,1)/N(+1,1) computed on the continuous line with the
                  Gaussian CDF and Brent root-finding (no grids anywhere).
* ``moment``   -- a 41-point moment-box problem maximized by randomized
                  chord ascent (hit-and-run directions, golden line search),
                  never touching the conic solver stack.
* ``clipped``  -- sup-distance between the band solution's clipped ratio and
                  the plain contamination clipped ratio as the upper band
                  scale grows (documents the convergence rate).

Usage: python3 tools/make_oracles.py [huber|moment|clipped|all]
"""
from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm


# ---------------------------------------------------------------------------
# Section: huber
# ---------------------------------------------------------------------------

def huber_lower(eps0: float, eps1: float) -> tuple[float, float]:
    """Continuous-line clipping thresholds, lower model around N(-/+1,1).

    The class bounds are (1-eps_j) f_j, their ratio is rho*exp(2x) with
    rho = (1-eps1)/(1-eps0); each unit-mass equation is scalar and monotone
    in its threshold.
    """
    rho = (1.0 - eps1) / (1.0 - eps0)

    def upper_eq(t: float) -> float:
        x = math.log(t / rho) / 2.0
        return (
            (1.0 - eps0) * norm.cdf(x + 1.0)
            + (1.0 - eps1) * (1.0 - norm.cdf(x - 1.0)) / t
            - 1.0
        )

    def lower_eq(t: float) -> float:
        x = math.log(t / rho) / 2.0
        return (
            (1.0 - eps1) * (1.0 - norm.cdf(x - 1.0))
            + t * (1.0 - eps0) * norm.cdf(x + 1.0)
            - 1.0
        )

    t_u = brentq(upper_eq, 1.0, 1e6, xtol=1e-14, rtol=1e-15)
    t_l = brentq(lower_eq, 1e-6, 1.0, xtol=1e-14, rtol=1e-15)
    return t_l, t_u


def huber_upper(eps0: float, eps1: float) -> tuple[float, float]:
    """Continuous-line clipping thresholds, upper model around N(-/+1,1)."""
    rho = (1.0 + eps1) / (1.0 + eps0)

    def lower_eq(t: float) -> float:
        x = math.log(t / rho) / 2.0
        return (
            (1.0 + eps0) * (1.0 - norm.cdf(x + 1.0))
            + (1.0 + eps1) * norm.cdf(x - 1.0) / t
            - 1.0
        )

    def upper_eq(t: float) -> float:
        x = math.log(t / rho) / 2.0
        return (
            (1.0 + eps1) * norm.cdf(x - 1.0)
            + t * (1.0 + eps0) * (1.0 - norm.cdf(x + 1.0))
            - 1.0
        )

    t_l = brentq(lower_eq, 1e-9, 1.0, xtol=1e-16, rtol=1e-15)
    t_u = brentq(upper_eq, 1.0, 1e9, xtol=1e-10, rtol=1e-15)
    return t_l, t_u


def section_huber() -> None:
    print("# continuous-line contamination thresholds (freeze into tests)")
    for eps0, eps1 in ((0.1, 0.1), (0.05, 0.15)):
        t_l, t_u = huber_lower(eps0, eps1)
        print(f"lower eps=({eps0},{eps1}): t_l={t_l!r} t_u={t_u!r}")
    t_l, t_u = huber_upper(0.1, 0.1)
    print(f"upper eps=(0.1,0.1): t_l={t_l!r} t_u={t_u!r}")


# ---------------------------------------------------------------------------
# Section: moment
# ---------------------------------------------------------------------------

TOY_N = 41
TOY_SPAN = 2.0
# mean box / second-moment box per hypothesis, scaled down so the toy grid
# [-2, 2] supports them comfortably
TOY_BOUNDS0 = ((-2.0 / 3.0, -1.0 / 6.0), (0.0, 2.0 / 3.0))
TOY_BOUNDS1 = ((1.0 / 6.0, 2.0 / 3.0), (2.0 / 3.0, 4.0 / 3.0))


def _toy_rows(x: np.ndarray, w: np.ndarray):
    return np.vstack([w * x, w * x**2])


def _feasible_start(x, w, bounds) -> np.ndarray:
    """A strictly positive feasible density: maximize the minimum value.

    A plain feasibility LP returns a vertex, i.e. a near-atomic density;
    starting both hypotheses from vertices can leave the geometric-mean
    objective identically zero (disjoint supports), stalling the ascent.
    Maximizing an auxiliary floor variable yields an interior start.
    """
    from scipy.optimize import linprog

    n = x.size
    rows = _toy_rows(x, w)
    a_box = np.vstack([rows, -rows])
    b_box = np.array([bounds[0][1], bounds[1][1], -bounds[0][0], -bounds[1][0]])
    # variables (g, s): rows [A 0] for the boxes, [-I 1] for g_i >= s
    a_ub = np.vstack(
        [
            np.hstack([a_box, np.zeros((a_box.shape[0], 1))]),
            np.hstack([-np.eye(n), np.ones((n, 1))]),
        ]
    )
    b_ub = np.concatenate([b_box, np.zeros(n)])
    res = linprog(
        c=np.concatenate([np.zeros(n), [-1.0]]),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.concatenate([w, [0.0]])[None, :],
        b_eq=[1.0],
        bounds=[(0.0, None)] * n + [(0.0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"toy start infeasible: {res.message}")
    if res.x[-1] <= 0.0:
        raise RuntimeError("no strictly positive feasible density")
    return res.x[:n]


def _chord(g, d, rows, lo, hi, vals):
    """Feasible step range for g + a*d against g>=0 and the moment boxes."""
    a_lo, a_hi = -np.inf, np.inf
    neg, pos = d < -1e-14, d > 1e-14
    if pos.any():
        a_lo = max(a_lo, float((-g[pos] / d[pos]).max()))
    if neg.any():
        a_hi = min(a_hi, float((g[neg] / -d[neg]).min()))
    rd = rows @ d
    for k in range(rows.shape[0]):
        if abs(rd[k]) < 1e-16:
            continue
        steps = sorted(((lo[k] - vals[k]) / rd[k], (hi[k] - vals[k]) / rd[k]))
        a_lo, a_hi = max(a_lo, steps[0]), min(a_hi, steps[1])
    return a_lo, a_hi


def _golden_max(f, a, b, tol=1e-12):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while d - c > tol:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
    return (a + b) / 2.0


def ascend_toy(iters: int = 150_000, seed: int = 42, trace: bool = False) -> float:
    """Randomized chord ascent of the u=1/2 affinity on the toy problem.

    Alternates hypotheses; per step draws a random mass-preserving
    direction — a dense Gaussian one or a two-point mass exchange, the
    latter matching the polytope's edges — intersects it with the feasible
    set, and solves the concave one-dimensional slice by golden search.
    Deterministic per seed.
    """
    x = np.linspace(-TOY_SPAN, TOY_SPAN, TOY_N)
    w = np.full(TOY_N, x[1] - x[0])
    w[0] /= 2.0
    w[-1] /= 2.0
    rows = _toy_rows(x, w)
    lo0 = np.array([TOY_BOUNDS0[0][0], TOY_BOUNDS0[1][0]])
    hi0 = np.array([TOY_BOUNDS0[0][1], TOY_BOUNDS0[1][1]])
    lo1 = np.array([TOY_BOUNDS1[0][0], TOY_BOUNDS1[1][0]])
    hi1 = np.array([TOY_BOUNDS1[0][1], TOY_BOUNDS1[1][1]])
    g = [_feasible_start(x, w, TOY_BOUNDS0), _feasible_start(x, w, TOY_BOUNDS1)]
    boxes = [(lo0, hi0), (lo1, hi1)]
    rng = np.random.default_rng(seed)
    act_tol = 1e-9

    def active_matrix(j):
        """Mass row plus every moment row sitting on a box edge."""
        vals = rows @ g[j]
        lo, hi = boxes[j]
        on_edge = (vals - lo < act_tol) | (hi - vals < act_tol)
        return np.vstack([w[None, :], rows[on_edge]])

    def dense_dir(j, project_face):
        d = rng.standard_normal(TOY_N)
        a = active_matrix(j) if project_face else w[None, :]
        return d - np.linalg.pinv(a) @ (a @ d)

    def sparse_dir(j):
        """A direction touching few coordinates, tangent to the face."""
        a = active_matrix(j)
        idx = rng.choice(TOY_N, size=min(a.shape[0] + 2, TOY_N), replace=False)
        _, s, vt = np.linalg.svd(a[:, idx])
        null = vt[np.count_nonzero(s > 1e-12) :]
        if null.shape[0] == 0:
            return None
        d = np.zeros(TOY_N)
        d[idx] = rng.standard_normal(null.shape[0]) @ null
        return d

    def grad_dir(j):
        """Face-projected steepest ascent; floored where the density dies."""
        other = g[1 - j]
        d = 0.5 * w * np.sqrt(other / np.maximum(g[j], 1e-12))
        a = active_matrix(j)
        d = d - np.linalg.pinv(a) @ (a @ d)
        neg = (g[j] <= 0.0) & (d < 0.0)
        d[neg] = 0.0
        return d

    def vertex_dir(j):
        """Toward the best vertex of the linearized objective (an LP)."""
        from scipy.optimize import linprog

        grad = 0.5 * w * np.sqrt(g[1 - j] / np.maximum(g[j], 1e-12))
        lo, hi = boxes[j]
        res = linprog(
            c=-grad,
            A_ub=np.vstack([rows, -rows]),
            b_ub=np.concatenate([hi, -lo]),
            A_eq=w[None, :],
            b_eq=[1.0],
            bounds=(0.0, None),
            method="highs",
        )
        if not res.success:
            return None
        return res.x - g[j]

    for it in range(iters):
        # moves tangent to the currently active box edges keep the chord
        # long once the optimum's face is reached; unprojected moves let a
        # wrongly grabbed edge release; joint moves un-jam coordinates
        # where both densities vanish
        kind = rng.integers(6)
        zero = np.zeros(TOY_N)
        if kind == 0:
            dirs = [dense_dir(0, rng.random() < 0.8), zero]
        elif kind == 1:
            dirs = [sparse_dir(0), zero]
        elif kind == 2:
            dirs = [dense_dir(0, True), dense_dir(1, True)]
        elif kind == 3:
            dirs = [sparse_dir(0), sparse_dir(1)]
        elif kind == 4:
            dirs = [grad_dir(0), grad_dir(1)]
        else:
            dirs = [vertex_dir(0), vertex_dir(1)]
        if it % 2 and kind < 2:
            dirs.reverse()
        if any(d is None for d in dirs):
            continue
        a_lo, a_hi = -np.inf, np.inf
        for j in (0, 1):
            if np.any(dirs[j]):
                lims = _chord(g[j], dirs[j], rows, *boxes[j], rows @ g[j])
                a_lo, a_hi = max(a_lo, lims[0]), min(a_hi, lims[1])
        if not (a_lo < a_hi):
            continue

        def slice_obj(a):
            p0 = np.clip(g[0] + a * dirs[0], 0.0, None)
            p1 = np.clip(g[1] + a * dirs[1], 0.0, None)
            return float(w @ np.sqrt(p0 * p1))

        best = _golden_max(slice_obj, a_lo, a_hi)
        for j in (0, 1):
            if np.any(dirs[j]):
                g[j] = np.clip(g[j] + best * dirs[j], 0.0, None)
                g[j] /= w @ g[j]
        if trace and (it + 1) % 20_000 == 0:
            val = float(w @ np.sqrt(g[0] * g[1]))
            print(f"  iter {it + 1}: {val:.10f}")
    worst = 0.0
    for j in (0, 1):
        vals = rows @ g[j]
        lo, hi = boxes[j]
        worst = max(worst, float((lo - vals).max()), float((vals - hi).max()))
    if worst > 1e-8:
        raise RuntimeError(f"ascent drifted infeasible by {worst}")
    ascend_toy.last_state = (g[0].copy(), g[1].copy())
    return float(w @ np.sqrt(g[0] * g[1]))


def section_moment() -> None:
    t0 = time.perf_counter()
    val = ascend_toy(trace=True)
    dt = time.perf_counter() - t0
    print(f"# toy 41-point moment problem, u = 0.5 (freeze into tests)")
    print(f"chord-ascent affinity: {val!r}   ({dt:.0f}s)")
    try:
        from robust_lfd import Grid, maximize_affinity_at_u, moment_constraint

        grid = Grid(-TOY_SPAN, TOY_SPAN, TOY_N)
        c0 = [
            moment_constraint(grid, 1, *TOY_BOUNDS0[0], 0),
            moment_constraint(grid, 2, *TOY_BOUNDS0[1], 0),
        ]
        c1 = [
            moment_constraint(grid, 1, *TOY_BOUNDS1[0], 1),
            moment_constraint(grid, 2, *TOY_BOUNDS1[1], 1),
        ]
        _, _, obj = maximize_affinity_at_u(c0, c1, grid, 0.5)
        print(f"conic solver affinity: {obj!r}   gap {abs(obj - val):.2e}")
    except ImportError:
        print("robust_lfd not importable; solver comparison skipped")


# ---------------------------------------------------------------------------
# Section: clipped
# ---------------------------------------------------------------------------

def section_clipped() -> None:
    from robust_lfd import (
        BandSpec,
        ContaminationSpec,
        Grid,
        gaussian_density,
        solve_band,
        solve_contamination,
    )

    print("# clipped-limit approach of the band solution (ledger material)")
    for label, (x_min, x_max, n) in (
        ("desk", (-6.0, 6.0, 201)),
        ("wide", (-12.0, 12.0, 2001)),
    ):
        grid = Grid(x_min, x_max, n)
        f0 = gaussian_density(grid, -1.0, 4.0).values
        f1 = gaussian_density(grid, 1.0, 4.0).values
        csol = solve_contamination(
            ContaminationSpec(
                direction="lower",
                f0=gaussian_density(grid, -1.0, 4.0),
                f1=gaussian_density(grid, 1.0, 4.0),
                eps0=0.2,
                eps1=0.2,
            )
        )
        ratio = (0.8 * f1) / np.maximum(0.8 * f0, 1e-300)
        clipped = np.clip(ratio, csol.t_l, csol.t_u)
        print(f"[{label}] contamination t_l={csol.t_l:.9f} t_u={csol.t_u:.9f}")
        for scale in (5.0, 10.0, 19.0, 50.0):
            bsol = solve_band(
                BandSpec(
                    grid=grid,
                    g0_lower=0.8 * f0,
                    g0_upper=(1.0 + scale) * f0,
                    g1_lower=0.8 * f1,
                    g1_upper=(1.0 + scale) * f1,
                )
            )
            sup = float(np.abs(bsol.lrf() - clipped).max())
            print(
                f"[{label}] scale {scale:5.1f}: type={bsol.band_type:14s} "
                f"|k1-t_l|={abs(bsol.k1 - csol.t_l):.2e} "
                f"|k2-t_u|={abs(bsol.k2 - csol.t_u):.2e} sup|lrf-clip|={sup:.3e}"
            )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "section",
        nargs="?",
        default="all",
        choices=("huber", "moment", "clipped", "all"),
    )
    args = parser.parse_args(argv)
    if args.section in ("huber", "all"):
        section_huber()
    if args.section in ("moment", "all"):
        section_moment()
    if args.section in ("clipped", "all"):
        section_clipped()
    return 0


if __name__ == "__main__":
    sys.exit(main())
