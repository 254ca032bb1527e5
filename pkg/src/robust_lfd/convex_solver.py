"""Convex programs for least favorable densities under linear constraints.

The inner problem discretizes

    maximize   sum_i w_i * g1_i^u * g0_i^(1-u)
    over       g0, g1 >= 0,  sum_i w_i * gj_i = 1,
    subject to lower <= sum_i w_i * h_i * gj_i <= upper   (per constraint)

on a shared grid with trapezoid weights ``w``. The objective is concave for
fixed ``u`` in (0,1) and is modeled exactly with one three-dimensional power
cone per grid point. The outer problem minimizes the inner optimum over
``u`` by a coarse scan refined with golden-section search.

The optimality contract is certificate-based: every inner solution is
re-verified with an independently computed KKT residual (projected
stationarity of the true gradient onto the active constraint set, plus
complementary slackness), not by trusting the solver's own status.

Constraint values are always integrals: a :class:`LinearConstraint` holds
``h`` samples and the evaluation applies the quadrature weights. Pointwise
band boxes enter as one-hot constraints, which the engine recognizes and
passes to the solvers as variable bounds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
from scipy import optimize as sciopt
from scipy.optimize import lsq_linear

from .divergence import check_u, u_affinity
from .errors import (
    ClassOverlapError,
    ConvergenceError,
    DimensionMismatchError,
    InfeasibleClassError,
    ParameterError,
)
from .grid import Grid, GridDensity, _check_shared_grid, floored

__all__ = [
    "CONVEX_DEFAULT_N",
    "LinearConstraint",
    "ConvexLFDResult",
    "convex_grid",
    "moment_constraint",
    "ppoint_constraint",
    "pointwise_bound_constraints",
    "evaluate_constraint",
    "maximize_affinity_at_u",
    "minimize_over_u",
    "u_dependence_metric",
    "kkt_certificate",
]

CONVEX_DEFAULT_N = 201
_FEAS_TOL = 1e-7
_KKT_TOL = 1e-6
_POLISH_TRIGGER = 1e-8
_ACTIVE_ATOL = 1e-6
_STRONG_TOL = 1e-3
_SOLVERS = ("CLARABEL", "SCS")


def convex_grid(x_min: float = -6.0, x_max: float = 6.0, n: int = CONVEX_DEFAULT_N) -> Grid:
    """Desk-scale grid for the optimization modules (coarser than analytic)."""
    return Grid(x_min, x_max, n)


@dataclass(frozen=True)
class LinearConstraint:
    """One linear functional bound on a hypothesis density.

    ``weights`` are samples of the integrand ``h`` (moment powers, indicator
    of a p-point set, or a one-hot vector for a pointwise bound); the
    constrained value is ``sum_i grid.weights_i * weights_i * g_i``.
    ``target`` selects the hypothesis (0 or 1). Either bound may be
    infinite.
    """

    weights: np.ndarray
    lower: float
    upper: float
    target: int

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ParameterError(f"weights must be a vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ParameterError("constraint weights must be finite")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        lo, up = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(up):
            raise ParameterError("constraint bounds must not be NaN")
        if lo > up:
            raise ParameterError(f"constraint bounds cross: {lo} > {up}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if self.target not in (0, 1):
            raise ParameterError(f"target must be 0 or 1, got {self.target!r}")


@dataclass(frozen=True)
class ConvexLFDResult:
    u_star: float
    lfd0: GridDensity
    lfd1: GridDensity
    objective: float
    kkt_residual: float
    active_constraints: tuple[int, ...]
    profile: tuple[tuple[float, float], ...]


def moment_constraint(
    grid: Grid, power: int, lower: float, upper: float, target: int
) -> LinearConstraint:
    """lower <= E_G[Y^power] <= upper."""
    if power < 1:
        raise ParameterError(f"moment power must be >= 1, got {power}")
    return LinearConstraint(grid.x**power, lower, upper, target)


def ppoint_constraint(
    grid: Grid, a: float, b: float, lower: float, upper: float, target: int
) -> LinearConstraint:
    """lower <= G([a, b)) <= upper, half-open so adjacent sets never overlap."""
    if not a < b:
        raise ParameterError(f"need a < b, got [{a}, {b})")
    ind = ((grid.x >= a) & (grid.x < b)).astype(float)
    return LinearConstraint(ind, lower, upper, target)


def pointwise_bound_constraints(
    grid: Grid,
    lower_values: np.ndarray,
    upper_values: np.ndarray,
    target: int,
) -> list[LinearConstraint]:
    """One one-hot constraint per grid point encoding lower <= g <= upper."""
    lo = np.asarray(lower_values, dtype=float)
    up = np.asarray(upper_values, dtype=float)
    if lo.shape != (grid.n,) or up.shape != (grid.n,):
        raise DimensionMismatchError(
            f"bound vectors must have shape ({grid.n},), got {lo.shape}, {up.shape}"
        )
    out = []
    for i in range(grid.n):
        e = np.zeros(grid.n)
        e[i] = 1.0
        out.append(
            LinearConstraint(e, grid.weights[i] * lo[i], grid.weights[i] * up[i], target)
        )
    return out


def evaluate_constraint(c: LinearConstraint, grid: Grid, values: np.ndarray) -> float:
    return float((grid.weights * c.weights) @ values)


def _split_constraints(constraints, grid):
    """Separate one-hot rows (variable bounds) from dense rows."""
    n = grid.n
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    dense = []
    for c in constraints:
        if c.weights.shape != (n,):
            raise DimensionMismatchError(
                f"constraint weights length {c.weights.shape[0]} != grid size {n}"
            )
        nz = np.flatnonzero(c.weights)
        if nz.size == 1 and c.weights[nz[0]] > 0.0:
            i = int(nz[0])
            scale = grid.weights[i] * c.weights[i]
            if np.isfinite(c.lower):
                lb[i] = max(lb[i], c.lower / scale)
            if np.isfinite(c.upper):
                ub[i] = min(ub[i], c.upper / scale)
        else:
            dense.append(c)
    if np.any(lb > ub * (1.0 + 1e-12) + 1e-300):
        i = int(np.argmax(lb - ub))
        raise InfeasibleClassError(
            f"pointwise bounds cross at grid index {i}: {lb[i]} > {ub[i]}"
        )
    return lb, ub, dense


def _infeasibility_hint(constraints, target: int) -> str:
    """Cheap irreducibility hint: constraints that are impossible alone."""
    bad = []
    for k, c in enumerate(constraints):
        if c.target != target:
            continue
        attainable = (float(c.weights.min()), float(c.weights.max()))
        if c.lower > attainable[1] or c.upper < attainable[0]:
            bad.append(k)
    if bad:
        return f"hypothesis {target}: constraints {bad} are individually unsatisfiable"
    return (
        f"hypothesis {target}: constraint set is mutually incompatible "
        "(each constraint is satisfiable alone)"
    )


def _side_feasible(grid, constraints, target: int) -> bool:
    """Feasibility LP for one hypothesis' constraint set in isolation."""
    lb, ub, dense = _split_constraints(constraints, grid)
    g = cp.Variable(grid.n, nonneg=True)
    cons = [grid.weights @ g == 1.0]
    if lb.max() > 0.0:
        cons.append(g >= lb)
    fin = np.flatnonzero(np.isfinite(ub))
    if fin.size:
        cons.append(g[fin] <= ub[fin])
    for c in dense:
        expr = (grid.weights * c.weights) @ g
        if np.isfinite(c.lower):
            cons.append(expr >= c.lower)
        if np.isfinite(c.upper):
            cons.append(expr <= c.upper)
    prob = cp.Problem(cp.Minimize(0.0), cons)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver="CLARABEL")
        except cp.SolverError:
            return True
    return prob.status not in ("infeasible", "infeasible_inaccurate")


def _cvxpy_once(grid, u, lb0, ub0, dense0, lb1, ub1, dense1, solver):
    n = grid.n
    w = grid.weights
    g0 = cp.Variable(n, nonneg=True)
    g1 = cp.Variable(n, nonneg=True)
    z = cp.Variable(n)
    cons = [w @ g0 == 1.0, w @ g1 == 1.0, cp.constraints.PowCone3D(g1, g0, z, u)]
    for g, lb, ub, dense in ((g0, lb0, ub0, dense0), (g1, lb1, ub1, dense1)):
        if lb.max() > 0.0:
            cons.append(g >= lb)
        fin = np.flatnonzero(np.isfinite(ub))
        if fin.size:
            cons.append(g[fin] <= ub[fin])
        for c in dense:
            expr = (w * c.weights) @ g
            if np.isfinite(c.lower):
                cons.append(expr >= c.lower)
            if np.isfinite(c.upper):
                cons.append(expr <= c.upper)
    prob = cp.Problem(cp.Maximize(w @ z), cons)
    kwargs = {"solver": solver}
    if solver == "SCS":
        # eps below ~1e-10 sits at the ADMM floating-point floor and makes
        # runtimes erratic (seconds instead of hundredths); 1e-9 certifies
        # comfortably whenever SCS is the right tool for the geometry.
        kwargs.update(eps=1e-9, max_iters=200_000)
    elif solver == "CLARABEL":
        kwargs.update(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, max_iter=200)
    with warnings.catch_warnings():
        # solver-status warnings are redundant here: acceptance is decided
        # by the independent certificate, never by the reported status
        warnings.simplefilter("ignore")
        prob.solve(**kwargs)
    return prob.status, g0.value, g1.value


def _check_feasible(constraints, grid, g0v, g1v) -> float:
    worst = 0.0
    values = (g0v, g1v)
    for c in constraints:
        v = evaluate_constraint(c, grid, values[c.target])
        if np.isfinite(c.lower):
            worst = max(worst, (c.lower - v) / max(1.0, abs(c.lower)))
        if np.isfinite(c.upper):
            worst = max(worst, (v - c.upper) / max(1.0, abs(c.upper)))
    return worst


def kkt_certificate(
    g0: GridDensity,
    g1: GridDensity,
    u: float,
    constraints0,
    constraints1,
) -> tuple[float, tuple[int, ...]]:
    """Independent first-order optimality certificate for the inner program.

    Returns ``(residual, active_constraints)``. Multipliers for the mass
    equality and the active linear constraints are fitted by least squares
    on well-conditioned coordinates (both densities clearly positive, so
    the objective gradient is reliable); the residual is the largest of

    * stationarity defect on free well-conditioned coordinates,
    * sign violations of the reduced gradient at active variable bounds,
    * complementary slackness of the fitted multipliers,
    * the ray condition at degenerate coordinates: because the integrand
      g1^u g0^(1-u) is 1-homogeneous, optimality at a coordinate where both
      densities vanish requires (c0/(1-u))^(1-u) (c1/u)^u >= 1 for the
      multiplier polynomials c_j — otherwise growing a joint atom there
      would improve the objective.

    Indices in ``active_constraints`` run over ``constraints0`` then
    ``constraints1``.
    """
    check_u(u)
    grid = _check_shared_grid(g0, g1)
    v0, v1 = g0.values, g1.values
    r = floored(v1) / floored(v0)
    grads = ((1.0 - u) * r**u, u * r ** (u - 1.0))
    strong = (v0 >= _STRONG_TOL * max(float(v0.max()), 1e-300)) & (
        v1 >= _STRONG_TOL * max(float(v1.max()), 1e-300)
    )
    all_constraints = list(constraints0) + list(constraints1)

    active: list[int] = []
    for k, c in enumerate(all_constraints):
        v = evaluate_constraint(c, grid, (v0, v1)[c.target])
        atol = _ACTIVE_ATOL * max(1.0, abs(c.lower), abs(c.upper))
        lo_act = np.isfinite(c.lower) and v - c.lower <= atol
        up_act = np.isfinite(c.upper) and c.upper - v <= atol
        if lo_act or up_act:
            active.append(k)

    residual = 0.0
    c_polys = []
    ub_hit = []
    for target, cons in ((0, constraints0), (1, constraints1)):
        lb, ub, dense = _split_constraints(cons, grid)
        gv = (v0, v1)[target]
        span = max(float(gv.max()), 1e-300)
        lb_act = gv - lb <= _ACTIVE_ATOL * span
        ub_act = np.isfinite(ub) & (ub - gv <= _ACTIVE_ATOL * span)
        pinned = lb_act & ub_act
        cols = [np.ones(grid.n)]
        bounds_lo, bounds_hi = [-np.inf], [np.inf]
        slacks = [0.0]
        for c in dense:
            v = evaluate_constraint(c, grid, gv)
            atol = _ACTIVE_ATOL * max(1.0, abs(c.lower), abs(c.upper))
            lo_act = np.isfinite(c.lower) and v - c.lower <= atol
            up_act = np.isfinite(c.upper) and c.upper - v <= atol
            if not (lo_act or up_act):
                continue
            cols.append(np.asarray(c.weights))
            if lo_act and up_act:
                bounds_lo.append(-np.inf), bounds_hi.append(np.inf)
                slacks.append(0.0)
            elif up_act:
                bounds_lo.append(0.0), bounds_hi.append(np.inf)
                slacks.append(abs(c.upper - v))
            else:
                bounds_lo.append(-np.inf), bounds_hi.append(0.0)
                slacks.append(abs(v - c.lower))
        a_full = np.column_stack(cols)
        grad = grads[target]
        free = strong & ~lb_act & ~ub_act
        rows = free if free.any() else strong
        if not rows.any():
            return np.inf, tuple(active)
        fit = lsq_linear(
            a_full[rows], grad[rows], bounds=(np.array(bounds_lo), np.array(bounds_hi))
        )
        c_poly = a_full @ fit.x
        rho = grad - c_poly
        scale = max(1.0, float(np.abs(grad[rows]).max()))
        stat = float(np.abs(rho[free]).max()) if free.any() else 0.0
        only_lb = strong & lb_act & ~pinned
        only_ub = strong & ub_act & ~pinned
        stat = max(stat, float(np.clip(rho[only_lb], 0.0, None).max(initial=0.0)))
        stat = max(stat, float(np.clip(-rho[only_ub], 0.0, None).max(initial=0.0)))
        comp = max((abs(m) * s for m, s in zip(fit.x, slacks)), default=0.0)
        residual = max(residual, stat / scale, comp / scale)
        c_polys.append(c_poly)
        ub_hit.append(ub_act)

    degenerate = ~strong & ~ub_hit[0] & ~ub_hit[1]
    if degenerate.any():
        c0 = np.clip(c_polys[0][degenerate], 0.0, None)
        c1 = np.clip(c_polys[1][degenerate], 0.0, None)
        psi = (c0 / (1.0 - u)) ** (1.0 - u) * (c1 / u) ** u
        residual = max(residual, max(0.0, 1.0 - float(psi.min())))
    return residual, tuple(active)


def _polish(grid, u, g0v, g1v, constraints0, constraints1):
    """Newton correction of the first-order system on the detected active set.

    Interior-point output is only ~1e-6 accurate near atomic optima, and the
    post-hoc mass normalization shifts every dense constraint value by the
    same order; both effects surface as a systematic stationarity defect.
    Freezing bound-riding coordinates, pinning the active dense constraints
    as equalities, and running damped Newton on the remaining stationarity +
    feasibility system removes the defect quadratically. Returns corrected
    ``(g0, g1)`` arrays, or None when the correction does not converge; the
    caller's feasibility and certificate gates still decide acceptance.
    """
    w = grid.weights
    cur = [np.asarray(g0v, dtype=float).copy(), np.asarray(g1v, dtype=float).copy()]
    strong = (cur[0] >= _STRONG_TOL * max(float(cur[0].max()), 1e-300)) & (
        cur[1] >= _STRONG_TOL * max(float(cur[1].max()), 1e-300)
    )
    if not strong.any():
        return None

    free, h_rows, b_rows = [], [], []
    for target, cons in ((0, constraints0), (1, constraints1)):
        lb, ub, dense = _split_constraints(cons, grid)
        gv = cur[target]
        span = max(float(gv.max()), 1e-300)
        at_bound = (gv - lb <= _ACTIVE_ATOL * span) | (
            np.isfinite(ub) & (ub - gv <= _ACTIVE_ATOL * span)
        )
        f = strong & ~at_bound
        if not f.any():
            return None
        rows = [np.ones(grid.n)]
        targets = [1.0]
        for c in dense:
            v = evaluate_constraint(c, grid, gv)
            atol = _ACTIVE_ATOL * max(1.0, abs(c.lower), abs(c.upper))
            lo_act = np.isfinite(c.lower) and v - c.lower <= atol
            up_act = np.isfinite(c.upper) and c.upper - v <= atol
            if not (lo_act or up_act):
                continue
            if lo_act and up_act:
                targets.append(min(max(v, c.lower), c.upper))
            else:
                targets.append(c.lower if lo_act else c.upper)
            rows.append(np.asarray(c.weights))
        free.append(f)
        h_rows.append(np.vstack(rows))
        b_rows.append(np.asarray(targets))

    # Outer active-set loop: spurious support coordinates (a blurred atom's
    # neighbors) make the Newton system want negative masses; each round
    # zeroes the worst offender jointly in both hypotheses and retries.
    for _ in range(8):
        idx = [np.flatnonzero(m) for m in free]
        m0, m1 = idx[0].size, idx[1].size
        if m0 == 0 or m1 == 0:
            return None
        k0, k1 = h_rows[0].shape[0], h_rows[1].shape[0]
        b_eff = [
            b_rows[t] - (h_rows[t] * w) @ np.where(free[t], 0.0, cur[t])
            for t in (0, 1)
        ]
        pos0 = -np.ones(grid.n, dtype=int)
        pos0[idx[0]] = np.arange(m0)
        pos1 = -np.ones(grid.n, dtype=int)
        pos1[idx[1]] = np.arange(m1)

        def residual_and_jac(x0, x1, mu0, mu1):
            cur[0][idx[0]] = x0
            cur[1][idx[1]] = x1
            a0, a1 = cur[0][idx[0]], cur[1][idx[0]]  # densities at target-0 rows
            c0, c1 = cur[0][idx[1]], cur[1][idx[1]]  # densities at target-1 rows
            e1 = (1.0 - u) * (a1 / a0) ** u - h_rows[0][:, idx[0]].T @ mu0
            e2 = u * (c1 / c0) ** (u - 1.0) - h_rows[1][:, idx[1]].T @ mu1
            f0 = (h_rows[0][:, idx[0]] * w[idx[0]]) @ x0 - b_eff[0]
            f1 = (h_rows[1][:, idx[1]] * w[idx[1]]) @ x1 - b_eff[1]
            res = np.concatenate([e1, e2, f0, f1])

            jac = np.zeros((res.size, res.size))
            cross = u * (1.0 - u)
            r0 = a1 / a0
            jac[:m0, :m0][np.diag_indices(m0)] = -cross * r0**u / a0
            both0 = pos1[idx[0]] >= 0
            jac[np.arange(m0)[both0], m0 + pos1[idx[0]][both0]] = (
                cross * r0[both0] ** (u - 1.0) / a0[both0]
            )
            jac[:m0, m0 + m1 : m0 + m1 + k0] = -h_rows[0][:, idx[0]].T
            r1 = c1 / c0
            jac[m0 : m0 + m1, m0 : m0 + m1][np.diag_indices(m1)] = (
                -cross * r1 ** (u - 2.0) / c0
            )
            both1 = pos0[idx[1]] >= 0
            jac[m0 + np.arange(m1)[both1], pos0[idx[1]][both1]] = (
                cross * r1[both1] ** (u - 1.0) / c0[both1]
            )
            jac[m0 : m0 + m1, m0 + m1 + k0 :] = -h_rows[1][:, idx[1]].T
            jac[m0 + m1 : m0 + m1 + k0, :m0] = h_rows[0][:, idx[0]] * w[idx[0]]
            jac[m0 + m1 + k0 :, m0 : m0 + m1] = h_rows[1][:, idx[1]] * w[idx[1]]
            return res, jac

        grads = (
            (1.0 - u) * (cur[1][idx[0]] / cur[0][idx[0]]) ** u,
            u * (cur[1][idx[1]] / cur[0][idx[1]]) ** (u - 1.0),
        )
        mu0, mu1 = (
            np.linalg.lstsq(h_rows[t][:, idx[t]].T, grads[t], rcond=None)[0]
            for t in (0, 1)
        )
        x0, x1 = cur[0][idx[0]].copy(), cur[1][idx[1]].copy()
        res, jac = residual_and_jac(x0, x1, mu0, mu1)
        norm = float(np.abs(res).max())
        blocked = None
        for _ in range(10):
            if norm <= 1e-11:
                break
            try:
                step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            except np.linalg.LinAlgError:
                return None
            scale = 1.0
            for _ in range(12):
                n0 = x0 + scale * step[:m0]
                n1 = x1 + scale * step[m0 : m0 + m1]
                if n0.min() > 0.0 and n1.min() > 0.0:
                    r_new, j_new = residual_and_jac(
                        n0,
                        n1,
                        mu0 + scale * step[m0 + m1 : m0 + m1 + k0],
                        mu1 + scale * step[m0 + m1 + k0 :],
                    )
                    if float(np.abs(r_new).max()) < norm:
                        break
                scale *= 0.5
            else:
                full0 = x0 + step[:m0]
                full1 = x1 + step[m0 : m0 + m1]
                worst = min(float(full0.min()), float(full1.min()))
                if worst < 0.0:
                    if float(full0.min()) <= float(full1.min()):
                        blocked = int(idx[0][np.argmin(full0)])
                    else:
                        blocked = int(idx[1][np.argmin(full1)])
                break
            x0, x1 = x0 + scale * step[:m0], x1 + scale * step[m0 : m0 + m1]
            mu0 = mu0 + scale * step[m0 + m1 : m0 + m1 + k0]
            mu1 = mu1 + scale * step[m0 + m1 + k0 :]
            res, jac = r_new, j_new
            norm = float(np.abs(res).max())
        if norm <= 1e-9:
            cur[0][idx[0]] = x0
            cur[1][idx[1]] = x1
            if cur[0].min() < 0.0 or cur[1].min() < 0.0:
                return None
            return cur[0], cur[1]
        if blocked is None:
            return None
        cur[0][blocked] = 0.0
        cur[1][blocked] = 0.0
        free[0][blocked] = False
        free[1][blocked] = False
    return None


def _polish_reduced(grid, u, g0v, g1v, constraints0, constraints1):
    """Accurate re-solve of the program restricted to the strong support.

    First-order solvers blur an atomic optimum across neighbouring cells,
    and the Newton correction cannot recover from that: the spurious
    coordinates would have to travel to exactly zero through a singular
    Jacobian. On atomic geometries the strong support is tiny, so the
    concave program restricted to it can be re-solved directly and
    accurately; the optimizer itself decides which coordinates die.
    """
    g0v = np.asarray(g0v, dtype=float)
    g1v = np.asarray(g1v, dtype=float)
    strong = (g0v >= _STRONG_TOL * max(float(g0v.max()), 1e-300)) & (
        g1v >= _STRONG_TOL * max(float(g1v.max()), 1e-300)
    )
    idx = np.flatnonzero(strong)
    if idx.size == 0 or idx.size > 60:
        return None
    w = grid.weights
    m = idx.size
    bounds_lo, bounds_hi, rows, row_lo, row_hi = [], [], [], [], []
    for target, cons in ((0, constraints0), (1, constraints1)):
        lb, ub, dense = _split_constraints(cons, grid)
        if np.any(lb[~strong] > 0.0):
            return None  # zeroing the weak coordinates would be infeasible
        bounds_lo.append(lb[idx])
        bounds_hi.append(ub[idx])
        block = np.zeros((1 + len(dense), 2 * m))
        sl = slice(target * m, (target + 1) * m)
        block[0, sl] = w[idx]
        lows, highs = [1.0], [1.0]
        for j, c in enumerate(dense, start=1):
            block[j, sl] = (np.asarray(c.weights) * w)[idx]
            lows.append(c.lower)
            highs.append(c.upper)
        rows.append(block)
        row_lo.extend(lows)
        row_hi.extend(highs)

    def fun(z):
        z0 = np.maximum(z[:m], 1e-300)
        z1 = np.maximum(z[m:], 1e-300)
        r = z1 / z0
        val = -float(w[idx] @ (z0 * r**u))
        grad = np.concatenate(
            [-(1.0 - u) * w[idx] * r**u, -u * w[idx] * r ** (u - 1.0)]
        )
        return val, grad

    def hess(z):
        z0 = np.maximum(z[:m], 1e-12)
        z1 = np.maximum(z[m:], 1e-12)
        r = z1 / z0
        scale = u * (1.0 - u) * w[idx] / z0
        h = np.zeros((2 * m, 2 * m))
        h[np.arange(m), np.arange(m)] = scale * r**u
        h[np.arange(m), m + np.arange(m)] = -scale * r ** (u - 1.0)
        h[m + np.arange(m), np.arange(m)] = -scale * r ** (u - 1.0)
        h[m + np.arange(m), m + np.arange(m)] = scale * r ** (u - 2.0)
        return h

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = sciopt.minimize(
            fun,
            np.concatenate([g0v[idx], g1v[idx]]),
            jac=True,
            method="trust-constr",
            hess=hess,
            bounds=sciopt.Bounds(
                np.concatenate(bounds_lo), np.concatenate(bounds_hi)
            ),
            constraints=sciopt.LinearConstraint(
                np.vstack(rows), np.asarray(row_lo), np.asarray(row_hi)
            ),
            options={"gtol": 1e-12, "xtol": 1e-14, "maxiter": 2000},
        )
    if not np.all(np.isfinite(res.x)):
        return None
    full0 = np.zeros(grid.n)
    full1 = np.zeros(grid.n)
    full0[idx] = np.clip(res.x[:m], 0.0, None)
    full1[idx] = np.clip(res.x[m:], 0.0, None)
    return full0, full1


def _canonicalize(grid, u, g0v, g1v, constraints0, constraints1):
    """Minimum-norm representative of the flat optimal face.

    The affinity integrand is 1-homogeneous, so joint pointwise rescalings
    ``(g0, g1) -> (lam*g0, lam*g1)`` that preserve both masses, the
    objective, and every active constraint value span a flat optimal face
    whenever the constraints leave them room; solvers may return any point
    on it. Among those, the minimizer of ``sum w*lam^2*(g0^2+g1^2)`` is
    unique and solvable in closed form (equality-constrained quadratic), so
    returning it makes the output independent of which solver produced the
    iterate. Returns rescaled ``(g0, g1)`` or None when no valid rescaling
    exists; the caller re-checks feasibility and the certificate.
    """
    w = grid.weights
    g0v = np.asarray(g0v, dtype=float)
    g1v = np.asarray(g1v, dtype=float)
    phi = floored(g1v) ** u * floored(g0v) ** (1.0 - u)

    live = (g0v > 1e-12 * float(g0v.max())) | (g1v > 1e-12 * float(g1v.max()))
    rows = [w * g0v, w * g1v, w * phi]
    for target, cons in ((0, constraints0), (1, constraints1)):
        lb, ub, dense = _split_constraints(cons, grid)
        gv = (g0v, g1v)[target]
        span = max(float(gv.max()), 1e-300)
        at_bound = (np.abs(gv - lb) <= _ACTIVE_ATOL * span) | (
            np.isfinite(ub) & (ub - gv <= _ACTIVE_ATOL * span)
        )
        live &= ~(at_bound & (gv > 0.0))
        for c in dense:
            v = evaluate_constraint(c, grid, gv)
            atol = _ACTIVE_ATOL * max(1.0, abs(c.lower), abs(c.upper))
            if (np.isfinite(c.lower) and v - c.lower <= atol) or (
                np.isfinite(c.upper) and c.upper - v <= atol
            ):
                rows.append(w * np.asarray(c.weights) * gv)
    if not live.any():
        return None

    q = (w * (g0v**2 + g1v**2))[live]
    a = np.vstack(rows)[:, live]
    b = a @ np.ones(live.sum())
    m = (a / q) @ a.T
    nu = np.linalg.lstsq(m, b, rcond=None)[0]
    lam_live = (a.T @ nu) / q
    if float(lam_live.min()) < 0.0 or not np.all(np.isfinite(lam_live)):
        return None
    lam = np.ones(grid.n)
    lam[live] = lam_live
    return lam * g0v, lam * g1v


def maximize_affinity_at_u(
    constraints0,
    constraints1,
    grid: Grid,
    u: float,
    *,
    solver: str | None = None,
) -> tuple[GridDensity, GridDensity, float]:
    """Solve the inner concave program at fixed u; certificate enforced.

    Returns ``(lfd0, lfd1, objective)``. The objective is recomputed from
    the returned densities, never read off the solver. An optimum at
    affinity 1 means the two constraint sets admit a common density.
    """
    check_u(u)
    lb0, ub0, dense0 = _split_constraints(constraints0, grid)
    lb1, ub1, dense1 = _split_constraints(constraints1, grid)
    chain = (solver,) if solver is not None else _SOLVERS
    last_err: Exception | None = None
    best: tuple[float, GridDensity, GridDensity] | None = None
    for name in chain:
        try:
            status, g0v, g1v = _cvxpy_once(
                grid, u, lb0, ub0, dense0, lb1, ub1, dense1, name
            )
        except cp.SolverError as exc:
            last_err = exc
            continue
        if status in ("infeasible", "infeasible_inaccurate"):
            # the two hypotheses never share variables, so blame is separable
            parts = [
                _infeasibility_hint(list(cons), t)
                for t, cons in ((0, constraints0), (1, constraints1))
                if not _side_feasible(grid, cons, t)
            ]
            if not parts:
                parts = [
                    _infeasibility_hint(list(constraints0), 0),
                    _infeasibility_hint(list(constraints1), 1),
                ]
            raise InfeasibleClassError("; ".join(parts))
        if g0v is None or g1v is None or status not in (
            "optimal",
            "optimal_inaccurate",
        ):
            last_err = ConvergenceError(f"{name} returned status {status!r}")
            continue
        g0v = np.clip(np.asarray(g0v, dtype=float), 0.0, None)
        g1v = np.clip(np.asarray(g1v, dtype=float), 0.0, None)
        g0v /= float(grid.weights @ g0v)
        g1v /= float(grid.weights @ g1v)
        every = list(constraints0) + list(constraints1)
        feas = _check_feasible(every, grid, g0v, g1v)
        lfd0 = lfd1 = None
        kkt = np.inf
        if feas <= _FEAS_TOL:
            lfd0, lfd1 = GridDensity(grid, g0v), GridDensity(grid, g1v)
            kkt, _ = kkt_certificate(lfd0, lfd1, u, constraints0, constraints1)
        if feas > _FEAS_TOL or kkt > _POLISH_TRIGGER:
            polished = _polish(grid, u, g0v, g1v, constraints0, constraints1)
            if polished is None:
                reduced = _polish_reduced(
                    grid, u, g0v, g1v, constraints0, constraints1
                )
                if reduced is not None:
                    refined = _polish(
                        grid, u, reduced[0], reduced[1], constraints0, constraints1
                    )
                    polished = refined if refined is not None else reduced
            if polished is not None:
                feas_p = _check_feasible(every, grid, *polished)
                if feas_p <= _FEAS_TOL:
                    cand0 = GridDensity(grid, polished[0])
                    cand1 = GridDensity(grid, polished[1])
                    kkt_p, _ = kkt_certificate(
                        cand0, cand1, u, constraints0, constraints1
                    )
                    if kkt_p < kkt:
                        lfd0, lfd1, feas, kkt = cand0, cand1, feas_p, kkt_p
        if feas > _FEAS_TOL:
            last_err = ConvergenceError(
                f"{name} solution violates constraints by {feas}"
            )
            continue
        if kkt > _KKT_TOL:
            if best is None or kkt < best[0]:
                best = (kkt, lfd0, lfd1)
            last_err = ConvergenceError(
                f"{name} solution fails the KKT certificate (residual {kkt})"
            )
            continue
        # The optimum can sit on a flat face that admits extra atoms at
        # ray-neutral coordinates; solvers land anywhere on it. Snapping
        # atomic geometries to the minimal-support optimum makes the
        # returned point start-independent (value never sacrificed).
        snapped = _polish_reduced(
            grid, u, lfd0.values, lfd1.values, constraints0, constraints1
        )
        if snapped is not None:
            refined = _polish(
                grid, u, snapped[0], snapped[1], constraints0, constraints1
            )
            if refined is not None:
                snapped = refined
            if _check_feasible(every, grid, *snapped) <= _FEAS_TOL:
                cand0 = GridDensity(grid, snapped[0])
                cand1 = GridDensity(grid, snapped[1])
                kkt_s, _ = kkt_certificate(
                    cand0, cand1, u, constraints0, constraints1
                )
                if kkt_s <= _KKT_TOL and u_affinity(cand0, cand1, u) >= (
                    u_affinity(lfd0, lfd1, u) - 1e-9
                ):
                    lfd0, lfd1, kkt = cand0, cand1, kkt_s
        canon = _canonicalize(
            grid, u, lfd0.values, lfd1.values, constraints0, constraints1
        )
        if canon is not None and _check_feasible(every, grid, *canon) <= _FEAS_TOL:
            cand0, cand1 = GridDensity(grid, canon[0]), GridDensity(grid, canon[1])
            kkt_c, _ = kkt_certificate(cand0, cand1, u, constraints0, constraints1)
            if kkt_c <= _KKT_TOL:
                lfd0, lfd1, kkt = cand0, cand1, kkt_c
        objective = u_affinity(lfd0, lfd1, u)
        if objective >= 1.0 - 1e-6:
            raise ClassOverlapError(
                "the two constraint sets admit a common density "
                f"(affinity {objective} at u={u})"
            )
        return lfd0, lfd1, objective
    iterate = None if best is None else (best[1], best[2])
    raise ConvergenceError(
        f"no solver produced a certified optimum: {last_err}", last_iterate=iterate
    ) from last_err


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_over_u(
    constraints0,
    constraints1,
    grid: Grid,
    u_grid=None,
) -> ConvexLFDResult:
    """Outer scalar minimization of the inner optimum over u.

    A coarse scan over ``u_grid`` (default 21 equispaced interior points)
    locates the discrete minimizer; golden-section search between its
    neighbors narrows the interval below 1e-4. The full evaluated
    (u, objective) profile is kept on the result for diagnostics.
    """
    if u_grid is None:
        u_grid = np.linspace(0.0, 1.0, 23)[1:-1]
    us = [float(v) for v in np.asarray(u_grid, dtype=float)]
    if len(us) < 3:
        raise ParameterError("u_grid needs at least 3 points")
    if min(us) <= 0.0 or max(us) >= 1.0:
        raise ParameterError("u_grid values must lie strictly inside (0,1)")
    us = sorted(us)

    cache: dict[float, tuple[GridDensity, GridDensity, float]] = {}

    def inner(u: float):
        if u not in cache:
            cache[u] = maximize_affinity_at_u(constraints0, constraints1, grid, u)
        return cache[u]

    for u in us:
        inner(u)
    i_min = int(np.argmin([cache[u][2] for u in us]))
    left = us[i_min - 1] if i_min > 0 else max(1e-6, 0.5 * us[0])
    right = us[i_min + 1] if i_min < len(us) - 1 else 0.5 * (us[-1] + 1.0)

    a, b = left, right
    c_ = b - _INVPHI * (b - a)
    d_ = a + _INVPHI * (b - a)
    while b - a > 1e-4:
        if inner(c_)[2] <= inner(d_)[2]:
            b, d_ = d_, c_
            c_ = b - _INVPHI * (b - a)
        else:
            a, c_ = c_, d_
            d_ = a + _INVPHI * (b - a)

    u_star = min(cache, key=lambda u: cache[u][2])
    lfd0, lfd1, objective = cache[u_star]
    kkt, active = kkt_certificate(lfd0, lfd1, u_star, constraints0, constraints1)
    profile = tuple(sorted((u, cache[u][2]) for u in cache))
    return ConvexLFDResult(
        u_star=u_star,
        lfd0=lfd0,
        lfd1=lfd1,
        objective=objective,
        kkt_residual=kkt,
        active_constraints=active,
        profile=profile,
    )


def u_dependence_metric(constraints0, constraints1, grid: Grid, u_list) -> float:
    """Max sup-distance between inner LFD pairs across the given u values.

    Near zero means the same pair maximizes the affinity for every u (the
    finite-sample robust situation); a large value means the least favorable
    pair genuinely moves with u and only the asymptotic guarantee holds.
    """
    us = [float(v) for v in u_list]
    if len(us) < 2:
        raise ParameterError("u_list needs at least 2 values")
    sols = [maximize_affinity_at_u(constraints0, constraints1, grid, u) for u in us]
    metric = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            d0 = float(np.abs(sols[i][0].values - sols[j][0].values).max())
            d1 = float(np.abs(sols[i][1].values - sols[j][1].values).max())
            metric = max(metric, d0, d1)
    return metric
