"""Scalar root finding used by the threshold solvers.

Two strategies, matching the solver contracts:

* ``damped_newton`` — Newton iteration with step halving, confined to a
  sign-change bracket; any step that leaves the bracket or fails to reduce
  the residual after the halving budget falls back to a bisection step.
* ``bisect`` — plain bisection, unconditionally convergent on a monotone
  residual.

Both expect a residual that is (weakly) increasing through the root:
``f(lo) <= 0 <= f(hi)``. Callers with decreasing residuals pass the negation.
"""
from __future__ import annotations

from typing import Callable

from .errors import ConvergenceError, InfeasibleClassError

__all__ = ["bisect", "damped_newton"]


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    f_tol: float = 1e-12,
    x_rtol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Bisection on an increasing-through-root residual with f(lo)<=0<=f(hi)."""
    flo, fhi = f(lo), f(hi)
    if abs(flo) <= f_tol:
        return lo
    if abs(fhi) <= f_tol:
        return hi
    if flo > 0.0 or fhi < 0.0:
        raise InfeasibleClassError(
            f"no sign change in bracket [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= f_tol:
            return mid
        if fmid < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= x_rtol * max(1.0, abs(lo)):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def damped_newton(
    f_df: Callable[[float], tuple[float, float]],
    lo: float,
    hi: float,
    x0: float,
    *,
    f_tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 60,
) -> float:
    """Damped Newton inside a bracket, with bisection fallback steps.

    ``f_df(x)`` returns ``(f(x), f'(x))``. The bracket must satisfy
    ``f(lo) <= 0 <= f(hi)`` and is tightened as a side effect of every
    accepted iterate, so the fallback bisection always remains valid.
    """
    flo, _ = f_df(lo)
    fhi, _ = f_df(hi)
    if flo > 0.0 or fhi < 0.0:
        raise InfeasibleClassError(
            f"no sign change in bracket [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )
    x = min(max(x0, lo), hi)
    fx, dfx = f_df(x)
    for _ in range(max_iter):
        if abs(fx) <= f_tol:
            return x
        # Tighten the bracket with the current iterate.
        if fx < 0.0:
            lo = x
        else:
            hi = x
        step_ok = False
        if dfx > 0.0:
            step = -fx / dfx
            x_new = x + step
            if lo < x_new < hi:
                f_new, df_new = f_df(x_new)
                halvings = 0
                while abs(f_new) >= abs(fx) and halvings < max_halvings:
                    step *= 0.5
                    x_new = x + step
                    f_new, df_new = f_df(x_new)
                    halvings += 1
                if abs(f_new) < abs(fx):
                    x, fx, dfx = x_new, f_new, df_new
                    step_ok = True
        if not step_ok:
            x = 0.5 * (lo + hi)
            fx, dfx = f_df(x)
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            return x
    if abs(fx) <= 1e3 * f_tol:
        return x
    raise ConvergenceError(
        f"Newton failed to reach |f|<={f_tol} (last f={fx} at x={x})",
        last_iterate=x,
    )
