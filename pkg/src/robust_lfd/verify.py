"""Numerical checks of robustness claims for solved least favorable pairs.

Everything here consumes solved densities and a robust likelihood-ratio
function and produces evidence: threshold separation of the log-ratio
means, large-deviation error exponents via the Legendre transform of the
log moment generating function, seeded Monte Carlo error probabilities,
stochastic-ordering margins against sampled class members, and
f-divergence minimality tables.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .divergence import F_DIVERGENCE_KINDS, f_divergence
from .errors import ParameterError, RateUnboundedWarning
from .grid import Grid, GridDensity, _check_shared_grid, floored, sample_from

__all__ = [
    "TestConfig",
    "MonteCarloResult",
    "VerifyReport",
    "tabulated_lrf",
    "threshold_separation",
    "cramer_rate",
    "monte_carlo_test",
    "ordering_margin",
    "fdiv_minimality_check",
    "run_verification",
]

_S_CAP = 50.0


@dataclass(frozen=True)
class TestConfig:
    """Parameters of the simulated mean-log-ratio threshold test."""

    threshold: float = 0.0
    prior0: float = 0.5
    sample_size: int = 1
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not np.isfinite(self.threshold):
            raise ParameterError("threshold must be finite")
        if not 0.0 < self.prior0 < 1.0:
            raise ParameterError(f"prior0 must be in (0,1), got {self.prior0}")
        if self.sample_size < 1 or self.trials < 1:
            raise ParameterError("sample_size and trials must be positive")


@dataclass(frozen=True)
class MonteCarloResult:
    p_false_alarm: float
    p_miss: float
    p_error: float
    se_false_alarm: float
    se_miss: float

    def __iter__(self):
        return iter((self.p_false_alarm, self.p_miss, self.p_error))


@dataclass(frozen=True)
class VerifyReport:
    ordering_pass: bool | None
    ordering_margin: float | None
    separation: tuple[float, float, float]
    separation_ok: bool
    exponents: tuple[float, float]
    mc_errors: MonteCarloResult
    fdiv_table: dict[str, tuple[float, float]]


def tabulated_lrf(grid: Grid, values: np.ndarray):
    """Callable interpolating likelihood-ratio values tabulated on a grid."""
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n,):
        raise ParameterError(f"need {grid.n} tabulated values, got shape {vals.shape}")

    def lrf(x):
        return np.interp(x, grid.x, vals)

    return lrf


def threshold_separation(
    g0: GridDensity, g1: GridDensity, lrf, t: float
) -> tuple[float, float, bool]:
    """Means of the log-ratio under both hypotheses and the strict sandwich."""
    grid = _check_shared_grid(g0, g1)
    logl = np.log(floored(np.asarray(lrf(grid.x), dtype=float)))
    e0 = float((grid.weights * g0.values) @ logl)
    e1 = float((grid.weights * g1.values) @ logl)
    return e0, e1, bool(e0 < t < e1)


def cramer_rate(g: GridDensity, lrf, t: float, side: str) -> float:
    """Large-deviation rate of the mean log-ratio crossing t under g.

    Computes sup_s [ s*t - log E_g[exp(s*log lr)] ] over s >= 0 for the
    upper tail and s <= 0 for the lower tail. On a bounded grid the moment
    generating function is finite for every s, so the +-50 cap exists only
    to bound the exponential tilt; a maximizer at the cap indicates the
    supremum was not attained inside and triggers a warning.
    """
    if side not in ("upper_tail", "lower_tail"):
        raise ParameterError(f"side must be upper_tail or lower_tail, got {side!r}")
    grid = g.grid
    logl = np.log(floored(np.asarray(lrf(grid.x), dtype=float)))
    wg = grid.weights * g.values
    keep = wg > 0.0
    log_wg = np.log(wg[keep])
    xs = logl[keep]

    def neg_gap(s: float) -> float:
        return float(logsumexp(log_wg + s * xs)) - s * t

    lo, hi = (0.0, _S_CAP) if side == "upper_tail" else (-_S_CAP, 0.0)
    res = minimize_scalar(neg_gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    s_star = float(res.x)
    far_end = hi if side == "upper_tail" else lo
    if abs(s_star - far_end) < 1e-3:
        warnings.warn(
            f"rate maximizer at the tilt cap s={far_end}; rate may be unbounded",
            RateUnboundedWarning,
        )
    return max(0.0, -float(res.fun))


def monte_carlo_test(
    g0_true: GridDensity, g1_true: GridDensity, lrf, cfg: TestConfig
) -> MonteCarloResult:
    """Error probabilities of the mean-log-ratio test, deterministic per seed."""
    grid = _check_shared_grid(g0_true, g1_true)
    n, trials = cfg.sample_size, cfg.trials
    streams = np.random.SeedSequence(cfg.seed).spawn(2)
    rates = []
    for g, stream, accept_h1 in ((g0_true, streams[0], True), (g1_true, streams[1], False)):
        rng = np.random.default_rng(stream)
        chunk = max(1, 10_000_000 // n)
        hits = 0
        done = 0
        while done < trials:
            m = min(chunk, trials - done)
            draws = sample_from(g, m * n, rng)
            s = np.log(floored(np.asarray(lrf(draws), dtype=float))).reshape(m, n).mean(axis=1)
            decide_h1 = s >= cfg.threshold
            hits += int(decide_h1.sum() if accept_h1 else (~decide_h1).sum())
            done += m
        rates.append(hits / trials)
    p_f, p_m = rates
    p_e = cfg.prior0 * p_f + (1.0 - cfg.prior0) * p_m
    se_f = float(np.sqrt(p_f * (1.0 - p_f) / trials))
    se_m = float(np.sqrt(p_m * (1.0 - p_m) / trials))
    return MonteCarloResult(p_f, p_m, p_e, se_f, se_m)


def ordering_margin(
    lfd0: GridDensity,
    lfd1: GridDensity,
    lrf,
    members,
    thresholds,
) -> float:
    """Worst stochastic-ordering margin over members and thresholds.

    For every member pair (G0, G1) and every threshold t, the least
    favorable pair must make the test look worse from both sides:
    G0[lr < t] >= lfd0[lr < t] and lfd1[lr < t] >= G1[lr < t]. Returns the
    smallest of all those differences (nonnegative up to quadrature noise
    when the pair is least favorable).
    """
    grid = _check_shared_grid(lfd0, lfd1)
    lr = np.asarray(lrf(grid.x), dtype=float)
    w = grid.weights
    worst = np.inf
    for t in thresholds:
        event = lr < t
        we = w[event]
        p0_hat = float(we @ lfd0.values[event])
        p1_hat = float(we @ lfd1.values[event])
        for m0, m1 in members:
            worst = min(worst, float(we @ m0.values[event]) - p0_hat)
            worst = min(worst, p1_hat - float(we @ m1.values[event]))
    return worst


def fdiv_minimality_check(
    lfd0: GridDensity,
    lfd1: GridDensity,
    class_sampler,
    kinds=F_DIVERGENCE_KINDS,
) -> dict[str, tuple[float, float]]:
    """Divergence at the solved pair vs. the minimum over sampled members.

    ``class_sampler`` is an iterable of feasible (G0, G1) pairs. A pair that
    is least favorable in the strong sense attains the minimum of every
    listed divergence, so table[kind][0] <= table[kind][1] + tolerance.
    """
    members = list(class_sampler)
    table: dict[str, tuple[float, float]] = {}
    for kind in kinds:
        solved = f_divergence(lfd0, lfd1, kind)
        sampled = min(f_divergence(m0, m1, kind) for m0, m1 in members)
        table[kind] = (solved, sampled)
    return table


def run_verification(
    lfd0: GridDensity,
    lfd1: GridDensity,
    lrf,
    cfg: TestConfig,
    members=None,
    kinds=F_DIVERGENCE_KINDS,
) -> VerifyReport:
    """Assemble the full report; class-dependent checks run when members given."""
    e0, e1, sandwich = threshold_separation(lfd0, lfd1, lrf, cfg.threshold)
    exp0 = cramer_rate(lfd0, lrf, cfg.threshold, "upper_tail")
    exp1 = cramer_rate(lfd1, lrf, cfg.threshold, "lower_tail")
    mc = monte_carlo_test(lfd0, lfd1, lrf, cfg)
    ordering_pass: bool | None = None
    worst: float | None = None
    table: dict[str, tuple[float, float]] = {}
    if members is not None:
        members = list(members)
        thresholds = np.linspace(e0, e1, 22)[1:-1] if e0 < e1 else [cfg.threshold]
        worst = ordering_margin(lfd0, lfd1, lrf, members, np.exp(thresholds))
        ordering_pass = bool(worst >= -1e-10)
        table = fdiv_minimality_check(lfd0, lfd1, members, kinds)
    return VerifyReport(
        ordering_pass=ordering_pass,
        ordering_margin=worst,
        separation=(e0, cfg.threshold, e1),
        separation_ok=sandwich,
        exponents=(exp0, exp1),
        mc_errors=mc,
        fdiv_table=table,
    )
