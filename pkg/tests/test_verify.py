"""Verification toolkit: separation, rates, Monte Carlo, ordering, f-divergences."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import norm

from robust_lfd import (
    MonteCarloResult,
    ParameterError,
    RateUnboundedWarning,
    TVSpec,
    cramer_rate,
    fdiv_minimality_check,
    likelihood_ratio,
    monte_carlo_test,
    ordering_margin,
    run_verification,
    solve_tv,
    tabulated_lrf,
    threshold_separation,
    tv_members,
)
from robust_lfd.verify import TestConfig as SimConfig


@pytest.fixture(scope="module")
def nominal_lrf(wide_grid, unit_pair):
    f0, f1 = unit_pair
    return tabulated_lrf(wide_grid, likelihood_ratio(f1, f0))


@pytest.fixture(scope="module")
def tv_case(wide_grid, unit_pair):
    """Solved TV pair with its clipped robust LRF and a member batch."""
    f0, f1 = unit_pair
    spec = TVSpec(f0, f1, 0.1, 0.1)
    sol = solve_tv(spec)
    lr = np.clip(likelihood_ratio(f1, f0), sol.t_l, sol.t_u)
    return spec, sol, tabulated_lrf(wide_grid, lr)


class TestConfigValidation:
    def test_threshold_must_be_finite(self):
        with pytest.raises(ParameterError, match="finite"):
            SimConfig(threshold=np.inf)

    def test_prior_open_interval(self):
        with pytest.raises(ParameterError, match="prior0"):
            SimConfig(prior0=1.0)

    def test_positive_counts(self):
        with pytest.raises(ParameterError, match="positive"):
            SimConfig(sample_size=0)
        with pytest.raises(ParameterError, match="positive"):
            SimConfig(trials=0)

    def test_tabulated_lrf_shape(self, wide_grid):
        with pytest.raises(ParameterError, match="tabulated"):
            tabulated_lrf(wide_grid, np.ones(7))


class TestThresholdSeparation:
    def test_gaussian_log_ratio_means(self, unit_pair, nominal_lrf):
        # log lr = 2x, so the means under N(-1,1)/N(+1,1) are -2 and +2
        f0, f1 = unit_pair
        e0, e1, ok = threshold_separation(f0, f1, nominal_lrf, 0.0)
        assert np.isclose(e0, -2.0, atol=1e-6)
        assert np.isclose(e1, 2.0, atol=1e-6)
        assert ok

    def test_threshold_outside_sandwich(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        *_, ok = threshold_separation(f0, f1, nominal_lrf, 5.0)
        assert not ok


class TestCramerRate:
    def test_rate_vanishes_at_the_mean(self, unit_pair, nominal_lrf):
        f0, _ = unit_pair
        assert cramer_rate(f0, nominal_lrf, -2.0, "upper_tail") <= 1e-6

    def test_gaussian_chernoff_point(self, unit_pair, nominal_lrf):
        # sup_s [ -(-2s + 2s^2) ] = 1/2, attained at s = 1/2
        f0, f1 = unit_pair
        assert np.isclose(cramer_rate(f0, nominal_lrf, 0.0, "upper_tail"), 0.5, atol=1e-3)
        assert np.isclose(cramer_rate(f1, nominal_lrf, 0.0, "lower_tail"), 0.5, atol=1e-3)

    def test_rate_increases_with_distance(self, unit_pair, nominal_lrf):
        f0, _ = unit_pair
        rates = [cramer_rate(f0, nominal_lrf, t, "upper_tail") for t in (-1.0, 0.0, 1.0)]
        assert rates[0] < rates[1] < rates[2]

    def test_unattainable_level_warns(self, wide_grid, unit_pair):
        f0, _ = unit_pair
        flat = tabulated_lrf(wide_grid, np.ones(wide_grid.n))
        with pytest.warns(RateUnboundedWarning, match="tilt cap"):
            cramer_rate(f0, flat, 1.0, "upper_tail")

    def test_side_validated(self, unit_pair, nominal_lrf):
        f0, _ = unit_pair
        with pytest.raises(ParameterError, match="side"):
            cramer_rate(f0, nominal_lrf, 0.0, "both_tails")


class TestMonteCarlo:
    def test_single_sample_gaussian_errors(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        cfg = SimConfig(threshold=0.0, sample_size=1, trials=100_000, seed=5)
        res = monte_carlo_test(f0, f1, nominal_lrf, cfg)
        # deciding H1 iff 2x >= 0: both error rates are Phi(-1)
        assert np.isclose(res.p_false_alarm, norm.cdf(-1.0), atol=5e-3)
        assert np.isclose(res.p_miss, norm.cdf(-1.0), atol=5e-3)
        assert np.isclose(
            res.p_error, 0.5 * (res.p_false_alarm + res.p_miss), atol=1e-12
        )

    def test_standard_error_shrinks_with_trials(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        small = monte_carlo_test(
            f0, f1, nominal_lrf, SimConfig(trials=10_000, seed=1)
        )
        large = monte_carlo_test(
            f0, f1, nominal_lrf, SimConfig(trials=40_000, seed=1)
        )
        assert large.se_false_alarm <= 0.6 * small.se_false_alarm

    def test_threshold_below_support_is_degenerate(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        cfg = SimConfig(threshold=-100.0, trials=2_000, seed=2)
        res = monte_carlo_test(f0, f1, nominal_lrf, cfg)
        assert res.p_false_alarm == 1.0
        assert res.p_miss == 0.0

    def test_seeded_runs_are_identical(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        cfg = SimConfig(trials=5_000, seed=123)
        a = monte_carlo_test(f0, f1, nominal_lrf, cfg)
        b = monte_carlo_test(f0, f1, nominal_lrf, cfg)
        assert a == b

    def test_larger_samples_help(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        one = monte_carlo_test(f0, f1, nominal_lrf, SimConfig(trials=20_000, seed=4))
        ten = monte_carlo_test(
            f0, f1, nominal_lrf, SimConfig(sample_size=10, trials=20_000, seed=4)
        )
        assert ten.p_error < 0.1 * one.p_error


class TestOrderingMargin:
    def test_tv_members_never_beat_the_lfds(self, tv_case):
        spec, sol, lrf = tv_case
        members = tv_members(spec, 25, seed=31)
        ts = np.exp(np.linspace(np.log(sol.t_l), np.log(sol.t_u), 9))
        assert ordering_margin(sol.lfd0, sol.lfd1, lrf, members, ts) >= -1e-10

    def test_self_comparison_is_tight(self, tv_case):
        spec, sol, lrf = tv_case
        margin = ordering_margin(
            sol.lfd0, sol.lfd1, lrf, [(sol.lfd0, sol.lfd1)], [1.0]
        )
        assert np.isclose(margin, 0.0, atol=1e-15)


class TestFDivMinimality:
    def test_lfds_minimize_all_kinds(self, tv_case):
        spec, sol, _ = tv_case
        table = fdiv_minimality_check(sol.lfd0, sol.lfd1, tv_members(spec, 50, seed=8))
        assert set(table) == {"kl", "reverse_kl", "squared_hellinger"}
        for solved, sampled in table.values():
            assert solved <= sampled + 1e-8


class TestRunVerification:
    def test_full_report_with_members(self, tv_case):
        spec, sol, lrf = tv_case
        cfg = SimConfig(trials=5_000, seed=17)
        report = run_verification(
            sol.lfd0, sol.lfd1, lrf, cfg, members=tv_members(spec, 10, seed=3)
        )
        assert report.ordering_pass is True
        assert report.ordering_margin >= -1e-10
        assert report.separation_ok
        e0, t, e1 = report.separation
        assert e0 < t < e1
        assert min(report.exponents) > 0.0
        assert isinstance(report.mc_errors, MonteCarloResult)
        assert set(report.fdiv_table) == {"kl", "reverse_kl", "squared_hellinger"}

    def test_report_without_members_skips_class_checks(self, unit_pair, nominal_lrf):
        f0, f1 = unit_pair
        report = run_verification(f0, f1, nominal_lrf, SimConfig(trials=2_000))
        assert report.ordering_pass is None
        assert report.ordering_margin is None
        assert report.fdiv_table == {}
