"""Affinity, total variation, and f-divergences against Gaussian closed forms."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from robust_lfd import (
    F_DIVERGENCE_KINDS,
    Grid,
    ParameterError,
    f_divergence,
    gaussian_density,
    likelihood_ratio,
    normalize,
    tv_distance,
    u_affinity,
)


def _bump(grid, shift, scale):
    return normalize(grid, np.exp(-scale * (grid.x - shift) ** 2))


class TestUAffinity:
    def test_bhattacharyya_closed_form(self, unit_pair):
        # equal-variance Gaussians a distance 2 apart: exp(-(2)^2/8)
        f0, f1 = unit_pair
        assert np.isclose(u_affinity(f0, f1, 0.5), np.exp(-0.5), atol=1e-10)

    def test_swap_symmetry(self, unit_pair):
        f0, f1 = unit_pair
        for u in (0.2, 0.35, 0.8):
            assert np.isclose(
                u_affinity(f0, f1, u), u_affinity(f1, f0, 1.0 - u), atol=1e-12
            )

    def test_identical_densities_give_one(self, unit_pair):
        f0, _ = unit_pair
        assert np.isclose(u_affinity(f0, f0, 0.3), 1.0, atol=1e-12)

    def test_bounded_by_one(self, unit_pair):
        f0, f1 = unit_pair
        for u in (0.1, 0.5, 0.9):
            d = u_affinity(f0, f1, u)
            assert 0.0 < d < 1.0

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.2, 1.7, np.nan])
    def test_u_outside_open_interval(self, unit_pair, u):
        f0, f1 = unit_pair
        with pytest.raises(ParameterError):
            u_affinity(f0, f1, u)

    def test_log_convex_in_u(self, unit_pair):
        # the affinity is a two-sided Laplace-type transform, so its log is
        # convex: the midpoint value is below the geometric mean
        f0, f1 = unit_pair
        for a, b in ((0.2, 0.6), (0.3, 0.9), (0.1, 0.5)):
            mid = u_affinity(f0, f1, (a + b) / 2.0)
            geo = np.sqrt(u_affinity(f0, f1, a) * u_affinity(f0, f1, b))
            assert mid <= geo + 1e-12


class TestTVDistance:
    def test_gaussian_closed_form(self, unit_pair):
        # TV of N(-1,1) vs N(+1,1) is 2*Phi(1) - 1
        f0, f1 = unit_pair
        expected = 2.0 * norm.cdf(1.0) - 1.0
        assert np.isclose(tv_distance(f0, f1), expected, atol=1e-6)

    def test_zero_on_identical(self, unit_pair):
        f0, _ = unit_pair
        assert tv_distance(f0, f0) == 0.0

    @given(
        s0=st.floats(-1.5, 1.5),
        s1=st.floats(-1.5, 1.5),
        s2=st.floats(-1.5, 1.5),
    )
    @settings(max_examples=30, deadline=None)
    def test_triangle_inequality(self, s0, s1, s2):
        grid = Grid(-8.0, 8.0, 401)
        a, b, c = (_bump(grid, s, 0.7) for s in (s0, s1, s2))
        assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12

    def test_symmetry(self, unit_pair):
        f0, f1 = unit_pair
        assert np.isclose(tv_distance(f0, f1), tv_distance(f1, f0), atol=1e-15)


class TestFDivergence:
    def test_kind_catalogue(self):
        assert F_DIVERGENCE_KINDS == ("kl", "reverse_kl", "squared_hellinger")

    def test_kl_closed_form(self, unit_pair):
        # KL between unit-variance Gaussians 2 apart is (2)^2/2
        f0, f1 = unit_pair
        assert np.isclose(f_divergence(f0, f1, "kl"), 2.0, atol=1e-6)

    def test_reverse_kl_mirrors_kl(self, unit_pair):
        f0, f1 = unit_pair
        assert np.isclose(
            f_divergence(f0, f1, "reverse_kl"),
            f_divergence(f1, f0, "kl"),
            atol=1e-12,
        )

    def test_squared_hellinger_closed_form(self, unit_pair):
        # H^2 = 2 - 2*exp(-(2)^2/8) for these Gaussians
        f0, f1 = unit_pair
        expected = 2.0 - 2.0 * np.exp(-0.5)
        assert np.isclose(
            f_divergence(f0, f1, "squared_hellinger"), expected, atol=1e-8
        )

    def test_nonnegative_and_zero_at_equality(self, unit_pair):
        f0, f1 = unit_pair
        for kind in F_DIVERGENCE_KINDS:
            assert f_divergence(f0, f1, kind) > 0.0
            assert abs(f_divergence(f0, f0, kind)) < 1e-12

    def test_unknown_kind(self, unit_pair):
        f0, f1 = unit_pair
        with pytest.raises(ParameterError, match="kind"):
            f_divergence(f0, f1, "chi2")


class TestLikelihoodRatio:
    def test_gaussian_log_slope(self, unit_pair):
        # log LR of N(+1,1) over N(-1,1) is the line 2x
        f0, f1 = unit_pair
        lr = likelihood_ratio(f1, f0)
        x = f0.grid.x
        inner = np.abs(x) <= 4.0
        assert np.allclose(np.log(lr[inner]), 2.0 * x[inner], atol=1e-9)

    def test_positive_everywhere(self, unit_pair):
        f0, f1 = unit_pair
        assert likelihood_ratio(f0, f1).min() > 0.0
