"""General band classes: template structure, plateau constants, degeneration."""
from __future__ import annotations

import numpy as np
import pytest

from robust_lfd import (
    BandSpec,
    ClassOverlapError,
    ContaminationSpec,
    DimensionMismatchError,
    Grid,
    ParameterError,
    band_overlap_diagnostic,
    classify_regions,
    gaussian_density,
    maximize_affinity_at_u,
    pointwise_bound_constraints,
    solve_band,
    solve_lower_contamination,
    u_affinity,
)
from robust_lfd.band_general import (
    RULE_CONST_K1,
    RULE_CONST_K2,
    RULE_INTERIOR,
    RULE_R_LL,
    RULE_R_LU,
    RULE_R_UL,
    RULE_R_UU,
    Region,
)


@pytest.fixture(scope="module")
def band_grid():
    return Grid(-6.0, 6.0, 201)


@pytest.fixture(scope="module")
def nominals(band_grid):
    return (
        gaussian_density(band_grid, -1.0, 4.0),
        gaussian_density(band_grid, 1.0, 4.0),
    )


def scaled_band(grid, nominals, eps_lower, eps_upper):
    f0, f1 = nominals
    return BandSpec(
        grid,
        (1.0 - eps_lower) * f0.values,
        (1.0 + eps_upper) * f0.values,
        (1.0 - eps_lower) * f1.values,
        (1.0 + eps_upper) * f1.values,
    )


def _check_structure(spec, sol):
    """Invariants shared by every solved band structure."""
    w = spec.grid.weights
    for v, lo, up in (
        (sol.lfd0.values, spec.g0_lower, spec.g0_upper),
        (sol.lfd1.values, spec.g1_lower, spec.g1_upper),
    ):
        assert np.isclose(w @ v, 1.0, atol=1e-8)
        assert np.all(v >= lo - 1e-10)
        assert np.all(v <= up + 1e-10)
    # regions tile the grid
    masks = [r.mask(spec.grid.n) for r in sol.lrf_regions]
    assert np.all(sum(m.astype(int) for m in masks) == 1)
    # each region obeys its rule
    lrf = sol.lrf()
    r_ul, r_uu, r_ll, r_lu = spec.ratios()
    by_rule = {
        RULE_R_UL: r_ul,
        RULE_R_UU: r_uu,
        RULE_R_LL: r_ll,
        RULE_R_LU: r_lu,
        RULE_CONST_K1: np.full(spec.grid.n, sol.k1),
        RULE_CONST_K2: np.full(spec.grid.n, sol.k2),
    }
    for region, mask in zip(sol.lrf_regions, masks):
        if region.empty or region.rule == RULE_INTERIOR:
            continue
        assert np.allclose(lrf[mask], by_rule[region.rule][mask], rtol=1e-9)
    # nondecreasing for these monotone bound ratios
    assert np.all(np.diff(lrf) >= -1e-9)


class TestTemplates:
    def test_type_a(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 0.2)
        sol = solve_band(spec)
        assert sol.band_type == "A"
        assert sol.k2 <= sol.k1
        assert len(sol.lrf_regions) == 5
        assert [r.point_count() for r in sol.lrf_regions] == [77, 13, 21, 13, 77]
        assert np.isclose(sol.k1, 1.354276809, rtol=1e-8)
        assert np.isclose(sol.k2, 0.738401480, rtol=1e-8)
        _check_structure(spec, sol)

    def test_type_b(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 0.5)
        sol = solve_band(spec)
        assert sol.band_type == "B"
        assert sol.k1 == sol.k2
        assert len(sol.lrf_regions) == 3
        assert [r.point_count() for r in sol.lrf_regions] == [80, 41, 80]
        # symmetric setup: the single plateau sits at 1
        assert np.isclose(sol.k1, 1.0, atol=1e-9)
        _check_structure(spec, sol)

    def test_type_c(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 1.5)
        sol = solve_band(spec)
        assert sol.band_type == "C"
        assert sol.k1 <= sol.k2
        assert len(sol.lrf_regions) == 5
        assert [r.point_count() for r in sol.lrf_regions] == [60, 38, 5, 38, 60]
        assert np.isclose(sol.k1, 0.928232788, rtol=1e-8)
        assert np.isclose(sol.k2, 1.077315963, rtol=1e-8)
        _check_structure(spec, sol)

    def test_symmetry_relates_the_constants(self, band_grid, nominals):
        # x -> -x swaps the hypotheses, so k1*k2 = 1 for these setups.
        for eps_upper in (0.2, 1.5):
            sol = solve_band(scaled_band(band_grid, nominals, 0.2, eps_upper))
            assert np.isclose(sol.k1 * sol.k2, 1.0, atol=1e-9)


class TestClippedLimit:
    def test_huge_upper_bound_degenerates(self, band_grid, nominals):
        # Once the upper bounds stop binding, the structure collapses to the
        # clipped likelihood-ratio of the pure lower-contamination model with
        # the same lower envelope; the plateau constants become its
        # clipping thresholds.
        f0, f1 = nominals
        spec = scaled_band(band_grid, nominals, 0.2, 19.0)
        sol = solve_band(spec)
        assert sol.band_type == "clipped_limit"
        assert sol.lrf_regions[0].empty and sol.lrf_regions[-1].empty
        ref = solve_lower_contamination(
            ContaminationSpec(direction="lower", f0=f0, f1=f1, eps0=0.2, eps1=0.2)
        )
        assert np.isclose(sol.k1, ref.t_l, atol=1e-9)
        assert np.isclose(sol.k2, ref.t_u, atol=1e-9)
        _check_structure(spec, sol)

    def test_widened_upper_shape_is_equivalent(self, band_grid, nominals):
        # Upper bounds from a flatter density (variance 9, scale 1.5) are
        # just as inactive: same clipped limit, same constants.
        f0, f1 = nominals
        f0u = gaussian_density(band_grid, -1.0, 9.0)
        f1u = gaussian_density(band_grid, 1.0, 9.0)
        spec = BandSpec(
            band_grid,
            0.8 * f0.values,
            1.5 * f0u.values,
            0.8 * f1.values,
            1.5 * f1u.values,
        )
        sol = solve_band(spec)
        assert sol.band_type == "clipped_limit"
        assert sol.lrf_regions[0].empty and sol.lrf_regions[-1].empty
        ref = solve_lower_contamination(
            ContaminationSpec(direction="lower", f0=f0, f1=f1, eps0=0.2, eps1=0.2)
        )
        assert np.isclose(sol.k1, ref.t_l, atol=1e-9)
        assert np.isclose(sol.k2, ref.t_u, atol=1e-9)


class TestUIndependence:
    @pytest.mark.parametrize("u", [0.25, 0.75])
    def test_band_lfds_maximize_every_affinity(self, band_grid, nominals, u):
        # The same pair is least favorable for the whole affinity family:
        # the box-constrained maximizer at any u agrees with the band pair.
        spec = scaled_band(band_grid, nominals, 0.2, 0.2)
        sol = solve_band(spec)
        c0 = pointwise_bound_constraints(band_grid, spec.g0_lower, spec.g0_upper, 0)
        c1 = pointwise_bound_constraints(band_grid, spec.g1_lower, spec.g1_upper, 1)
        _, _, obj = maximize_affinity_at_u(c0, c1, band_grid, u)
        assert abs(u_affinity(sol.lfd0, sol.lfd1, u) - obj) <= 1e-4


class TestOverlapDiagnostic:
    def test_zero_for_split_templates(self, band_grid, nominals):
        for eps_upper in (0.2, 1.5):
            sol = solve_band(scaled_band(band_grid, nominals, 0.2, eps_upper))
            assert band_overlap_diagnostic(sol) == 0.0

    def test_positive_for_interior_plateau_at_one(self, band_grid, nominals):
        sol = solve_band(scaled_band(band_grid, nominals, 0.2, 0.5))
        measure = band_overlap_diagnostic(sol)
        # 41 plateau points -> 40 whole cells of dx = 0.06
        assert np.isclose(measure, 2.4, atol=1e-12)

    def test_identical_bands_are_rejected(self, band_grid, nominals):
        f0, _ = nominals
        with pytest.raises(ClassOverlapError, match="common density|identically 1"):
            solve_band(
                BandSpec(
                    band_grid,
                    0.8 * f0.values,
                    1.2 * f0.values,
                    0.8 * f0.values,
                    1.2 * f0.values,
                )
            )


class TestClassifyRegions:
    def test_equal_constants_use_merged_template(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 0.5)
        regions = classify_regions(spec, 1.0, 1.0)
        assert [r.rule for r in regions] == [RULE_R_UL, RULE_INTERIOR, RULE_R_LU]

    def test_monotone_ratios_give_single_intervals(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 0.2)
        sol = solve_band(spec)
        for region in classify_regions(spec, sol.k1, sol.k2):
            assert len(region.intervals) <= 1

    def test_nonpositive_constants_rejected(self, band_grid, nominals):
        spec = scaled_band(band_grid, nominals, 0.2, 0.2)
        with pytest.raises(ParameterError, match="positive"):
            classify_regions(spec, -1.0, 0.5)

    def test_region_helpers(self):
        region = Region("const k1", ((2, 5), (8, 9)))
        assert not region.empty
        assert region.point_count() == 4
        mask = region.mask(10)
        assert mask.sum() == 4 and mask[2] and mask[4] and not mask[5]
        assert Region("const k1", ()).empty


class TestSpecValidation:
    def test_crossing_bounds_rejected(self, band_grid, nominals):
        f0, f1 = nominals
        with pytest.raises(ParameterError, match="exceeds"):
            BandSpec(
                band_grid,
                1.2 * f0.values,
                0.8 * f0.values,
                0.8 * f1.values,
                1.2 * f1.values,
            )

    def test_band_too_tight_for_a_density(self, band_grid, nominals):
        f0, f1 = nominals
        with pytest.raises(ParameterError, match="cannot hold"):
            BandSpec(
                band_grid,
                0.3 * f0.values,
                0.6 * f0.values,
                0.8 * f1.values,
                1.2 * f1.values,
            )

    def test_shape_mismatch(self, band_grid, nominals):
        f0, f1 = nominals
        with pytest.raises(DimensionMismatchError, match="shape"):
            BandSpec(
                band_grid,
                0.8 * f0.values[:-1],
                1.2 * f0.values,
                0.8 * f1.values,
                1.2 * f1.values,
            )

    def test_negative_bound_rejected(self, band_grid, nominals):
        f0, f1 = nominals
        bad = 0.8 * f0.values
        bad = bad.copy()
        bad[0] = -1e-3
        with pytest.raises(ParameterError, match="nonnegative"):
            BandSpec(band_grid, bad, 1.2 * f0.values, 0.8 * f1.values, 1.2 * f1.values)
