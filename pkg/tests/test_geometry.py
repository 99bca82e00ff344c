"""Geometry generator tests.

Expected values come from independent oracles computed here: brute-force
pairwise distances, nearest-neighbor statistics and direct arithmetic on
the construction formulas.
"""

import numpy as np
import pytest

from swarmbeam.errors import ConfigurationError, SpacingError, SynthesisError
from swarmbeam.geometry import (
    GOLDEN_ANGLE,
    SPEED_OF_LIGHT,
    ArrayGeometry,
    GeometrySpec,
    compute_stats,
    generate,
    generate_elsa,
    generate_rectangular,
    generate_sunflower,
    geometry_to_csv,
    scale_to_target_d_ave,
)

F_LAMBDA_015 = SPEED_OF_LIGHT / 0.15  # frequency giving wavelength exactly 0.15 m
LAM = 0.15


def brute_nn_mean(pos):
    """Oracle: mean nearest-neighbor distance by full pairwise scan."""
    d = np.sqrt(np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2))
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1).mean()


def brute_min_dist(pos):
    d = np.sqrt(np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2))
    np.fill_diagonal(d, np.inf)
    return d.min()


def brute_max_dist(pos):
    d = np.sqrt(np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2))
    return d.max()


class TestRectangular:
    def test_single_element_at_origin(self):
        geom = generate_rectangular(
            GeometrySpec("rectangular-lattice", 1, frequency_hz=F_LAMBDA_015)
        )
        assert geom.n_elements == 1
        assert np.allclose(geom.positions, 0.0)

    def test_2x2_positions(self):
        spec = GeometrySpec(
            "sparse-square", 4, spacing_m=0.075, frequency_hz=F_LAMBDA_015
        )
        geom = generate_rectangular(spec)
        got = set(map(tuple, np.round(geom.positions, 12)))
        want = {(sx * 0.0375, sy * 0.0375) for sx in (-1, 1) for sy in (-1, 1)}
        assert got == want

    def test_32x32_half_wavelength_stats(self):
        spec = GeometrySpec(
            "rectangular-lattice", 1024, spacing_m=LAM / 2, frequency_hz=F_LAMBDA_015
        )
        geom = generate_rectangular(spec)
        assert np.isclose(brute_nn_mean(geom.positions), 0.075)
        # corner-to-corner distance of a 32x32 grid with 0.075 m pitch
        assert np.isclose(brute_max_dist(geom.positions), 31 * 0.075 * np.sqrt(2))

    def test_non_square_count_rejected(self):
        with pytest.raises(ConfigurationError, match="perfect square"):
            generate_rectangular(GeometrySpec("rectangular-lattice", 12))

    def test_explicit_grid_shape(self):
        spec = GeometrySpec(
            "rectangular-lattice", 12, grid_shape=(4, 3), spacing_m=1.0
        )
        geom = generate_rectangular(spec)
        assert geom.n_elements == 12
        assert len(np.unique(np.round(geom.x, 9))) == 4
        assert len(np.unique(np.round(geom.y, 9))) == 3

    def test_subarray_expansion(self):
        spec = GeometrySpec(
            "sparse-square",
            4,
            radiators_per_platform=4,
            spacing_m=10 * LAM,
            frequency_hz=F_LAMBDA_015,
        )
        geom = generate_rectangular(spec)
        assert geom.n_elements == 16
        # each platform's subarray is a lam/2-pitch 2x2 square
        for p in range(4):
            sub = geom.positions[geom.platform_ids == p]
            assert np.isclose(brute_min_dist(sub), LAM / 2)

    def test_subarray_overlap_rejected(self):
        spec = GeometrySpec(
            "sparse-square",
            4,
            radiators_per_platform=16,
            spacing_m=0.2,  # 16-element subarray spans 3*lam/2 = 0.225 m
            frequency_hz=F_LAMBDA_015,
        )
        with pytest.raises(SpacingError, match="subarray"):
            generate_rectangular(spec)


class TestSunflower:
    def test_single_element(self):
        geom = generate_sunflower(
            GeometrySpec("sunflower", 1, radial_scale_m=2.0, frequency_hz=F_LAMBDA_015)
        )
        # recentering moves the lone element (radius radial_scale) to the origin
        assert np.allclose(geom.positions, 0.0)

    def test_matches_golden_angle_formula(self):
        spec = GeometrySpec(
            "sunflower", 50, radial_scale_m=1.5, min_spacing_m=0.01
        )
        geom = generate_sunflower(spec)
        n = np.arange(1, 51, dtype=float)
        r = 1.5 * np.sqrt(n)
        want = np.column_stack([r * np.cos(n * GOLDEN_ANGLE), r * np.sin(n * GOLDEN_ANGLE)])
        want -= want.mean(axis=0)
        assert np.array_equal(geom.positions, want)

    def test_consecutive_azimuth_step_is_golden_angle(self):
        spec = GeometrySpec("sunflower", 30, radial_scale_m=1.0, min_spacing_m=0.01)
        geom = generate_sunflower(spec)
        n = np.arange(1, 31, dtype=float)
        raw = np.column_stack(
            [np.sqrt(n) * np.cos(n * GOLDEN_ANGLE), np.sqrt(n) * np.sin(n * GOLDEN_ANGLE)]
        )
        ang = np.arctan2(raw[:, 1], raw[:, 0])
        step = np.mod(np.diff(ang), 2 * np.pi)
        assert np.allclose(step, GOLDEN_ANGLE % (2 * np.pi), atol=1e-9)

    def test_d_ave_calibration_to_ten_wavelengths(self):
        target = 10 * LAM
        spec = GeometrySpec(
            "sunflower",
            200,
            radial_scale_m=1.0,
            min_spacing_m=1e-6,
            frequency_hz=F_LAMBDA_015,
        )
        cal = scale_to_target_d_ave(spec, target)
        geom = generate_sunflower(cal)
        measured = brute_nn_mean(geom.positions)
        assert abs(measured - target) / target < 0.05

    def test_min_spacing_violation_names_pair(self):
        spec = GeometrySpec("sunflower", 20, radial_scale_m=0.5, min_spacing_m=5.0)
        with pytest.raises(SpacingError, match=r"elements \d+ and \d+"):
            generate_sunflower(spec)


class TestElsa:
    def test_single_arm_radii_increase(self):
        from swarmbeam.geometry import _greedy_arm

        spec = GeometrySpec(
            "elsa", 40, n_arms=1, radial_scale_m=1.0, growth_rate=0.2, min_spacing_m=0.5
        ).resolved()
        arm = _greedy_arm(spec, 40, 10**6)
        r = np.hypot(arm[:, 0], arm[:, 1])
        assert np.all(np.diff(r) > 0)
        # consecutive same-arm elements clear the minimum spacing
        gaps = np.hypot(*np.diff(arm, axis=0).T)
        assert np.all(gaps >= 0.5 * (1 - 1e-9))

    def test_rotation_symmetry_five_arms(self):
        spec = GeometrySpec(
            "elsa", 500, n_arms=5, growth_rate=0.05, min_spacing_m=10 * LAM,
            frequency_hz=F_LAMBDA_015,
        )
        geom = generate_elsa(spec)
        ang = 2 * np.pi / 5
        rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
        rotated = geom.positions @ rot.T
        from scipy.spatial import cKDTree

        d, _ = cKDTree(geom.positions).query(rotated)
        assert d.max() < 1e-9

    def test_all_pairs_clear_min_spacing(self):
        dmin = 5 * LAM
        spec = GeometrySpec(
            "elsa", 500, n_arms=5, growth_rate=0.05, min_spacing_m=dmin,
            frequency_hz=F_LAMBDA_015,
        )
        geom = generate_elsa(spec)
        assert geom.n_elements == 500
        assert brute_min_dist(geom.positions) >= dmin * (1 - 1e-9)

    def test_remainder_goes_to_first_arms(self):
        spec = GeometrySpec(
            "elsa", 23, n_arms=5, growth_rate=0.1, min_spacing_m=0.5, radial_scale_m=1.0
        )
        geom = generate_elsa(spec)
        counts = [int(np.sum(geom.arm_ids == k)) for k in range(5)]
        assert counts == [5, 5, 5, 4, 4]

    def test_budget_exhaustion_raises(self):
        # a near-circular spiral (tiny growth rate) can hold only ~2*pi*r/dmin
        # elements; asking for more exhausts the candidate budget
        spec = GeometrySpec(
            "elsa", 100, n_arms=1, radial_scale_m=1.0, growth_rate=1e-9,
            min_spacing_m=1.0,
        )
        with pytest.raises(SynthesisError, match="candidate steps"):
            generate_elsa(spec, step_budget=20000)


class TestStats:
    def test_two_points(self):
        geom = ArrayGeometry(
            np.array([[-0.5, 0.0], [0.5, 0.0]]), 0.15, GeometrySpec("sunflower", 2)
        )
        s = compute_stats(geom)
        assert np.isclose(s.d_ave_m, 1.0)
        assert np.isclose(s.aperture_diameter_m, 1.0)
        assert s.virtual_aperture_m2 == 0.0

    def test_unit_square(self):
        pos = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float) - 0.5
        geom = ArrayGeometry(pos, 0.15, GeometrySpec("sunflower", 4))
        s = compute_stats(geom)
        assert np.isclose(s.d_ave_m, 1.0)
        assert np.isclose(s.aperture_diameter_m, np.sqrt(2))
        assert np.isclose(s.virtual_aperture_m2, 1.0)

    def test_lattice_d_ave(self):
        geom = generate(
            GeometrySpec("rectangular-lattice", 1024, frequency_hz=F_LAMBDA_015)
        )
        s = compute_stats(geom)
        assert np.isclose(s.d_ave_m, brute_nn_mean(geom.positions))
        assert np.isclose(s.d_ave_m, 0.075)

    def test_single_element_d_ave_absent(self):
        geom = generate(GeometrySpec("rectangular-lattice", 1))
        s = compute_stats(geom)
        assert s.d_ave_m is None
        assert s.aperture_diameter_m == 0.0


class TestInvariants:
    SPECS = [
        GeometrySpec("rectangular-lattice", 64, frequency_hz=F_LAMBDA_015),
        GeometrySpec("sparse-square", 64, spacing_m=10 * LAM, frequency_hz=F_LAMBDA_015),
        GeometrySpec("sunflower", 100, radial_scale_m=1.0, min_spacing_m=0.01),
        GeometrySpec(
            "elsa", 100, n_arms=5, growth_rate=0.05, min_spacing_m=1.0,
            frequency_hz=F_LAMBDA_015,
        ),
        GeometrySpec(
            "sparse-square", 16, radiators_per_platform=3, spacing_m=3.0,
            frequency_hz=F_LAMBDA_015,
        ),
    ]

    def test_recentered(self):
        for spec in self.SPECS:
            geom = generate(spec)
            c = geom.positions.mean(axis=0)
            assert abs(c[0]) < 1e-9 and abs(c[1]) < 1e-9

    def test_min_spacing_holds(self):
        for spec in self.SPECS:
            geom = generate(spec)
            dmin = spec.resolved().min_spacing_m
            if spec.radiators_per_platform > 1:
                dmin = min(dmin, spec.wavelength_m / 2)
            assert brute_min_dist(geom.positions) >= dmin * (1 - 1e-9)

    def test_element_count_decomposition(self):
        for spec in self.SPECS:
            geom = generate(spec)
            assert geom.n_elements == spec.n_platforms * spec.radiators_per_platform

    def test_determinism(self):
        for spec in self.SPECS:
            a = generate(spec)
            b = generate(spec)
            assert np.array_equal(a.positions, b.positions)
            assert np.array_equal(a.platform_ids, b.platform_ids)
            assert np.array_equal(a.arm_ids, b.arm_ids)

    def test_scale_equivariance_exact_power_of_two(self):
        base = GeometrySpec(
            "elsa", 120, n_arms=4, growth_rate=0.08, min_spacing_m=1.0,
            radial_scale_m=1.0,
        )
        s0 = compute_stats(generate(base))
        for c in (2.0, 4.0):
            scaled = GeometrySpec(
                "elsa", 120, n_arms=4, growth_rate=0.08, min_spacing_m=1.0 * c,
                radial_scale_m=1.0 * c,
            )
            s1 = compute_stats(generate(scaled))
            assert s1.d_ave_m == c * s0.d_ave_m
            assert s1.aperture_diameter_m == c * s0.aperture_diameter_m
            assert s1.virtual_aperture_m2 == c * c * s0.virtual_aperture_m2

    def test_scale_equivariance_general_factor(self):
        base = GeometrySpec("sunflower", 80, radial_scale_m=1.0, min_spacing_m=1e-9)
        s0 = compute_stats(generate(base))
        c = 3.0
        s1 = compute_stats(
            generate(GeometrySpec("sunflower", 80, radial_scale_m=3.0, min_spacing_m=3e-9))
        )
        assert np.isclose(s1.d_ave_m, c * s0.d_ave_m, rtol=1e-12)
        assert np.isclose(s1.aperture_diameter_m, c * s0.aperture_diameter_m, rtol=1e-12)
        assert np.isclose(s1.virtual_aperture_m2, c * c * s0.virtual_aperture_m2, rtol=1e-12)

    def test_lattice_spacing_scale(self):
        a = compute_stats(generate(GeometrySpec("sparse-square", 16, spacing_m=1.0)))
        b = compute_stats(generate(GeometrySpec("sparse-square", 16, spacing_m=2.0)))
        assert b.d_ave_m == 2 * a.d_ave_m
        assert b.aperture_diameter_m == 2 * a.aperture_diameter_m


class TestExport:
    def test_csv_schema(self):
        geom = generate(
            GeometrySpec("elsa", 10, n_arms=2, min_spacing_m=1.0, radial_scale_m=1.0,
                         growth_rate=0.1)
        )
        text = geometry_to_csv(geom)
        lines = text.strip().splitlines()
        assert lines[0] == "index,platform,arm,x_m,y_m"
        assert len(lines) == 11
        first = lines[1].split(",")
        assert first[0] == "0" and first[2] in {"0", "1"}
        # 9 significant digits reproduce the coordinates to ~1e-9 relative
        x = float(first[3])
        assert np.isclose(x, geom.positions[0, 0], rtol=1e-8)

    def test_lattice_arm_is_minus_one(self):
        geom = generate(GeometrySpec("rectangular-lattice", 4))
        text = geometry_to_csv(geom)
        for line in text.strip().splitlines()[1:]:
            assert line.split(",")[2] == "-1"
