import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaygeom.geometry import (
    Point,
    Realization,
    dist_to_dest,
    k_nearest_to_dest,
    sample_poisson_count,
    sample_ppp,
    sample_uniform_disk,
)
from relaygeom.model import CellGeometry


class TestPoissonCount:
    def test_zero_mean_always_zero(self, rng):
        assert all(sample_poisson_count(0.0, rng) == 0 for _ in range(50))

    def test_mean_and_variance(self, rng):
        draws = np.array([sample_poisson_count(4.0, rng) for _ in range(100_000)])
        # Poisson: mean == variance; 3-sigma bands at n = 1e5
        assert abs(draws.mean() - 4.0) < 0.02
        assert abs(draws.var(ddof=1) - 4.0) < 0.1

    def test_void_probability(self, rng):
        draws = np.array([sample_poisson_count(2.0, rng) for _ in range(100_000)])
        p0 = float(np.mean(draws == 0))
        sigma = math.sqrt(0.1353 * (1 - 0.1353) / 100_000)
        assert abs(p0 - math.exp(-2.0)) < 3 * sigma

    @pytest.mark.parametrize("mean", [-1.0, math.inf, math.nan])
    def test_rejects_bad_mean(self, mean, rng):
        with pytest.raises(ValueError):
            sample_poisson_count(mean, rng)


class TestUniformDisk:
    def test_half_radius_mass_is_quarter(self, rng):
        n = 50_000
        inner = sum(sample_uniform_disk(4.0, rng).radius <= 2.0 for _ in range(n))
        sigma = math.sqrt(0.25 * 0.75 / n)
        assert abs(inner / n - 0.25) < 3 * sigma

    def test_mean_radius(self, rng):
        n = 50_000
        radii = np.array([sample_uniform_disk(3.0, rng).radius for _ in range(n)])
        # E[r] = (2/3) R; Var[r] = R^2 (1/2 - 4/9)
        sigma = 3.0 * math.sqrt(0.5 - 4.0 / 9.0) / math.sqrt(n)
        assert abs(radii.mean() - 2.0) < 3 * sigma

    def test_angles_isotropic_over_sectors(self, rng):
        n = 40_000
        angles = np.array([sample_uniform_disk(1.0, rng).angle for _ in range(n)])
        counts, _ = np.histogram(angles, bins=8, range=(0.0, 2 * math.pi))
        sigma = math.sqrt(n * 0.125 * 0.875)
        assert np.all(np.abs(counts - n / 8) < 3.5 * sigma)

    def test_radial_bins_uniform_in_area(self, rng):
        n = 40_000
        nbins = 10
        edges = 2.0 * np.sqrt(np.linspace(0.0, 1.0, nbins + 1))  # equal-area shells
        radii = np.array([sample_uniform_disk(2.0, rng).radius for _ in range(n)])
        counts, _ = np.histogram(radii, bins=edges)
        sigma = math.sqrt(n * (1 / nbins) * (1 - 1 / nbins))
        assert np.all(np.abs(counts - n / nbins) < 3.5 * sigma)

    def test_rejects_nonpositive_radius(self, rng):
        with pytest.raises(ValueError):
            sample_uniform_disk(0.0, rng)


class TestSamplePpp:
    def test_mean_count(self, rng):
        cell = CellGeometry(cell_radius=10.0, dest_distance=5.0, relay_intensity=0.5)
        counts = np.array([len(sample_ppp(cell, rng)) for _ in range(10_000)])
        target = 0.5 * math.pi * 100.0  # 157.08
        sigma = math.sqrt(target / 10_000)
        assert abs(counts.mean() - target) < 3 * sigma

    def test_dispersion_index_near_one(self, rng):
        cell = CellGeometry(cell_radius=6.0, dest_distance=0.0, relay_intensity=0.4)
        counts = np.array([len(sample_ppp(cell, rng)) for _ in range(10_000)])
        dispersion = counts.var(ddof=1) / counts.mean()
        assert abs(dispersion - 1.0) < 3 * math.sqrt(2.0 / 10_000)

    def test_vanishing_intensity_gives_empty_fields(self, rng):
        cell = CellGeometry(cell_radius=1.0, dest_distance=0.0, relay_intensity=1e-7)
        assert all(len(sample_ppp(cell, rng)) == 0 for _ in range(1000))

    def test_subdisk_restriction_is_poisson(self, rng):
        # Counts inside a half-radius disk: Poisson with a quarter of the mass.
        cell = CellGeometry(cell_radius=8.0, dest_distance=0.0, relay_intensity=0.5)
        sub = []
        for _ in range(10_000):
            real = sample_ppp(cell, rng)
            sub.append(int(np.count_nonzero(real.radii <= 4.0)))
        sub = np.array(sub)
        target = 0.5 * math.pi * 16.0
        assert abs(sub.mean() - target) < 3 * math.sqrt(target / 10_000)
        assert abs(sub.var(ddof=1) / sub.mean() - 1.0) < 3 * math.sqrt(2.0 / 10_000)

    def test_realization_is_read_only(self, rng):
        cell = CellGeometry(cell_radius=10.0, dest_distance=0.0, relay_intensity=0.5)
        real = sample_ppp(cell, rng)
        with pytest.raises(ValueError):
            real.radii[0] = 0.0

    def test_points_roundtrip(self, rng):
        cell = CellGeometry(cell_radius=10.0, dest_distance=0.0, relay_intensity=0.1)
        real = sample_ppp(cell, rng)
        pts = real.points
        assert len(pts) == len(real)
        assert all(0 <= p.radius <= 10.0 for p in pts)

    def test_mismatched_arrays_rejected(self):
        cell = CellGeometry(cell_radius=10.0, dest_distance=0.0, relay_intensity=0.1)
        with pytest.raises(ValueError):
            Realization(radii=np.zeros(3), angles=np.zeros(4), cell=cell)


class TestDistToDest:
    def test_coincident(self):
        assert dist_to_dest(Point(5.0, 0.0), 5.0) == 0.0

    def test_pythagorean(self):
        assert dist_to_dest(Point(3.0, math.pi / 2), 4.0) == pytest.approx(5.0, abs=1e-12)

    def test_collinear_opposite(self):
        assert dist_to_dest(Point(2.0, math.pi), 5.0) == pytest.approx(7.0, abs=1e-12)

    @given(
        r=st.floats(0, 50),
        phi=st.floats(0, 2 * math.pi),
        r_d=st.floats(0, 50),
    )
    def test_reflection_symmetry(self, r, phi, r_d):
        direct = dist_to_dest(Point(r, phi), r_d)
        mirrored = dist_to_dest(Point(r, 2 * math.pi - phi), r_d)
        # compare squared distances: near-coincident geometries amplify a
        # 1-ulp cosine difference unboundedly through the square root
        tol = 1e-12 * (1.0 + (r + r_d) ** 2)
        assert abs(direct**2 - mirrored**2) <= tol

    @given(r=st.floats(0, 50), phi=st.floats(-2 * math.pi, 2 * math.pi), r_d=st.floats(0, 50))
    def test_triangle_inequality(self, r, phi, r_d):
        assert dist_to_dest(Point(r, phi), r_d) <= r + r_d + 1e-9


class TestKNearest:
    def test_empty_input(self):
        assert k_nearest_to_dest([], 5.0, 3) == ()

    def test_k_at_least_input_returns_all_sorted(self):
        pts = [Point(4.0, 0.0), Point(1.0, 0.0), Point(2.0, math.pi)]
        out = k_nearest_to_dest(pts, 1.0, 10)
        dists = [dist_to_dest(p, 1.0) for p in out]
        assert len(out) == 3
        assert dists == sorted(dists)

    def test_against_sort_truncate_oracle(self, rng):
        for _ in range(1000):
            n = int(rng.integers(0, 12))
            k = int(rng.integers(1, 6))
            r_d = float(rng.uniform(0, 5))
            pts = [
                Point(float(rng.uniform(0, 10)), float(rng.uniform(0, 2 * math.pi)))
                for _ in range(n)
            ]
            expected = tuple(
                sorted(pts, key=lambda p: (dist_to_dest(p, r_d), pts.index(p)))[: min(k, n)]
            )
            assert k_nearest_to_dest(pts, r_d, k) == expected

    def test_tie_break_by_input_index(self):
        # four points equidistant from the destination at the origin
        pts = [Point(2.0, a) for a in (1.0, 2.0, 3.0, 4.0)]
        assert k_nearest_to_dest(pts, 0.0, 2) == (pts[0], pts[1])

    def test_output_distances_non_decreasing(self, rng):
        pts = [
            Point(float(rng.uniform(0, 10)), float(rng.uniform(0, 2 * math.pi)))
            for _ in range(40)
        ]
        out = k_nearest_to_dest(pts, 3.0, 15)
        d = [dist_to_dest(p, 3.0) for p in out]
        assert all(a <= b for a, b in zip(d, d[1:]))

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            k_nearest_to_dest([Point(1.0, 0.0)], 1.0, 0)
