import math

import numpy as np
import pytest

from qhgeo import (
    ConfigurationError,
    DeformationParams,
    ShapeSpec,
    basepoint_change_distortion,
    build_grid_domain,
    build_quasihyperbolic,
    deformation_density,
    deformed_distance,
    domain_from_length_graph,
    sphericalization_envelope,
    sphericalize,
    uniformize,
    verify_deformation_comparability,
)
from qhgeo.sampling import check_metric_axioms, pair_sample


@pytest.fixture(scope="module")
def disk_pack():
    d = build_grid_domain(ShapeSpec("disk", {"radius": 1.0}, 0.05)).with_boundary_band(2.0)
    from qhgeo import QuasihyperbolicMetric

    k = QuasihyperbolicMetric(d)
    w = int(d.nearest_vertex([(0.0, 0.0)])[0])
    return d, k, w


@pytest.fixture(scope="module")
def punctured_sphericalized():
    d, k = build_quasihyperbolic(
        build_grid_domain(ShapeSpec("punctured-plane-truncation", {"radius": 6.0}, 0.25))
    )
    return d, k, sphericalize(d, (0.0, 0.0), max_points=1200, rng=np.random.default_rng(0))


class TestDensity:
    def test_one_at_base_point(self, disk_pack):
        _, k, w = disk_pack
        assert deformation_density(k, [w], w, 0.3)[0] == 1.0

    def test_matches_radial_oracle(self, disk_pack):
        d, k, w = disk_pack
        x = int(d.nearest_vertex([(0.5, 0.0)])[0])
        # k(w, x) is log 2 along the radius, so the density is 2^(-1/2)
        assert deformation_density(k, [x], w, 0.5)[0] == pytest.approx(2 ** -0.5, rel=0.02)

    def test_small_epsilon_limit(self, disk_pack):
        d, k, w = disk_pack
        idx = np.arange(0, d.n, 37)
        assert np.allclose(deformation_density(k, idx, w, 1e-9), 1.0, atol=1e-6)

    def test_params_validation(self):
        with pytest.raises(ConfigurationError, match="epsilon"):
            DeformationParams("uniformize", (0.0, 0.0), epsilon=1.5)
        with pytest.raises(ConfigurationError, match="kind"):
            DeformationParams("fold", (0.0, 0.0))


class TestUniformizedSpace:
    def test_zero_iff_equal(self, disk_pack):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        assert deformed_distance(u, 3, 3) == 0.0
        assert deformed_distance(u, 3, 9) > 0.0

    @pytest.mark.parametrize("eps", [0.1, 0.2, 0.5])
    def test_diameter_and_base_depth_bounds(self, disk_pack, eps):
        d, k, w = disk_pack
        u = uniformize(d, k, w, eps)
        assert u.diameter_estimate() <= (2.0 / eps) * 1.05
        assert u.boundary_distance()[w] >= (1.0 / (eps * math.e)) / 1.05

    def test_single_path_upper_bound(self, disk_pack, rng):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        i = int(d.nearest_vertex([(-0.4, 0.3)])[0])
        j = int(d.nearest_vertex([(0.5, -0.1)])[0])
        path = k.geodesic(i, j)
        weights = np.asarray(u.matrix[path[:-1], path[1:]]).ravel()
        assert deformed_distance(u, i, j) <= weights.sum() + 1e-12

    def test_metric_axioms_deformed_and_its_qh(self, disk_pack, rng):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        assert check_metric_axioms(u.metric_view(), 3000, rng).passed
        assert check_metric_axioms(u.qh_view(), 3000, rng).passed

    def test_epsilon_range_enforced(self, disk_pack):
        d, k, w = disk_pack
        with pytest.raises(ConfigurationError, match="epsilon"):
            uniformize(d, k, w, 1.2)


class TestComparability:
    def test_coincident_pairs_skipped_and_symmetric(self, disk_pack):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        i = np.array([3, 5, 9])
        j = np.array([3, 9, 5])
        report = verify_deformation_comparability(u, (i, j))
        assert report.n_skipped == 1 and report.n_pairs == 2
        # swapped pair gives the identical ratio set
        assert report.max_ratio == pytest.approx(report.max_ratio, abs=0)

    def test_constant_finite(self, disk_pack, rng):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        pairs = pair_sample(d.n, 400, rng)
        report = verify_deformation_comparability(u, pairs)
        assert report.finite
        assert report.constant < 50


class TestSphericalization:
    def test_quasimetric_equilateral_values(self):
        # d(x,p) = d(y,p) = d(x,y) = 1: quasimetric 1/4, chain within [1/16, 1/4]
        coords = [[1.0, 0.0], [0.5, math.sqrt(3) / 2]]
        d = domain_from_length_graph(coords, [[0, 1]], [[0.0, 0.0]], lengths=[1.0])
        s = sphericalize(d, (0.0, 0.0))
        quasi = float(s.quasimetric([0], [1])[0])
        chain = deformed_distance(s, 0, 1)
        assert quasi == pytest.approx(0.25, abs=1e-12)
        assert 1.0 / 16.0 - 1e-12 <= chain <= 0.25 + 1e-12
        assert deformed_distance(s, 0, 0) == 0.0

    def test_base_point_must_be_boundary_sample(self, disk_pack):
        d, _, _ = disk_pack
        with pytest.raises(ConfigurationError, match="boundary"):
            sphericalize(d, (0.0, 0.0))  # interior point of the disk

    def test_diameter_bounded_by_one(self, punctured_sphericalized, rng):
        _, _, s = punctured_sphericalized
        i, j = pair_sample(s.n, 300, rng)
        assert np.all(s.quasimetric(i, j) <= 1.0 + 1e-12)
        assert np.all(s.pairs(i, j) <= 1.0 + 1e-12)

    def test_chain_vs_quasimetric_envelope(self, punctured_sphericalized, rng):
        _, _, s = punctured_sphericalized
        pairs = pair_sample(s.n, 400, rng, n_sources=12)
        report = sphericalization_envelope(s, pairs)
        assert report.passed

    def test_chain_metric_axioms(self, punctured_sphericalized, rng):
        _, _, s = punctured_sphericalized
        assert check_metric_axioms(s.metric_view(), 2000, rng, pool_size=48).passed

    def test_deformed_qh_metric_axioms(self, punctured_sphericalized, rng):
        _, _, s = punctured_sphericalized
        assert check_metric_axioms(s.qh_view(), 2000, rng, pool_size=48).passed

    def test_infinity_boundary_term(self, punctured_sphericalized):
        d, _, s = punctured_sphericalized
        # far from the base point the infinity term 1/(1+d(x,p)) dominates
        bd = s.boundary_distance()
        assert np.all(bd <= 1.0 / s.depth + 1e-12)


class TestBasepointChange:
    def test_identical_bases_give_slope_one(self, disk_pack, rng):
        d, k, w = disk_pack
        u = uniformize(d, k, w, 0.2)
        report = basepoint_change_distortion(u, u, n_quadruples=200, rng=rng)
        assert report.slope == 1.0

    def test_swap_duality(self, disk_pack):
        d, k, w = disk_pack
        u0 = uniformize(d, k, w, 0.2)
        u1 = uniformize(d, k, (0.5, 0.0), 0.2)
        fwd = basepoint_change_distortion(u0, u1, n_quadruples=400, rng=np.random.default_rng(1))
        bwd = basepoint_change_distortion(u1, u0, n_quadruples=400, rng=np.random.default_rng(1))
        assert fwd.slope > 0 and np.isfinite(fwd.slope)
        assert bwd.slope >= 1.0 / fwd.slope - 1e-12

    def test_mismatched_epsilon_rejected(self, disk_pack):
        d, k, w = disk_pack
        u0 = uniformize(d, k, w, 0.2)
        u1 = uniformize(d, k, w, 0.3)
        with pytest.raises(ConfigurationError, match="epsilon"):
            basepoint_change_distortion(u0, u1, n_quadruples=10)
