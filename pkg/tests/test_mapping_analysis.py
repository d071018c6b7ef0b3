import numpy as np
import pytest

from qhgeo import (
    ConfigurationError,
    DomainSide,
    QuasihyperbolicMetric,
    ShapeSpec,
    build_grid_domain,
    check_global_qs_hypotheses,
    estimate_boundary_lipschitz,
    estimate_local_bilipschitz,
    estimate_local_quasisymmetry,
    estimate_qh_bilipschitz,
    estimate_quasi_isometry,
    estimate_quasimobius,
    estimate_relative,
    estimate_semisolid,
)
from qhgeo.mapping_analysis import MappingPair, build_mapping, sample_balls, sample_qh_pairs
from qhgeo.sampling import pair_sample
from qhgeo.verifier.builtin_maps import builtin_mapping


def make_side(kind, params, h, band=2.0):
    d = build_grid_domain(ShapeSpec(kind, params, h)).with_boundary_band(band)
    return DomainSide(d, QuasihyperbolicMetric(d))


@pytest.fixture(scope="module")
def disk_side():
    return make_side("disk", {"radius": 1.0}, 0.04)


@pytest.fixture(scope="module")
def disk_side_scaled():
    return make_side("disk", {"radius": 2.0}, 0.08)


@pytest.fixture(scope="module")
def identity_map(disk_side):
    return builtin_mapping("identity", {}, disk_side, disk_side)


@pytest.fixture(scope="module")
def automorphism(disk_side):
    return builtin_mapping("disk_automorphism", {"a": [0.5, 0.0]}, disk_side, disk_side)


class TestIdentityNeutrality:
    def test_all_estimators_exactly_neutral(self, identity_map, rng):
        m = identity_map
        balls = sample_balls(m.source, 0.2, 150, 6, rng)
        assert estimate_boundary_lipschitz(m, 0.2, balls=balls).value == 1.0
        assert estimate_relative(m, 0.2, balls=balls).value == 1.0
        lb = estimate_local_bilipschitz(m, 0.2, balls=balls)
        assert lb.l1 == 1.0 and np.all(lb.c_x == 1.0)
        assert estimate_local_quasisymmetry(m, 0.2, balls=balls).value == 1.0
        pairs = pair_sample(m.source.n, 400, rng)
        assert estimate_semisolid(m, pairs).value == 1.0
        assert estimate_qh_bilipschitz(m, pairs).value == 1.0
        qi = estimate_quasi_isometry(m, pairs)
        assert (qi.multiplicative_l, qi.additive_c) == (1.0, 0.0)
        assert estimate_quasimobius(m, n_quadruples=300, rng=rng).slope == 1.0


class TestSimilarityInvariance:
    def test_scaling_map_has_unit_constants_and_scaled_table(self, disk_side, disk_side_scaled, rng):
        m = builtin_mapping("similarity", {"scale": 2.0}, disk_side, disk_side_scaled)
        balls = sample_balls(m.source, 0.2, 150, 6, rng)
        assert estimate_boundary_lipschitz(m, 0.2, balls=balls).value == 1.0
        assert estimate_relative(m, 0.2, balls=balls).value == 1.0
        lb = estimate_local_bilipschitz(m, 0.2, balls=balls)
        assert lb.l1 == 1.0 and np.all(lb.c_x == 2.0)
        assert estimate_local_quasisymmetry(m, 0.2, balls=balls).value == 1.0

    def test_post_composition_with_similarity_is_invisible(self, disk_side, disk_side_scaled, rng):
        auto = builtin_mapping("disk_automorphism", {"a": [0.5, 0.0]}, disk_side, disk_side)

        fwd = auto.forward_fn
        inv = auto.inverse_fn
        composed = build_mapping(
            disk_side,
            disk_side_scaled,
            lambda pts: 2.0 * fwd(pts),
            lambda pts: inv(np.asarray(pts, float) / 2.0),
            name="scaled-automorphism",
        )
        balls = sample_balls(disk_side, 0.2, 150, 6, np.random.default_rng(7))
        balls2 = sample_balls(disk_side, 0.2, 150, 6, np.random.default_rng(7))
        l0 = estimate_boundary_lipschitz(auto, 0.2, balls=balls).value
        l1 = estimate_boundary_lipschitz(composed, 0.2, balls=balls2).value
        assert l0 == l1
        q0 = estimate_local_quasisymmetry(auto, 0.2, balls=balls).value
        q1 = estimate_local_quasisymmetry(composed, 0.2, balls=balls2).value
        assert q0 == q1
        cx0 = estimate_local_bilipschitz(auto, 0.2, balls=balls).c_x
        cx1 = estimate_local_bilipschitz(composed, 0.2, balls=balls2).c_x
        assert np.array_equal(2.0 * cx0, cx1)


class TestInverseDuality:
    def test_inverse_run_equals_swapped_run(self, automorphism):
        m = automorphism
        swapped = MappingPair(
            m.target, m.source, m.inverse_idx, m.forward_idx, m.inverse_fn, m.forward_fn
        )
        a = estimate_boundary_lipschitz(m.inverse(), 0.2, n_balls=100, pts_per_ball=6,
                                        rng=np.random.default_rng(3)).value
        b = estimate_boundary_lipschitz(swapped, 0.2, n_balls=100, pts_per_ball=6,
                                        rng=np.random.default_rng(3)).value
        assert a == b


class TestAutomorphismDistortion:
    def test_relative_below_lipschitz_on_shared_sample(self, automorphism, rng):
        m = automorphism
        balls = sample_balls(m.source, 0.2, 300, 8, rng)
        l_val = estimate_boundary_lipschitz(m, 0.2, balls=balls).value
        c1 = estimate_relative(m, 0.2, balls=balls).value
        assert 1.0 < c1 <= l_val

    def test_semisolid_and_bilipschitz_bounded_by_density_comparison(self, automorphism):
        # hyperbolic isometry: quasihyperbolic metrics are 2-comparable
        m = automorphism
        pairs = sample_qh_pairs(m, 2500, np.random.default_rng(5),
                                clearance_h=4.0, image_clearance_h=12.0, min_qh=2.0)
        assert estimate_semisolid(m, pairs).value <= 2.0 * 1.05
        assert estimate_qh_bilipschitz(m, pairs).value <= 2.0 * 1.05

    def test_local_chain_couplings(self, automorphism, rng):
        m = automorphism
        c1 = estimate_relative(m, 0.2, n_balls=200, pts_per_ball=6, rng=rng,
                               bilateral=True).value
        theta1 = 0.2 / (8.0 * c1)
        balls = sample_balls(m.source, theta1, 200, 6, rng)
        lb = estimate_local_bilipschitz(m, theta1, balls=balls)
        qs = estimate_local_quasisymmetry(m, theta1, balls=balls)
        assert lb.l1 <= 4.0 * c1 * 1.05
        assert qs.value <= lb.l1**2 * (1.0 + 1e-12)

    def test_quasi_isometry_fits(self, automorphism):
        m = automorphism
        pairs = sample_qh_pairs(m, 2000, np.random.default_rng(9), min_qh=2.0)
        qi = estimate_quasi_isometry(m, pairs)
        assert qi.multiplicative_l <= 2.0 * 1.05
        assert qi.additive_c < 3.0

    def test_step_bound_sweep_zero_violations(self, automorphism):
        m = automorphism
        rng = np.random.default_rng(11)
        i, j = sample_qh_pairs(m, 2000, rng, min_qh=0.0)
        edges = m.source.domain.graph.edges
        pick = rng.integers(0, len(edges), size=500)
        pairs = (np.concatenate([i, edges[pick, 0]]), np.concatenate([j, edges[pick, 1]]))
        qi = estimate_quasi_isometry(
            m, pairs, step_inputs={"uniformity_a": 2.0, "q": 0.5, "eta_slope": 1.5}
        )
        assert qi.step_violations == ()
        assert qi.step_bound == pytest.approx(4.0 * 4.0 * np.log(2.0))

    def test_mobius_cross_ratio_exactness(self, automorphism, rng):
        slope = estimate_quasimobius(automorphism, n_quadruples=800, rng=rng).slope
        assert abs(slope - 1.0) <= 1e-9


class TestEstimatorMechanics:
    def test_monotone_in_sample(self, automorphism, rng):
        m = automorphism
        i, j = pair_sample(m.source.n, 600, rng)
        small = estimate_semisolid(m, (i[:300], j[:300])).value
        full = estimate_semisolid(m, (i, j)).value
        assert full >= small

    def test_vertex_mode_identity(self):
        side = make_side("disk", {"radius": 1.0}, 0.1)
        m = build_mapping(side, side, None, None, name="vertex-identity")
        assert not m.analytic
        rng = np.random.default_rng(0)
        assert estimate_boundary_lipschitz(m, 0.5, n_balls=60, pts_per_ball=6, rng=rng).value == 1.0
        assert estimate_relative(m, 0.5, n_balls=60, pts_per_ball=6, rng=rng).value == 1.0
        lb = estimate_local_bilipschitz(m, 0.5, n_balls=60, pts_per_ball=6, rng=rng)
        assert lb.l1 == 1.0
        assert estimate_local_quasisymmetry(m, 0.5, n_balls=60, pts_per_ball=6, rng=rng).value == 1.0

    def test_vertex_mode_radius_too_small_raises(self):
        side = make_side("disk", {"radius": 1.0}, 0.1)
        m = build_mapping(side, side, None, None)
        with pytest.raises(ConfigurationError, match="refine"):
            estimate_boundary_lipschitz(m, 0.01, n_balls=40, rng=np.random.default_rng(0))

    def test_degenerate_quadruples_skipped(self, automorphism):
        m = automorphism
        quad = np.array([[1, 1, 2, 3], [4, 5, 6, 7]])
        report = estimate_quasimobius(m, quadruples=quad)
        assert report.n_skipped == 1 and report.n_quadruples == 1


class TestGlobalQSHypotheses:
    def test_disk_value(self, identity_map):
        report = check_global_qs_hypotheses(identity_map)
        assert report.c0 == pytest.approx(2.0, abs=0.25)
        assert report.w == pytest.approx((0.0, 0.0), abs=0.05)

    def test_square_value(self):
        side = make_side("square", {"side": 1.0}, 0.02)
        m = builtin_mapping("identity", {}, side, side)
        report = check_global_qs_hypotheses(m)
        assert report.c0 == pytest.approx(2.0 * np.sqrt(2.0), abs=0.3)

    def test_lshape_bounded_by_uniformity(self, rng):
        side = make_side("L-shape", {}, 0.05)
        m = builtin_mapping("identity", {}, side, side)
        report = check_global_qs_hypotheses(m)
        from qhgeo import estimate_uniformity

        pairs = pair_sample(side.n, 200, rng, n_sources=16)
        a = estimate_uniformity(side.domain, QuasihyperbolicMetric(side.domain), pairs).constant_a
        assert report.c0 <= 4.0 * a * 1.05

    def test_truncated_shapes_refused(self):
        side = make_side("half-plane-truncation", {"radius": 2.0}, 0.1)
        m = builtin_mapping("identity", {}, side, side)
        with pytest.raises(ConfigurationError, match="sphericalize"):
            check_global_qs_hypotheses(m)
