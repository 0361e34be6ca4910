import math

import numpy as np
import pytest

from robustreg import exprlang as ex
from robustreg import funcmodel as fm


class TestModels:
    def test_quadratic_identity(self):
        q = fm.QuadraticModel(np.eye(2), np.zeros(2), 0.0)
        assert q.eval([3.0, 4.0]) == 25.0

    def test_quadratic_rejects_indefinite(self):
        with pytest.raises(ValueError):
            fm.QuadraticModel(np.diag([1.0, -0.5]), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            fm.QuadraticModel(np.diag([1.0, 0.0]), np.zeros(2), 0.0)

    def test_quadratic_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            fm.QuadraticModel(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), 0.0)

    def test_affine_norm(self):
        m = fm.AffineNormModel(np.diag([2.0, 1.0]), np.zeros(2))
        assert m.eval([1.0, 0.0]) == 2.0

    def test_piecewise_breakpoint_belongs_right(self):
        fx = fm.load_fixture("intro1d")
        assert fx.model.eval([0.0]) == 0.0  # sqrt branch at the breakpoint
        assert fx.model.eval([-0.5]) == 0.5

    def test_piecewise_rejects_unsorted_breakpoints(self):
        with pytest.raises(ValueError):
            fm.Piecewise1DModel(np.array([1.0, 1.0]), tuple(
                ex.parse_expression("x1", 1) for _ in range(3)))

    def test_spectral_abscissa_diagonal_exact(self):
        model = fm.SpectralAbscissaModel(3)
        D = np.diag([-1.0, 0.25, -3.5])
        assert model.eval(D.reshape(-1)) == 0.25

    def test_spectral_radius_diagonal_exact(self):
        model = fm.SpectralRadiusModel(2)
        assert model.eval(np.diag([-1.0, -2.0]).reshape(-1)) == 2.0

    def test_spectral_abscissa_jordan_block(self):
        fx = fm.load_fixture("jordan2")
        assert fx.model.eval(fx.meta["flat"]) == 0.0


class TestDomains:
    def test_box_contains_and_projection(self):
        box = fm.BoxDomain([0.0, 0.0], [1.0, 1.0])
        assert box.contains([0.5, 0.5])
        assert not box.contains([1.5, 0.5])
        np.testing.assert_allclose(box.project([2.0, -1.0]), [1.0, 0.0])

    def test_polytope_halfplane(self):
        half = fm.PolytopeDomain(np.array([[0.0, 1.0]]), np.array([0.0]))
        assert half.contains([3.0, -0.1]) and not half.contains([0.0, 0.1])
        assert half.max_step(np.array([0.0, -1.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_ball_domain(self):
        ball = fm.BallDomain([1.0, 0.0], 2.0)
        assert ball.contains([2.9, 0.0]) and not ball.contains([3.1, 0.0])
        assert ball.ball_inside([1.0, 0.0], 1.9) and not ball.ball_inside([1.0, 0.0], 2.1)

    def test_crossed_axes_membership(self):
        fx = fm.load_fixture("crossed_axes")
        assert fx.domain.contains([0.5, 0.0])
        assert fx.domain.contains([0.0, -2.0])
        assert not fx.domain.contains([0.3, 0.3])

    def test_union_samples_land_on_reachable_member(self):
        fx = fm.load_fixture("crossed_axes")
        cloud = fx.domain.sample_in_ball([0.5, 0.0], 0.2, 400, seed=1)
        assert len(cloud) > 50
        assert np.abs(cloud[:, 1]).max() == 0.0  # only the x axis is within reach
        assert np.linalg.norm(cloud - np.array([0.5, 0.0]), axis=1).max() <= 0.2 * (1 + 1e-12)

    def test_ball_sampling_coverage_unit_square(self):
        # interior ball; empirical covering radius stays near the 2 eps n^{-1/2} scale
        box = fm.BoxDomain([0.0, 0.0], [1.0, 1.0])
        eps, n = 0.2, 2000
        cloud = box.sample_in_ball([0.5, 0.5], eps, n, seed=3)
        probes = np.array([[0.5 + 0.19 * math.cos(t), 0.5 + 0.19 * math.sin(t)]
                           for t in np.linspace(0, 2 * math.pi, 64)])
        gaps = np.array([np.linalg.norm(cloud - p, axis=1).min() for p in probes])
        assert gaps.max() <= 2.0 * eps / math.sqrt(n) * 12

    def test_smooth_equality_projection(self):
        circ = fm.load_fixture("circle", radius=2.0)
        p = circ.domain.project(np.array([3.0, 0.0]))
        np.testing.assert_allclose(p, [2.0, 0.0], atol=1e-10)

    def test_sample_raises_when_empty(self):
        axis = fm.SmoothEqualityDomain((ex.parse_expression("x2", 2),), 2)
        with pytest.raises(ValueError):
            axis.sample_in_ball([0.0, 5.0], 0.1, 50, seed=0)


class TestFixtures:
    def test_intro1d_reference(self):
        fx = fm.load_fixture("intro1d")
        assert fx.model.eval([4.0]) == fx.meta["reference_value"]
        alpha = fx.meta["alpha"]
        assert alpha(0.25) == pytest.approx(-0.11602540378443868, abs=1e-15)
        assert alpha(0.25) > -0.25

    def test_intro1d_closed_form_consistency(self):
        fx = fm.load_fixture("intro1d")
        cf = fx.meta["robust_closed_form"]
        assert cf(0.0, 0.25) == pytest.approx(0.5)
        assert cf(-0.5, 0.25) == pytest.approx(0.75)

    def test_root_k_values(self):
        fx2 = fm.load_fixture("root_k", k=2)
        assert fx2.model.eval([0.81]) == pytest.approx(0.9, rel=1e-14)
        fx3 = fm.load_fixture("root_k", k=3)
        assert fx3.model.eval([0.125]) == pytest.approx(0.5, rel=1e-12)
        assert fx3.meta["robust_at_zero"](1e-3) == pytest.approx(0.1, rel=1e-12)

    def test_example24b_reference_point(self):
        fx = fm.load_fixture("example24b")
        assert fx.model.eval([1.0, 3.0]) == 1.0

    def test_example24b_matches_branch_reference(self):
        fx = fm.load_fixture("example24b")
        ref = fx.meta["reference"]
        rng = np.random.default_rng(7)
        pts = rng.uniform(-2.0, 2.0, size=(10_000, 2))
        got = fx.model.eval_many(pts)
        want = np.array([ref(p[0], p[1]) for p in pts])
        np.testing.assert_array_equal(got, want)

    def test_example24b_continuity_across_boundaries(self):
        fx = fm.load_fixture("example24b")
        rng = np.random.default_rng(11)
        P, Q = fx.meta["boundary_pairs"](rng, 1000)
        jumps = np.abs(fx.model.eval_many(P) - fx.model.eval_many(Q))
        assert jumps.max() < 1e-9

    def test_intro1d_continuity_at_breakpoint(self):
        # the sqrt branch rises like sqrt(gap), so the straddle must be < 1e-18
        fx = fm.load_fixture("intro1d")
        rng = np.random.default_rng(13)
        t = rng.uniform(0.5, 1.0, size=1000)
        left = fx.model.eval_many((-1e-20 * t)[:, None])
        right = fx.model.eval_many((1e-20 * t)[:, None])
        assert np.abs(left - right).max() < 1e-9

    def test_jordan2_profile_formula(self):
        fx = fm.load_fixture("jordan2")
        assert fx.meta["robust_profile"](1e-2) == pytest.approx(0.1004987562112089, rel=1e-12)

    def test_crossed_axes_contains_half_axis_point(self):
        fx = fm.load_fixture("crossed_axes")
        assert fx.domain.contains([0.5, 0.0]) is True

    def test_epi_dyadic_profile_corners(self):
        dom = fm.DyadicEpigraphDomain(12)
        for k in range(0, 11):
            c = 2.0 ** -k
            assert dom.profile(c) == pytest.approx(c, rel=1e-14)
            assert dom.contains([c, c])
        lo, hi = dom.boundary_info([2.0 ** -3, 2.0 ** -3])
        assert lo == 0.0 and hi == pytest.approx(1.0 + 2.0 ** -2)

    def test_epi_dyadic_midsegment_slope(self):
        dom = fm.DyadicEpigraphDomain(12)
        x = 0.75 * 2.0 ** -3  # inside segment k=3 on the right half
        s = dom.profile_slope(x)
        h = 1e-9
        fd = (dom.profile(x + h) - dom.profile(x - h)) / (2 * h)
        assert s == pytest.approx(fd, rel=1e-5)

    def test_unknown_fixture(self):
        with pytest.raises(KeyError):
            fm.load_fixture("not-a-fixture")

    def test_three_adic_steps(self):
        fx = fm.load_fixture("three_adic_steps", depth=6)
        assert fx.model.eval([1.0 / 3.0 + 1e-9]) == pytest.approx(1.0 / 3.0)
        assert fx.model.eval([2.0 / 9.0 - 1e-9]) == pytest.approx(1.0 / 9.0)
        assert fx.domain.contains([0.0])
        assert fx.domain.contains([1.0 / 9.0])
        assert not fx.domain.contains([0.25])

    def test_osc_quadratic_fixture(self):
        fx = fm.load_fixture("osc_quadratic")
        assert fx.model.eval([0.0]) == 0.0
        t = 0.3
        assert fx.model.eval([t]) == pytest.approx(t * t * math.sin(1 / (t * t)))
