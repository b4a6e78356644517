import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetnet.laplace import (
    approx_cluster_mean, fap_hole_integral, lens_area, lt_fap_to_mu, lt_inter_cluster,
    lt_intra_cluster, lt_macro_to_fu, lt_mbs_to_mu, intra_cluster_moments, moment_flatness,
)
from hetnet.scenario import Scenario
from oracle_values import REF


@pytest.fixture
def sc():
    return Scenario()


class TestFemtoUserTransforms:
    def test_intra_exponent(self, sc):
        s = sc.network.r_0 ** 4 / sc.network.P_F
        value = lt_intra_cluster(s, 60.0, sc.network, sc.traffic)
        assert -math.log(value) == pytest.approx(REF["fu_intra_exponent(r_m=60)"], rel=1e-9)

    def test_macro_plus_inter_exponent(self, sc):
        s = sc.network.r_0 ** 4 / sc.network.P_F
        value = lt_macro_to_fu(s, 0.5, sc.network) * lt_inter_cluster(s, sc.network, sc.traffic)
        assert -math.log(value) == pytest.approx(REF["fu_macro_plus_inter_exponent(zeta=0.5)"], rel=1e-10)

    def test_cluster_mean_grows_with_exclusion(self, sc):
        base = approx_cluster_mean(sc.network, sc.traffic, 0.0)
        assert base == pytest.approx(sc.network.c / sc.traffic.N)
        assert approx_cluster_mean(sc.network, sc.traffic, 60.0) == pytest.approx(
            base / REF["p_access(r_m=60)"], rel=1e-12)

    def test_inter_cluster_ignores_r_m(self, sc):
        # thinning and the larger per-channel share cancel
        s = np.geomspace(1e-8, 1e-2, 5)
        a = lt_inter_cluster(s, sc.network, sc.traffic)
        b = lt_inter_cluster(s, sc.replace(r_m=120).network, sc.traffic)
        np.testing.assert_array_equal(a, b)

    @given(st.floats(1e-9, 1e-1))
    def test_transforms_in_unit_interval(self, s):
        sc = Scenario()
        for v in (lt_macro_to_fu(s, 0.7, sc.network),
                  lt_intra_cluster(s, 30.0, sc.network, sc.traffic),
                  lt_inter_cluster(s, sc.network, sc.traffic)):
            assert 0.0 <= float(v) <= 1.0

    def test_empty_cluster(self, sc):
        empty = sc.replace(c=0.0)
        assert lt_intra_cluster(1e-3, 60.0, empty.network, empty.traffic) == 1.0


class TestMacroUserTransforms:
    def test_mbs_transform_at_delta_half(self, sc):
        net = sc.network
        s, r = 2.0 / net.P_B * 100.0 ** 4, 100.0
        v = s * net.P_B / r ** 4
        expected = math.exp(-math.pi * net.lambda_B * math.sqrt(s * net.P_B) * math.atan(math.sqrt(v)))
        assert lt_mbs_to_mu(s, r, 1.0, net) == pytest.approx(expected, rel=1e-13)

    def test_hole_vanishes_at_r_m_zero(self, sc):
        w = np.array([0.1, 10.0, 1e4])
        np.testing.assert_allclose(fap_hole_integral(w, 0.0, 50.0, 0.5),
                                   (math.pi ** 2 / 2) * np.sqrt(w), rtol=1e-14)

    @pytest.mark.parametrize("key", [k for k in REF if k.startswith("hole_integral")])
    def test_hole_integral_against_nested_quadrature(self, key):
        w, r_m, R = (float(x) for x in key[len("hole_integral("):-1].split(","))
        assert fap_hole_integral(w, r_m, R, 0.5) == pytest.approx(REF[key], rel=1e-8)

    def test_hole_integral_decreases_with_r_m(self):
        values = [fap_hole_integral(100.0, r, 50.0, 0.5) for r in (0, 20, 50, 80, 120)]
        assert np.all(np.diff(values) < 0)

    def test_fap_transform_increases_with_r_m(self, sc):
        s = 1.0 / (sc.network.chi * sc.network.P_F)
        values = [lt_fap_to_mu(s, r, sc.network, sc.traffic) for r in (0, 30, 60, 120)]
        assert np.all(np.diff(values) > 0)


class TestLensArea:
    def test_limits(self):
        assert lens_area(0.0, 50, 60) == pytest.approx(math.pi * 2500)
        assert lens_area(110.0, 50, 60) == 0.0
        assert lens_area(200.0, 50, 60) == 0.0

    def test_equal_discs(self):
        a, d = 1.0, 1.0
        expected = 2 * a * a * math.acos(d / (2 * a)) - 0.5 * d * math.sqrt(4 * a * a - d * d)
        assert lens_area(d, a, a) == pytest.approx(expected, rel=1e-13)

    @given(st.floats(0, 200), st.floats(1, 100), st.floats(1, 100))
    def test_symmetric_and_bounded(self, d, a, b):
        la = lens_area(d, a, b)
        assert la == pytest.approx(lens_area(d, b, a), rel=1e-9, abs=1e-9)
        assert 0 <= la <= math.pi * min(a, b) ** 2 * (1 + 1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-50, 50, size=(400_000, 2))
        inside = (np.hypot(*pts.T) <= 50) & (np.hypot(pts[:, 0] - 40, pts[:, 1]) <= 30)
        assert inside.mean() * 100 ** 2 == pytest.approx(lens_area(40.0, 50, 30), rel=0.02)


class TestIntraClusterMoments:
    def test_guard(self, sc):
        with pytest.raises(ValueError, match="diverge"):
            intra_cluster_moments(0.0, 0.0, sc.network, sc.traffic)

    def test_outside_cluster(self, sc):
        with pytest.raises(ValueError):
            intra_cluster_moments(60.0, 1.0, sc.network, sc.traffic)

    def test_centre_closed_form(self, sc):
        net = sc.network
        eps = 1.0
        c_eff = net.c / sc.traffic.N
        # 2 c~/R^2 * P_F * int_eps^R t^(1-alpha) dt at alpha=4
        expected = 2 * c_eff / net.R ** 2 * net.P_F * 0.5 * (eps ** -2 - net.R ** -2)
        first, second = intra_cluster_moments(0.0, eps, net, sc.traffic)
        assert first == pytest.approx(expected, rel=1e-10)
        assert second > first ** 2

    def test_point_and_radius_agree(self, sc):
        a = intra_cluster_moments((30.0, 40.0), 2.0, sc.network, sc.traffic)
        b = intra_cluster_moments(50.0, 2.0, sc.network, sc.traffic)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_flat_near_the_centre(self, sc):
        # with a small guard the mean is dominated by the local density
        assert moment_flatness(1.0, sc.network, sc.traffic) < 1.01
