import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetnet.coverage import (
    DEFAULT_GRID_DB, Tier, avg_rate, channel_demands, coverage, coverage_curve, coverage_fu,
    coverage_mu, mcs_probabilities, mean_channels,
)
from hetnet.scenario import Mode, Scenario
from oracle_values import REF


@pytest.fixture
def sc():
    return Scenario()


class TestMacroCoverage:
    def test_orthogonal_anchor(self, sc):
        assert coverage_mu(sc, 1.0, 1.0, Mode.ORTHOGONAL) == pytest.approx(1 / (1 + math.pi / 4), rel=1e-14)
        assert coverage_mu(sc, 1.0, 1.0, Mode.ORTHOGONAL) == pytest.approx(REF["mu_orthogonal(zeta=1,beta=1)"])

    def test_closed_form_at_r_m_zero(self, sc):
        assert coverage_mu(sc, 1.0, 1.0, Mode.COCHANNEL, 0.0) == pytest.approx(
            REF["mu_cochannel_closed(zeta=1,beta=1)"], rel=1e-12)

    def test_radial_integral_against_reference(self, sc):
        assert coverage_mu(sc, 1.0, 1.0, Mode.COCHANNEL, 60.0) == pytest.approx(
            REF["mu_cochannel(zeta=1,beta=1,r_m=60)"], rel=1e-7)

    def test_radial_integral_tends_to_closed_form(self, sc):
        beta = np.geomspace(0.1, 30, 10)
        tiny = coverage_mu(sc, 0.8, beta, Mode.COCHANNEL, 1e-3)
        closed = coverage_mu(sc, 0.8, beta, Mode.COCHANNEL, 0.0)
        np.testing.assert_allclose(tiny, closed, rtol=1e-6)

    def test_no_femtos_equals_orthogonal(self, sc):
        empty = sc.replace(lambda_F=0.0)
        beta = np.geomspace(0.1, 30, 7)
        np.testing.assert_allclose(coverage_mu(empty, 0.6, beta, Mode.COCHANNEL, 60.0),
                                   coverage_mu(empty, 0.6, beta, Mode.ORTHOGONAL), rtol=1e-14)

    def test_partial_is_a_mixture(self, sc):
        beta = np.array([0.5, 2.0])
        p_c = sc.spectrum.p_c(sc.traffic.N)
        shared = coverage_mu(sc.replace(N=sc.spectrum.n_f), 0.7, beta, Mode.COCHANNEL)
        orth = coverage_mu(sc, 0.7, beta, Mode.ORTHOGONAL)
        np.testing.assert_allclose(coverage_mu(sc, 0.7, beta, Mode.PARTIAL),
                                   p_c * shared + (1 - p_c) * orth, rtol=1e-12)

    def test_scalar_and_array(self, sc):
        assert isinstance(coverage_mu(sc, 1.0), float)
        assert coverage_mu(sc, 1.0, np.ones(3)).shape == (3,)


class TestFemtoCoverage:
    def test_reference_point(self, sc):
        assert coverage_fu(sc, 0.5, 1.0, Mode.COCHANNEL, 60.0) == pytest.approx(
            REF["fu_cochannel(zeta=0.5,r_m=60)"], rel=1e-9)

    def test_orthogonal_has_no_macro_term(self, sc):
        assert coverage_fu(sc, 0.0, 2.0, Mode.ORTHOGONAL) == coverage_fu(sc, 1.0, 2.0, Mode.ORTHOGONAL)

    def test_no_interferers_means_full_coverage(self, sc):
        alone = sc.replace(lambda_F=1e-12, c=0.0)
        assert coverage_fu(alone, 0.0, 10.0, Mode.COCHANNEL) == 1.0


class TestProperties:
    @given(st.sampled_from(list(Mode)), st.sampled_from(["mu", "fu"]), st.floats(0.05, 1.0))
    def test_nonincreasing_in_threshold(self, mode, tier, zeta):
        sc = Scenario()
        values = coverage(sc, tier, zeta, 10 ** (DEFAULT_GRID_DB[::4] / 10), mode)
        assert np.all(np.diff(values) <= 1e-12)
        assert np.all((values >= 0) & (values <= 1))

    @given(st.floats(0.0, 0.95), st.floats(0.01, 0.05))
    def test_nonincreasing_in_zeta(self, zeta, step):
        sc = Scenario()
        for tier in Tier:
            assert coverage(sc, tier, zeta + step, 1.0) <= coverage(sc, tier, zeta, 1.0) + 1e-12

    def test_curve_record(self, sc):
        curve = coverage_curve(sc, "fu", 0.5, [0.0, 5.0])
        assert curve.source == "analytic" and curve.tier is Tier.FU
        assert [p[2] for p in curve.points()] == [None, None]


class TestLoadCoupling:
    def test_channel_demands(self, sc):
        gammas = np.asarray(sc.traffic.mcs.thresholds)
        np.testing.assert_allclose(channel_demands(sc), 0.5 / np.log2(1 + gammas))

    def test_mcs_probabilities_sum_to_one(self, sc):
        probs = mcs_probabilities(sc, 0.5)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= 0)

    def test_mean_channels_rises_with_load(self, sc):
        assert mean_channels(sc, 1.0) > mean_channels(sc, 0.1)

    def test_single_level(self, sc):
        from hetnet.scenario import McsTable
        one = sc.replace(mcs=McsTable((1.0,)))
        assert mean_channels(one, 0.3) == pytest.approx(0.5)

    def test_total_outage(self, sc):
        from hetnet.scenario import McsTable
        harsh = sc.replace(mcs=McsTable((1e300,)))
        with pytest.raises(ValueError, match="total outage"):
            mcs_probabilities(harsh, 1.0, Mode.COCHANNEL, 60.0)


class TestAverageRate:
    def test_orthogonal_mu_against_direct_integral(self, sc):
        from scipy import integrate
        f = lambda t: coverage_mu(sc, 1.0, math.expm1(t), Mode.ORTHOGONAL)  # noqa: E731
        direct = integrate.quad(f, 0, 200, limit=400)[0] / math.log(2)
        assert avg_rate(sc, "mu", Mode.ORTHOGONAL) == pytest.approx(direct, rel=1e-6)

    def test_no_interferers_is_unbounded(self, sc):
        assert avg_rate(sc, "mu", Mode.ORTHOGONAL, zeta=0.0) == math.inf

    def test_rate_tracks_r_m(self, sc):
        assert avg_rate(sc, "mu", r_m=100.0) > avg_rate(sc, "mu", r_m=0.0)
        assert avg_rate(sc, "fu", r_m=100.0) < avg_rate(sc, "fu", r_m=0.0)
