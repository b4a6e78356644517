import math

import numpy as np
import pytest

from hetnet.coverage import coverage_fu, coverage_mu
from hetnet.laplace import lt_mbs_to_mu
from hetnet.load import solve_activity
from hetnet.montecarlo import (
    SimulationWindow, apply_channel_access, block_rng, channel_plan, estimate_activity,
    estimate_coverage, interference_samples, laplace_estimate, mbs_interference_beyond,
    mean_interference_tail, sample_realization, wilson_interval,
)
from hetnet.scenario import Mode, Scenario


@pytest.fixture
def sc():
    return Scenario()


class TestWindow:
    def test_default_radius(self, sc):
        w = SimulationWindow.for_scenario(sc)
        assert w.radius == pytest.approx(max(10 / math.sqrt(math.pi * 2e-5), 60 + 250))

    def test_too_small(self, sc):
        with pytest.raises(ValueError, match="mean cell radii"):
            SimulationWindow(radius=100.0).check(sc)

    @pytest.mark.parametrize("kwargs", [dict(trials=0), dict(threads=0), dict(assignment="greedy")])
    def test_controls(self, kwargs):
        with pytest.raises(ValueError):
            SimulationWindow(radius=1.0, **kwargs)


class TestStreams:
    def test_blocks_are_independent_and_repeatable(self):
        a = block_rng(7, 0).random(4)
        np.testing.assert_array_equal(a, block_rng(7, 0).random(4))
        assert not np.array_equal(a, block_rng(7, 1).random(4))
        assert not np.array_equal(a, block_rng(8, 0).random(4))

    def test_thread_count_does_not_change_hits(self, sc):
        kw = dict(seed=11, trials=1200, block_size=300)
        one = estimate_coverage(sc, "mu", 0.5, [0.0, 5.0], SimulationWindow.for_scenario(sc, threads=1, **kw))
        four = estimate_coverage(sc, "mu", 0.5, [0.0, 5.0], SimulationWindow.for_scenario(sc, threads=4, **kw))
        np.testing.assert_array_equal(one.meta["hits"], four.meta["hits"])


class TestWilson:
    def test_known_interval(self):
        lo, hi = wilson_interval(50, 100)
        z = 1.959963984540054
        centre = (0.5 + z * z / 200) / (1 + z * z / 100)
        half = z * math.sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100)
        assert (lo, hi) == pytest.approx((centre - half, centre + half), rel=1e-10)

    def test_edges(self):
        lo, hi = wilson_interval(0, 20)
        assert lo == 0.0 and 0 < hi < 0.2


class TestChannelAccess:
    def test_plan(self, sc):
        plan = channel_plan(sc, Mode.PARTIAL)
        assert plan.femto == tuple(range(10)) and plan.dedicated == (0,)
        assert channel_plan(sc, Mode.ORTHOGONAL).cognitive == ()
        assert channel_plan(sc, Mode.COCHANNEL, dedicated_channel=False).dedicated == ()

    def test_exclusion_rule_is_exact(self, sc):
        rng = block_rng(3, 0)
        busy = sc.replace(lambda_M=4e-3)
        real = sample_realization(busy, SimulationWindow(radius=800.0), rng)
        real = apply_channel_access(real, busy, 0.5, rng)
        for i, centre in enumerate(real.parents[:50]):
            near = np.hypot(*(real.mu_xy - centre).T) <= 60.0
            blocked = set(real.mu_channel[near].tolist())
            allowed = set(np.flatnonzero(real.cluster_access[i]).tolist())
            assert allowed == {0} | (set(range(20)) - blocked)
        used = real.fap_channel[real.fap_channel >= 0]
        assert np.all(real.cluster_access[real.fap_parent[real.fap_channel >= 0], used])

    def test_tagged_mu_blocks_nearby_clusters(self, sc):
        rng = block_rng(5, 0)
        real = sample_realization(sc, SimulationWindow(radius=800.0), rng)
        real = apply_channel_access(real, sc, 1.0, rng, tagged_mu=(0.0, 0.0, 4))
        close = np.hypot(*real.parents.T) <= 60.0
        assert not real.cluster_access[close, 4].any()

    def test_round_robin_balances(self, sc):
        rng = block_rng(9, 0)
        crowded = sc.replace(c=60.0, r_m=0.0)
        real = sample_realization(crowded, SimulationWindow(radius=800.0), rng)
        real = apply_channel_access(real, crowded, 1.0, rng, assignment="round_robin")
        for i in range(min(20, len(real.parents))):
            ch = real.fap_channel[real.fap_parent == i]
            if len(ch):
                counts = np.bincount(ch, minlength=20)
                assert counts.max() - counts.min() <= 1


class TestCoverageEstimates:
    def test_orthogonal_mu(self, sc):
        win = SimulationWindow.for_scenario(sc, seed=1, trials=8000)
        curve = estimate_coverage(sc, "mu", 1.0, [-5.0, 0.0, 5.0], win, Mode.ORTHOGONAL)
        np.testing.assert_allclose(curve.values, coverage_mu(sc, 1.0, 10 ** np.array([-0.5, 0, 0.5]),
                                                             Mode.ORTHOGONAL), atol=0.03)
        assert np.all(curve.ci_low <= curve.values) and np.all(curve.values <= curve.ci_high)

    def test_cochannel_fu(self, sc):
        win = SimulationWindow.for_scenario(sc, seed=2, trials=3000)
        curve = estimate_coverage(sc, "fu", 0.5, [0.0, 10.0], win)
        analytic = coverage_fu(sc, 0.5, np.array([1.0, 10.0]))
        assert np.all(np.abs(curve.values - analytic) < 0.05)

    def test_fu_signal_is_own_fap(self, sc):
        s = interference_samples(sc, "fu", 0.5, SimulationWindow.for_scenario(sc, trials=2000, seed=4))
        # unit-mean fading over a fixed link at r_0
        assert s["signal"].mean() == pytest.approx(sc.network.P_F * 15.0 ** -4, rel=0.1)


class TestLaplaceOracle:
    def test_mbs_beyond_r(self, sc):
        r = 150.0
        win = SimulationWindow.for_scenario(sc, trials=20_000, seed=6)
        samples = mbs_interference_beyond(sc, r, 1.0, win)
        s = np.array([0.2, 1.0, 5.0]) * r ** 4 / sc.network.P_B
        est = laplace_estimate(samples, s)
        # the window only holds MBSs in the annulus r < |x| <= W
        exact = lt_mbs_to_mu(s, r, 1.0, sc.network) / lt_mbs_to_mu(s, win.radius, 1.0, sc.network)
        assert np.all(np.abs(est.mean - exact) <= 4 * est.stderr)
        # the truncation makes the estimate optimistic against the full plane
        assert np.all(est.mean >= lt_mbs_to_mu(s, r, 1.0, sc.network))

    def test_tail_bias(self):
        assert mean_interference_tail(1e-5, 1.0, 100.0, 4.0) == pytest.approx(2 * math.pi * 1e-5 * 1e-4 / 2)


class TestActivityEstimate:
    def test_matches_fixed_point(self, sc):
        sol = solve_activity(sc)
        est = estimate_activity(sc, trials=4000, seed=1, n_bar=sol.n_bar)
        assert est.zeta == pytest.approx(sol.zeta, abs=0.05)
        assert est.ci_low <= est.zeta <= est.ci_high

    def test_voronoi_areas(self, sc):
        sol = solve_activity(sc)
        est = estimate_activity(sc, trials=600, seed=2, n_bar=sol.n_bar, voronoi=True)
        assert est.zeta == pytest.approx(sol.zeta, abs=0.07)

    def test_idle(self, sc):
        assert estimate_activity(sc.replace(lambda_M=0.0), trials=10, n_bar=1.0).zeta == 0.0
