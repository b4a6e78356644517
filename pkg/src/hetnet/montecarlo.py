"""Monte Carlo simulator for the two-tier network with exact cognitive access.

The typical user sits at the origin. MBSs form a PPP, FAPs a Matern cluster
process, and MUs a PPP per channel. A cluster may use a cognitive channel
only if no MU on that channel lies within r_m of its centre. Channel 0 is a
dedicated femto channel that is always accessible (switchable).

Trials are split into fixed blocks. Each block draws from its own Philox
stream keyed by (seed, block index), and only integer hit counts are
reduced, so results do not depend on the thread count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import spatial, stats

from .coverage import CoverageCurve, Tier
from .load import CELL_SHAPE, erlang_occupancy, mode_channels, solve_activity
from .scenario import Mode, Scenario, per_channel_mu_density

log = logging.getLogger(__name__)

ASSIGNMENTS = ("random", "round_robin")


@dataclass(frozen=True)
class SimulationWindow:
    """Observation disc around the tagged user plus run controls.

    ``assignment`` selects how a cluster's FAPs are spread over its
    accessible channels; ``dedicated_channel`` keeps channel 0 exempt from
    cognition.
    """

    radius: float
    seed: int = 0
    trials: int = 10_000
    threads: int = 1
    block_size: int = 500
    assignment: str = "random"
    dedicated_channel: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.assignment not in ASSIGNMENTS:
            raise ValueError(f"assignment must be one of {ASSIGNMENTS}")

    @classmethod
    def for_scenario(cls, scenario: Scenario, **kwargs) -> "SimulationWindow":
        """Disc of radius max(10 / sqrt(pi lambda_B), r_m + 5 R)."""
        net = scenario.network
        radius = max(_min_radius(net.lambda_B), scenario.spectrum.r_m + 5 * net.R)
        return cls(radius=radius, **kwargs)

    def check(self, scenario: Scenario) -> None:
        minimum = _min_radius(scenario.network.lambda_B)
        if self.radius < minimum * (1 - 1e-12):
            raise ValueError(f"window radius {self.radius:g} m is below 10 mean cell radii ({minimum:g} m)")


def _min_radius(lambda_B: float) -> float:
    """Ten mean cell radii; zero for an empty macro tier."""
    return 10.0 / math.sqrt(math.pi * lambda_B) if lambda_B > 0 else 0.0


def default_threads() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of trials."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


# --- channel plan ----------------------------------------------------------

@dataclass(frozen=True)
class ChannelPlan:
    """Femto channels, which of them are cognitive, and the macro channels."""

    femto: tuple[int, ...]
    cognitive: tuple[int, ...]
    macro: tuple[int, ...]

    @property
    def dedicated(self) -> tuple[int, ...]:
        return tuple(ch for ch in self.femto if ch not in self.cognitive)


def channel_plan(scenario: Scenario, mode: Mode, dedicated_channel: bool = True) -> ChannelPlan:
    N, n_f = scenario.traffic.N, scenario.spectrum.n_f
    if mode is Mode.ORTHOGONAL:
        return ChannelPlan(tuple(range(n_f)), (), tuple(range(n_f, N)))
    femto = tuple(range(N if mode is Mode.COCHANNEL else n_f))
    start = 1 if dedicated_channel else 0
    return ChannelPlan(femto, femto[start:], tuple(range(N)))


# --- explicit single realizations -------------------------------------------

@dataclass
class NetworkRealization:
    """One snapshot of every node in the window.

    Channel flags are ``None`` until :func:`apply_channel_access` runs.
    ``fap_channel`` is -1 for FAPs left without a channel.
    """

    mbs: np.ndarray
    parents: np.ndarray
    fap_parent: np.ndarray
    fap_xy: np.ndarray
    mu_xy: np.ndarray
    mu_channel: np.ndarray
    mbs_fading: np.ndarray
    fap_fading: np.ndarray
    mbs_active: np.ndarray | None = None
    cluster_access: np.ndarray | None = None
    fap_channel: np.ndarray | None = None

    @property
    def fap_offsets(self) -> np.ndarray:
        return self.fap_xy - self.parents[self.fap_parent]


def sample_realization(scenario: Scenario, window: SimulationWindow,
                       rng: np.random.Generator) -> NetworkRealization:
    """Draw MBSs, cluster parents with their FAPs, and per-channel MUs."""
    net, tr = scenario.network, scenario.traffic
    W = window.radius
    mbs = _disc(rng, rng.poisson(net.lambda_B * math.pi * W * W), W)
    parents = _disc(rng, rng.poisson(net.lambda_F * math.pi * (W + net.R) ** 2), W + net.R)
    counts = rng.poisson(net.c, len(parents))
    fap_parent = np.repeat(np.arange(len(parents)), counts)
    fap_xy = parents[fap_parent] + _disc(rng, len(fap_parent), net.R)
    mu_radius = W + net.R + scenario.spectrum.r_m
    mu_counts = rng.poisson(per_channel_mu_density(tr) * math.pi * mu_radius ** 2, tr.N)
    mu_channel = np.repeat(np.arange(tr.N), mu_counts)
    mu_xy = _disc(rng, len(mu_channel), mu_radius)
    return NetworkRealization(
        mbs, parents, fap_parent, fap_xy, mu_xy, mu_channel,
        rng.exponential(size=len(mbs)), rng.exponential(size=len(fap_xy)),
    )


def _cluster_blocking(parents, mu_xy, mu_channel, r_m, n_channels):
    """blocked[i, ch]: an MU on channel ch lies within r_m of parent i."""
    blocked = np.zeros((len(parents), n_channels), dtype=bool)
    if r_m <= 0 or len(parents) == 0 or len(mu_xy) == 0:
        return blocked
    pairs = spatial.cKDTree(parents).query_ball_point(mu_xy, r_m)
    for j, hits in enumerate(pairs):
        if hits:
            blocked[hits, mu_channel[j]] = True
    return blocked


def apply_channel_access(real: NetworkRealization, scenario: Scenario, zeta: float,
                         rng: np.random.Generator, mode=None, assignment: str = "random",
                         dedicated_channel: bool = True,
                         tagged_mu: tuple[float, float, int] | None = None) -> NetworkRealization:
    """Set MBS activity, cluster channel access and per-FAP channels.

    ``tagged_mu`` = (x, y, channel) adds an MU that takes part in the
    exclusion rule without being part of the sampled PPP.
    """
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    plan = channel_plan(scenario, mode, dedicated_channel)
    N = scenario.traffic.N
    mbs_active = np.zeros((len(real.mbs), N), dtype=bool)
    mbs_active[:, list(plan.macro)] = rng.random((len(real.mbs), len(plan.macro))) < zeta

    mu_xy, mu_ch = real.mu_xy, real.mu_channel
    if tagged_mu is not None:
        mu_xy = np.vstack([mu_xy, [tagged_mu[:2]]])
        mu_ch = np.append(mu_ch, tagged_mu[2])
    blocked = _cluster_blocking(real.parents, mu_xy, mu_ch, scenario.spectrum.r_m, N)
    access = np.zeros((len(real.parents), N), dtype=bool)
    access[:, list(plan.femto)] = True
    if plan.cognitive:
        cog = list(plan.cognitive)
        access[:, cog] = ~blocked[:, cog]

    fap_channel = np.full(len(real.fap_xy), -1)
    order = np.argsort(real.fap_parent, kind="stable")
    starts = np.searchsorted(real.fap_parent[order], np.arange(len(real.parents) + 1))
    for i in range(len(real.parents)):
        members = order[starts[i]:starts[i + 1]]
        channels = np.flatnonzero(access[i])
        if len(members) == 0 or len(channels) == 0:
            continue
        if assignment == "random":
            fap_channel[members] = rng.choice(channels, size=len(members))
        else:
            slots = np.resize(rng.permutation(channels), len(members))
            fap_channel[members] = rng.permutation(slots)
    return replace(real, mbs_active=mbs_active, cluster_access=access, fap_channel=fap_channel)


# --- batched trials ---------------------------------------------------------

@dataclass
class _Block:
    """Per-trial received powers at the tagged user for one block."""

    signal: np.ndarray
    mbs: np.ndarray
    intra: np.ndarray
    inter: np.ndarray

    @property
    def interference(self):
        return self.mbs + self.intra + self.inter

    @property
    def sir(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.interference > 0, self.signal / self.interference, np.inf)


def _ppp_batch(rng, n_trials, mean, radius):
    counts = rng.poisson(mean, n_trials) if mean > 0 else np.zeros(n_trials, dtype=int)
    trial = np.repeat(np.arange(n_trials), counts)
    return trial, _disc(rng, len(trial), radius)


def _tile(xy, trial, spacing, columns):
    """Shift each trial's disc to its own tile so one tree serves a whole block."""
    return xy + np.column_stack((trial % columns, trial // columns)) * spacing


class _Trials:
    """Vectorised trial generator for one scenario, mode and tier."""

    def __init__(self, scenario: Scenario, mode: Mode, tier: Tier, zeta: float,
                 window: SimulationWindow):
        self.sc, self.mode, self.tier, self.zeta, self.win = scenario, mode, tier, zeta, window
        self.net = scenario.network
        self.plan = channel_plan(scenario, mode, window.dedicated_channel)
        self.r_m = 0.0 if mode is Mode.ORTHOGONAL else scenario.spectrum.r_m
        self.W = window.radius
        self.mu_radius = self.W + self.net.R + self.r_m
        self.spacing = 2.0 * self.mu_radius + 4.0 * self.r_m

    # macro tier
    def _mbs(self, rng, n, tagged_mu):
        net = self.net
        trial, xy = _ppp_batch(rng, n, net.lambda_B * math.pi * self.W ** 2, self.W)
        d = np.hypot(xy[:, 0], xy[:, 1])
        power = net.P_B * rng.exponential(size=len(d)) * d ** -net.alpha
        active = rng.random(len(d)) < self.zeta
        signal = np.zeros(n)
        if tagged_mu:
            nearest = np.full(n, np.inf)
            np.minimum.at(nearest, trial, d)
            serving = d == nearest[trial]
            signal = np.bincount(trial[serving], weights=power[serving], minlength=n)
            active &= ~serving
        else:
            power = power * net.chi
        return signal, np.bincount(trial, weights=power * active, minlength=n)

    def _parents(self, rng, n, present):
        net = self.net
        mean = net.lambda_F * math.pi * (self.W + net.R) ** 2
        counts = rng.poisson(mean, n) * present if mean > 0 else np.zeros(n, dtype=int)
        trial = np.repeat(np.arange(n), counts)
        return trial, _disc(rng, len(trial), self.W + net.R)

    def _blocked(self, rng, n, p_trial, p_xy):
        """Boolean (parents x cognitive channels) exclusion matrix."""
        n_cog = len(self.plan.cognitive)
        blocked = np.zeros((len(p_trial), n_cog), dtype=bool)
        if self.r_m <= 0 or n_cog == 0 or len(p_trial) == 0:
            return blocked
        mean = per_channel_mu_density(self.sc.traffic) * math.pi * self.mu_radius ** 2
        counts = rng.poisson(mean, (n, n_cog))
        m_trial = np.repeat(np.repeat(np.arange(n), n_cog), counts.ravel())
        m_ch = np.repeat(np.tile(np.arange(n_cog), n), counts.ravel())
        m_xy = _disc(rng, len(m_trial), self.mu_radius)
        if len(m_trial) == 0:
            return blocked
        cols = math.ceil(math.sqrt(n))
        opts = {"balanced_tree": False, "compact_nodes": False}
        tree_p = spatial.cKDTree(_tile(p_xy, p_trial, self.spacing, cols), **opts)
        tree_m = spatial.cKDTree(_tile(m_xy, m_trial, self.spacing, cols), **opts)
        pairs = tree_p.sparse_distance_matrix(tree_m, self.r_m, output_type="ndarray")
        blocked[pairs["i"], m_ch[pairs["j"]]] = True
        return blocked

    def _tagged_count(self, rng, n_access):
        """FAPs a cluster puts on the tagged channel given its accessible count."""
        c = self.net.c
        if self.win.assignment == "random":
            return rng.poisson(c / n_access)
        k = rng.poisson(c, len(n_access))
        base, rem = np.divmod(k, n_access)
        return base + (rng.random(len(k)) * n_access < rem)

    def _fap_power(self, rng, trial, centres, counts, n):
        net = self.net
        f_trial = np.repeat(trial, counts)
        xy = np.repeat(centres, counts, axis=0) + _disc(rng, len(f_trial), net.R)
        d = np.hypot(xy[:, 0], xy[:, 1])
        power = net.chi * net.P_F * rng.exponential(size=len(d)) * d ** -net.alpha
        return np.bincount(f_trial, weights=power, minlength=n)

    def run(self, rng, n):
        if self.tier is Tier.MU:
            return self._run_mu(rng, n)
        return self._run_fu(rng, n)

    def _run_mu(self, rng, n):
        signal, i_mbs = self._mbs(rng, n, tagged_mu=True)
        plan = self.plan
        if self.mode is Mode.ORTHOGONAL:
            shared = np.zeros(n, dtype=bool)
        elif self.mode is Mode.PARTIAL:
            shared = rng.random(n) < self.sc.spectrum.p_c(self.sc.traffic.N)
        else:
            shared = np.ones(n, dtype=bool)
        # the tagged MU sits on a cognitive femto channel when one exists
        tag = 0 if plan.cognitive else None
        p_trial, p_xy = self._parents(rng, n, shared)
        blocked = self._blocked(rng, n, p_trial, p_xy)
        n_access = len(plan.dedicated) + (len(plan.cognitive) - blocked.sum(axis=1))
        if tag is None:
            active = np.ones(len(p_trial), dtype=bool)
        else:
            hole = np.hypot(p_xy[:, 0], p_xy[:, 1]) <= self.r_m
            active = ~(blocked[:, tag] | hole)
        active &= n_access > 0
        counts = np.zeros(len(p_trial), dtype=int)
        counts[active] = self._tagged_count(rng, n_access[active])
        i_fap = self._fap_power(rng, p_trial, p_xy, counts, n)
        return _Block(signal, i_mbs, np.zeros(n), i_fap)

    def _run_fu(self, rng, n):
        net, plan = self.net, self.plan
        if self.mode is Mode.ORTHOGONAL:
            i_mbs = np.zeros(n)
        else:
            _, i_mbs = self._mbs(rng, n, tagged_mu=False)
        p_trial, p_xy = self._parents(rng, n, np.ones(n, dtype=bool))
        # own cluster at the origin is appended after the random parents
        own = len(p_trial)
        all_trial = np.concatenate([p_trial, np.arange(n)])
        all_xy = np.vstack([p_xy, np.zeros((n, 2))])
        blocked = self._blocked(rng, n, all_trial, all_xy)
        n_ded = len(plan.dedicated)
        n_access = n_ded + (len(plan.cognitive) - blocked.sum(axis=1))

        # serving channel: uniform over the own cluster's accessible channels
        own_access = np.hstack([np.ones((n, n_ded), dtype=bool), ~blocked[own:]])
        has_channel = own_access.any(axis=1)
        pick = np.floor(rng.random(n) * own_access.sum(axis=1)).astype(int)
        chosen = np.argmax(np.cumsum(own_access, axis=1) > pick[:, None], axis=1)
        cog_index = chosen - n_ded  # < 0 means a dedicated channel

        other = blocked[:own]
        ci = cog_index[p_trial]
        on_cog = ci >= 0
        active = np.ones(own, dtype=bool)
        active[on_cog] = ~other[np.flatnonzero(on_cog), ci[on_cog]]
        active &= n_access[:own] > 0
        counts = np.zeros(own, dtype=int)
        counts[active] = self._tagged_count(rng, n_access[:own][active])
        i_inter = self._fap_power(rng, p_trial, p_xy, counts, n)

        own_n = np.maximum(n_access[own:], 1)
        if self.win.assignment == "random":
            own_counts = rng.poisson(net.c / own_n)
        else:
            k = rng.poisson(net.c, n) + 1
            base, rem = np.divmod(k, own_n)
            own_counts = base + (rng.random(n) * own_n < rem) - 1
            own_counts = np.maximum(own_counts, 0)
        i_intra = self._fap_power(rng, np.arange(n), np.zeros((n, 2)), own_counts, n)

        signal = net.P_F * rng.exponential(size=n) * net.r_0 ** -net.alpha
        signal = np.where(has_channel, signal, 0.0)
        return _Block(signal, i_mbs, i_intra, i_inter)


def _blocks(trials, block_size):
    full, rest = divmod(trials, block_size)
    sizes = [block_size] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _map_blocks(func, window: SimulationWindow):
    jobs = _blocks(window.trials, window.block_size)
    if window.threads == 1 or len(jobs) == 1:
        return [func(b, size) for b, size in jobs]
    with ThreadPoolExecutor(max_workers=window.threads) as pool:
        return list(pool.map(lambda job: func(*job), jobs))


def wilson_interval(hits: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return float("nan"), float("nan")
    ci = stats.binomtest(int(hits), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_coverage(scenario: Scenario, tier, zeta: float, thresholds_db,
                      window: SimulationWindow | None = None, mode=None) -> CoverageCurve:
    """Empirical P(SIR >= beta) with Wilson 95% intervals."""
    tier = Tier.parse(tier)
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    window = window or SimulationWindow.for_scenario(scenario)
    window.check(scenario)
    thresholds_db = np.atleast_1d(np.asarray(thresholds_db, dtype=float))
    beta = 10.0 ** (thresholds_db / 10.0)
    sim = _Trials(scenario, mode, tier, zeta, window)

    def block(b, size):
        sir = sim.run(block_rng(window.seed, b), size).sir
        return (sir[:, None] >= beta[None, :]).sum(axis=0)

    hits = np.sum(_map_blocks(block, window), axis=0)
    n = window.trials
    ci = np.array([wilson_interval(h, n) for h in hits])
    return CoverageCurve(
        thresholds_db, hits / n, tier, mode, "montecarlo", scenario.name,
        ci_low=ci[:, 0], ci_high=ci[:, 1],
        meta={"zeta": zeta, "seed": window.seed, "trials": n, "hits": hits},
    )


# --- interference and Laplace-transform oracles -----------------------------

def interference_samples(scenario: Scenario, tier, zeta: float,
                         window: SimulationWindow | None = None, mode=None) -> dict[str, np.ndarray]:
    """Per-trial received powers at the tagged user, split by source.

    Keys: ``signal``, ``mbs``, ``intra`` (own cluster, FU only), ``inter``.
    """
    tier = Tier.parse(tier)
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    window = window or SimulationWindow.for_scenario(scenario)
    sim = _Trials(scenario, mode, tier, zeta, window)
    parts = _map_blocks(lambda b, size: sim.run(block_rng(window.seed, b), size), window)
    return {key: np.concatenate([getattr(p, key) for p in parts])
            for key in ("signal", "mbs", "intra", "inter")}


@dataclass(frozen=True)
class LaplaceEstimate:
    s: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


def laplace_estimate(samples: np.ndarray, s) -> LaplaceEstimate:
    """Empirical E[exp(-s I)] with its standard error."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    values = np.exp(-np.outer(s, samples))
    n = len(samples)
    return LaplaceEstimate(s, values.mean(axis=1), values.std(axis=1, ddof=1) / math.sqrt(n))


def mbs_interference_beyond(scenario: Scenario, r: float, zeta: float,
                            window: SimulationWindow | None = None) -> np.ndarray:
    """Samples of macro interference from active MBSs farther than r from the origin."""
    net = scenario.network
    window = window or SimulationWindow.for_scenario(scenario)
    W = window.radius
    if W <= r:
        raise ValueError("window must extend beyond the serving distance")

    def block(b, size):
        rng = block_rng(window.seed, b)
        trial, _ = _ppp_batch(rng, size, zeta * net.lambda_B * math.pi * (W * W - r * r), 0.0)
        d = np.sqrt(r * r + (W * W - r * r) * rng.random(len(trial)))
        power = net.P_B * rng.exponential(size=len(d)) * d ** -net.alpha
        return np.bincount(trial, weights=power, minlength=size)

    return np.concatenate(_map_blocks(block, window))


def mean_interference_tail(density: float, power: float, radius: float, alpha: float) -> float:
    """Mean interference from a PPP beyond ``radius``: the window truncation bias."""
    return 2 * math.pi * density * power * radius ** (2 - alpha) / (alpha - 2)


# --- activity ---------------------------------------------------------------

@dataclass(frozen=True)
class ActivityEstimate:
    zeta: float
    ci_low: float
    ci_high: float
    n_bar: float
    n_e: int
    cells: int


def _voronoi_areas(lambda_B: float, rng, n_cells: int) -> np.ndarray:
    """Areas of bounded Voronoi cells whose sites lie in the inner half window."""
    areas: list[float] = []
    while len(areas) < n_cells:
        radius = math.sqrt(max(4 * n_cells, 400) / (math.pi * lambda_B))
        pts = _disc(rng, rng.poisson(lambda_B * math.pi * radius ** 2), radius)
        vor = spatial.Voronoi(pts)
        inner = np.hypot(pts[:, 0], pts[:, 1]) < radius / 2
        for i in np.flatnonzero(inner):
            region = vor.regions[vor.point_region[i]]
            if -1 in region or not region:
                continue
            areas.append(spatial.ConvexHull(vor.vertices[region]).volume)
    return np.asarray(areas[:n_cells])


def estimate_activity(scenario: Scenario, trials: int = 10_000, seed: int = 0, mode=None,
                      r_m=None, n_bar: float | None = None, voronoi: bool = False) -> ActivityEstimate:
    """Mean busy-channel fraction over sampled cells.

    Each cell gets a gamma-distributed area (or a Voronoi area with
    ``voronoi=True``) and an Erlang-loss occupancy with N_e = floor(N_mode /
    n_bar) servers. ``n_bar`` defaults to the analytic fixed point's demand.
    """
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    tr, net = scenario.traffic, scenario.network
    if n_bar is None:
        n_bar = solve_activity(scenario, mode, r_m).n_bar
    n_e = max(1, int(mode_channels(scenario, mode) // n_bar))
    rng = block_rng(seed, 0)
    if voronoi:
        areas = _voronoi_areas(net.lambda_B, rng, trials)
    else:
        areas = rng.gamma(CELL_SHAPE, 1.0 / (CELL_SHAPE * net.lambda_B), trials)
    if tr.lambda_M == 0:
        return ActivityEstimate(0.0, 0.0, 0.0, n_bar, n_e, trials)
    u = rng.random(trials)
    busy = np.empty(trials)
    for i, a in enumerate(areas):
        pmf = erlang_occupancy(a, tr, n_e).pmf
        busy[i] = min(np.searchsorted(np.cumsum(pmf), u[i] * pmf.sum(), side="right"), n_e)
    fraction = busy / n_e
    mean = float(fraction.mean())
    half = 1.96 * float(fraction.std(ddof=1)) / math.sqrt(trials)
    return ActivityEstimate(mean, max(mean - half, 0.0), min(mean + half, 1.0), n_bar, n_e, trials)
