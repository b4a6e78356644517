"""Coverage probabilities of macro and femto users for the three sharing modes."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .laplace import fap_hole_integral, lt_inter_cluster, lt_intra_cluster, lt_macro_to_fu
from .scenario import Mode, Scenario
from .special import h2, ppp_integral

log = logging.getLogger(__name__)

DEFAULT_GRID_DB = np.arange(-10.0, 25.0 + 1e-9, 0.5)


class Tier(str, enum.Enum):
    MU = "mu"
    FU = "fu"

    @classmethod
    def parse(cls, value: "str | Tier") -> "Tier":
        if isinstance(value, Tier):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown tier {value!r}; expected 'mu' or 'fu'") from None


@dataclass
class CoverageCurve:
    """Coverage probability against SIR threshold.

    ``ci_low``/``ci_high`` are ``None`` for analytic curves.
    """

    thresholds_db: np.ndarray
    values: np.ndarray
    tier: Tier
    mode: Mode
    source: str = "analytic"
    scenario_id: str = "default"
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def points(self):
        for i, (t, v) in enumerate(zip(self.thresholds_db, self.values)):
            if self.ci_low is None:
                yield float(t), float(v), None, None
            else:
                yield float(t), float(v), float(self.ci_low[i]), float(self.ci_high[i])


def _resolve(scenario: Scenario, mode, r_m):
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    r_m = scenario.spectrum.r_m if r_m is None else float(r_m)
    return mode, r_m


# --- femto users ------------------------------------------------------------

def coverage_fu(scenario: Scenario, zeta: float, beta=None, mode=None, r_m=None):
    """P(SIR_F >= beta) for a typical FU.

    The product of macro, intra-cluster and inter-cluster LTs at
    s = beta r_0^alpha / P_F. Orthogonal mode has no macro term, no
    cognition and N_F channels; partial mode keeps cognition on N_F channels.
    ``beta`` may be an array and defaults to the scenario's beta_F.
    """
    net, traffic = scenario.network, scenario.traffic
    mode, r_m = _resolve(scenario, mode, r_m)
    beta = np.asarray(scenario.spectrum.beta_F if beta is None else beta, dtype=float)
    s = beta * net.r_0 ** net.alpha / net.P_F
    if mode is Mode.COCHANNEL:
        n_ch = traffic.N
    else:
        n_ch = scenario.spectrum.n_f
    if mode is Mode.ORTHOGONAL:
        r_m = 0.0
        macro = 1.0
    else:
        macro = lt_macro_to_fu(s, zeta, net)
    value = macro * lt_intra_cluster(s, r_m, net, traffic, n_ch) * lt_inter_cluster(s, net, traffic, n_ch)
    return value[()] if np.ndim(value) == 0 else value


# --- macro users ------------------------------------------------------------

def _panel_rule(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


# u = pi lambda_B r^2 runs over (0, 48]; exp(-48) ~ 1e-21 bounds the truncated tail
_U_NODES, _U_WEIGHTS = _panel_rule(
    np.concatenate(([0.0], np.geomspace(1e-6, 48.0, 24))), 12
)


@lru_cache(maxsize=256)
def _hole_table(betas: tuple, ratio: float, lambda_B: float, r_m: float, R: float, delta: float):
    """J(w(u, beta)) on the fixed u rule for each beta; shape (len(betas), nodes)."""
    alpha = 2.0 / delta
    r = np.sqrt(_U_NODES / (math.pi * lambda_B))
    w = np.outer(np.asarray(betas), ratio * r ** alpha)
    J = fap_hole_integral(w.ravel(), r_m, R, delta)
    return np.asarray(J).reshape(w.shape)


def _mu_cochannel(scenario, zeta, beta, r_m, n_ch):
    """Radial integral over the serving distance; r_m = 0 has a closed form."""
    net = scenario.network
    d = net.delta
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    macro = 1.0 + zeta * beta ** d * h2(beta, d)
    if r_m <= 0 or net.lambda_F * net.c == 0:
        femto = (
            ppp_integral(d) * net.lambda_F * net.c / (net.lambda_B * n_ch)
            * (beta * net.chi * net.P_F / net.P_B) ** d
        )
        return 1.0 / (macro + femto)
    ratio = net.chi * net.P_F / net.P_B
    J = _hole_table(tuple(beta.tolist()), ratio, net.lambda_B, r_m, net.R, d)
    exponent = -np.outer(macro, _U_NODES) - net.lambda_F * net.c / n_ch * J
    return np.exp(exponent) @ _U_WEIGHTS


def _mu_orthogonal(scenario, zeta, beta):
    d = scenario.network.delta
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    return 1.0 / (1.0 + zeta * beta ** d * h2(beta, d))


def coverage_mu(scenario: Scenario, zeta: float, beta=None, mode=None, r_m=None):
    """P(SIR_M >= beta) for a typical MU served by its nearest MBS.

    Co-channel integrates over the serving distance with an r_m hole around
    the MU; orthogonal has macro interference only; partial mixes the two
    with weight p_c = N_F/N, the shared part seeing FAPs spread over N_F
    channels. ``beta`` may be an array and defaults to the scenario's beta_M.
    """
    mode, r_m = _resolve(scenario, mode, r_m)
    scalar = beta is None or np.ndim(beta) == 0
    beta = scenario.spectrum.beta_M if beta is None else beta
    if mode is Mode.COCHANNEL:
        value = _mu_cochannel(scenario, zeta, beta, r_m, scenario.traffic.N)
    elif mode is Mode.ORTHOGONAL:
        value = _mu_orthogonal(scenario, zeta, beta)
    else:
        p_c = scenario.spectrum.p_c(scenario.traffic.N)
        shared = _mu_cochannel(scenario, zeta, beta, r_m, scenario.spectrum.n_f)
        value = p_c * shared + (1.0 - p_c) * _mu_orthogonal(scenario, zeta, beta)
    value = np.clip(value, 0.0, 1.0)
    return float(value[0]) if scalar else value


def coverage(scenario: Scenario, tier, zeta: float, beta=None, mode=None, r_m=None):
    tier = Tier.parse(tier)
    fn = coverage_mu if tier is Tier.MU else coverage_fu
    return fn(scenario, zeta, beta, mode, r_m)


def coverage_curve(scenario: Scenario, tier, zeta: float, thresholds_db=DEFAULT_GRID_DB,
                   mode=None, r_m=None) -> CoverageCurve:
    tier = Tier.parse(tier)
    mode, r_m = _resolve(scenario, mode, r_m)
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    beta = 10.0 ** (thresholds_db / 10.0)
    values = np.atleast_1d(coverage(scenario, tier, zeta, beta, mode, r_m))
    return CoverageCurve(thresholds_db, values, tier, mode, "analytic", scenario.name,
                         meta={"zeta": zeta, "r_m": r_m})


# --- load coupling ----------------------------------------------------------

def channel_demands(scenario: Scenario) -> np.ndarray:
    """n_i = (R_th/B) / log2(1 + Gamma_i) for each MCS level."""
    gammas = np.asarray(scenario.traffic.mcs.thresholds)
    return scenario.traffic.r_th_over_b / np.log2(1.0 + gammas)


def mcs_probabilities(scenario: Scenario, zeta: float, mode=None, r_m=None) -> np.ndarray:
    """Probability that a covered MU uses MCS level i.

    [M(G_i) - M(G_{i+1})] / M(G_1) with M(G_{T+1}) = 0.
    """
    gammas = np.asarray(scenario.traffic.mcs.thresholds)
    m = np.append(np.atleast_1d(coverage_mu(scenario, zeta, gammas, mode, r_m)), 0.0)
    if not m[0] > 0:
        raise ValueError("total outage; demand undefined")
    return np.maximum(m[:-1] - m[1:], 0.0) / m[0]


def mean_channels(scenario: Scenario, zeta: float, mode=None, r_m=None) -> float:
    """Mean channels per admitted macro service."""
    return float(channel_demands(scenario) @ mcs_probabilities(scenario, zeta, mode, r_m))


# --- best-effort rate -------------------------------------------------------

_T_NODES, _T_WEIGHTS = _panel_rule(np.concatenate(([0.0], np.geomspace(0.05, 200.0, 20))), 12)


def _has_interferers(scenario, tier, mode, zeta):
    net = scenario.network
    femto = net.lambda_F * net.c > 0
    if tier is Tier.MU:
        shared = mode is not Mode.ORTHOGONAL and femto
        return zeta > 0 or shared
    macro = mode is not Mode.ORTHOGONAL and zeta > 0
    return macro or femto


def avg_rate(scenario: Scenario, tier, mode=None, r_m=None, zeta: float = 1.0) -> float:
    """E[log2(1 + SIR)] in b/s/Hz from the coverage curve.

    Uses E[ln(1+X)] = int_0^inf P(X > e^t - 1) dt. The macro activity is
    1 unless given. Returns ``inf`` when the user sees no interferers.
    """
    tier = Tier.parse(tier)
    mode, r_m = _resolve(scenario, mode, r_m)
    if not _has_interferers(scenario, tier, mode, zeta):
        log.warning("unbounded; singular no-interference case")
        return math.inf
    beta = np.expm1(_T_NODES)
    values = np.atleast_1d(coverage(scenario, tier, zeta, beta, mode, r_m))
    # coverage decays like beta^-delta, so the tail beyond t=200 is below 1e-40
    return float(values @ _T_WEIGHTS / math.log(2.0))

