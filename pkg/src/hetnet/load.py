"""Macro-tier load: channel access, Erlang occupancy and the activity fixed point."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .coverage import mean_channels
from .scenario import Mode, Scenario, TrafficParams, per_channel_mu_density

log = logging.getLogger(__name__)

CELL_SHAPE = 3.5


class SolverError(RuntimeError):
    """The activity bisection ran out of iterations."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(f"{message} (bracket [{bracket[0]:.9g}, {bracket[1]:.9g}])")
        self.bracket = bracket


def access_probability(r_m: float, traffic: TrafficParams) -> float:
    """Probability that no same-channel MU lies within r_m of a cluster centre."""
    if r_m < 0:
        raise ValueError(f"r_m must be non-negative, got {r_m!r}")
    return math.exp(-per_channel_mu_density(traffic) * math.pi * r_m * r_m)


def accessible_channels_pmf(p: float, trials: int) -> np.ndarray:
    """Binomial(trials, p) masses over 0..trials."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if trials < 0:
        raise ValueError(f"trials must be >= 0, got {trials!r}")
    return stats.binom.pmf(np.arange(trials + 1), trials, p)


@dataclass(frozen=True)
class ClusterMean:
    exact: float
    approx: float

    @property
    def rel_gap(self) -> float:
        if self.approx == 0:
            return 0.0
        return (self.approx - self.exact) / self.approx


def effective_cluster_mean(p: float, N: int, c: float) -> ClusterMean:
    """Mean co-channel FAPs per cluster, exact binomial average and c/(N p).

    With k ~ Poisson(c) FAPs spread over n ~ Binomial(N, p) accessible
    channels, E[k/n | n >= 1] P(n >= 1) = c (1 - (1-p)^N) / (N p).
    """
    if not p > 0:
        raise ValueError("no accessible channels: p must be positive")
    if not p <= 1:
        raise ValueError(f"p must not exceed 1, got {p!r}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N!r}")
    approx = c / (N * p)
    # 1 - (1-p)^N without cancellation at small p
    return ClusterMean(exact=-approx * math.expm1(N * math.log1p(-p)) if p < 1 else approx,
                       approx=approx)


@dataclass(frozen=True)
class ErlangOccupancy:
    pmf: np.ndarray
    zeta_exact: float
    zeta_linear: float


def erlang_occupancy(a: float, traffic: TrafficParams, n_e: int) -> ErlangOccupancy:
    """Busy-server distribution of an M/M/n_e/n_e cell of area ``a``.

    The offered load is a lambda_M / mu services. ``zeta_exact`` is the
    mean occupancy over n_e, ``zeta_linear`` the unblocked approximation
    min(load / n_e, 1).
    """
    if not a > 0:
        raise ValueError(f"cell area must be positive, got {a!r}")
    if n_e < 1:
        raise ValueError(f"n_e must be >= 1, got {n_e!r}")
    load = a * traffic.lambda_M / traffic.mu
    n = np.arange(n_e + 1)
    if load == 0:
        pmf = np.zeros(n_e + 1)
        pmf[0] = 1.0
    else:
        logw = n * math.log(load) - special.gammaln(n + 1)
        pmf = np.exp(logw - logw.max())
        pmf /= pmf.sum()
    return ErlangOccupancy(pmf, float(n @ pmf) / n_e, min(load / n_e, 1.0))


def cell_area_pdf(a, lambda_B: float):
    """Gamma(3.5, rate 3.5 lambda_B) approximation of the Voronoi cell area density."""
    return stats.gamma.pdf(a, CELL_SHAPE, scale=1.0 / (CELL_SHAPE * lambda_B))


def activity_closed_form(inv_phi: float) -> float:
    """Mean of min(A lambda_B / phi, 1) over the gamma cell-area law.

    gamma(4.5, 3.5 phi) / (3.5 phi Gamma(3.5)) + Gamma(3.5, 3.5 phi) / Gamma(3.5),
    written with regularised functions: 3.5 P(4.5, x) / x + Q(3.5, x), x = 3.5 phi.
    """
    if inv_phi < 0:
        raise ValueError(f"inv_phi must be non-negative, got {inv_phi!r}")
    if inv_phi == 0:
        return 0.0
    if math.isinf(inv_phi):
        return 1.0
    x = CELL_SHAPE / inv_phi
    value = CELL_SHAPE * special.gammainc(CELL_SHAPE + 1, x) / x + special.gammaincc(CELL_SHAPE, x)
    return float(min(max(value, 0.0), 1.0))


def mode_channels(scenario: Scenario, mode=None) -> int:
    """Channels available to the macro tier: N, or N - N_F in orthogonal mode."""
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    if mode is Mode.ORTHOGONAL:
        return scenario.traffic.N - scenario.spectrum.n_f
    return scenario.traffic.N


def load_ratio(scenario: Scenario, n_bar: float, mode=None) -> float:
    """lambda_M n_bar / (lambda_B mu N_mode), the inverse of phi."""
    tr = scenario.traffic
    return tr.lambda_M * n_bar / (scenario.network.lambda_B * tr.mu * mode_channels(scenario, mode))


def activity_linear(scenario: Scenario, n_bar: float, mode=None) -> float:
    """Clamped linear activity min(lambda_M n_bar / (lambda_B mu N_mode), 1)."""
    if not n_bar > 0:
        raise ValueError(f"n_bar must be positive, got {n_bar!r}")
    return min(load_ratio(scenario, n_bar, mode), 1.0)


@dataclass(frozen=True)
class ActivitySolution:
    zeta: float
    n_bar: float
    iterations: int
    residual: float
    mode: Mode
    converged: bool = True
    note: str = ""


ACTIVITY_MODELS = ("closed_form", "linear")


def solve_activity(scenario: Scenario, mode=None, r_m=None, tolerance: float = 1e-6,
                   max_iter: int = 200, model: str = "closed_form") -> ActivitySolution:
    """Fixed point zeta = F(zeta) of the coverage/load coupling by bisection.

    F maps zeta to the MU coverage, then to the mean channel demand and
    finally to the activity (the gamma-area closed form, or the clamped
    linear one with ``model="linear"``). Bisection runs on [0, 1] until
    |F(zeta) - zeta| <= tolerance.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if model not in ACTIVITY_MODELS:
        raise ValueError(f"unknown activity model {model!r}; expected one of {ACTIVITY_MODELS}")
    mode = scenario.spectrum.mode if mode is None else Mode.parse(mode)
    r_m = scenario.spectrum.r_m if r_m is None else r_m
    to_zeta = activity_closed_form if model == "closed_form" else lambda x: min(x, 1.0)

    def demand(zeta):
        return mean_channels(scenario, zeta, mode, r_m)

    def F(zeta):
        n_bar = demand(zeta)
        return to_zeta(load_ratio(scenario, n_bar, mode)), n_bar

    if scenario.traffic.lambda_M == 0:
        return ActivitySolution(0.0, demand(0.0), 0, 0.0, mode)
    if len(scenario.traffic.mcs) == 1:
        # demand does not depend on zeta
        zeta, n_bar = F(0.0)
        return ActivitySolution(zeta, n_bar, 1, 0.0, mode)

    lo, hi = 0.0, 1.0
    f_lo, nb_lo = F(lo)
    g_lo = f_lo - lo
    if abs(g_lo) <= tolerance:
        return ActivitySolution(lo, nb_lo, 1, abs(g_lo), mode)
    f_hi, nb_hi = F(hi)
    g_hi = f_hi - hi
    if abs(g_hi) <= tolerance:
        return ActivitySolution(hi, nb_hi, 2, abs(g_hi), mode)
    if g_lo * g_hi > 0:
        best = (lo, nb_lo, abs(g_lo)) if abs(g_lo) < abs(g_hi) else (hi, nb_hi, abs(g_hi))
        log.warning("activity map has no sign change on [0, 1]; returning boundary %g", best[0])
        return ActivitySolution(best[0], best[1], 2, best[2], mode, converged=False,
                                note="no sign change on [0, 1]")
    for it in range(3, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid, nb_mid = F(mid)
        g_mid = f_mid - mid
        if abs(g_mid) <= tolerance:
            return ActivitySolution(mid, nb_mid, it, abs(g_mid), mode)
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    raise SolverError(f"activity bisection did not reach {tolerance:g} in {max_iter} iterations", (lo, hi))
