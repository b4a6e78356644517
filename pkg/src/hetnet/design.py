"""Critical FAP density between co-channel and orthogonal sharing, and effective densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coverage import coverage_mu
from .load import access_probability, solve_activity
from .scenario import Mode, Scenario
from .special import h2, ppp_integral


@dataclass(frozen=True)
class CriticalPointResult:
    """Critical lambda_F * c above which orthogonal MU coverage wins.

    ``lambda_f_c_star`` is ``None`` when no crossover lies in the searched
    range; ``note`` then says which mode dominates.
    """

    lambda_f_c_star: float | None
    method: str
    valid: bool
    bracket: tuple[float, float] | None = None
    iterations: int = 0
    note: str = ""

    @property
    def found(self) -> bool:
        return self.lambda_f_c_star is not None


def critical_density_case1(scenario: Scenario) -> CriticalPointResult:
    """Closed-form crossover for r_m = 0, one channel per service and linear activity.

    (lambda_M/mu) (N_F/(N-N_F)) (P_B/(chi P_F))^delta H2(beta_M) / (pi delta csc(pi delta)).
    ``valid`` records whether lambda_M/(lambda_B mu) <= N - N_F, i.e. the
    orthogonal macro activity is not clamped at one.
    """
    net, tr, sp = scenario.network, scenario.traffic, scenario.spectrum
    remainder = tr.N - sp.n_f
    if remainder <= 0:
        raise ValueError("N_F = N leaves no macro-only channel; the closed form divides by zero")
    d = net.delta
    value = (
        tr.lambda_M / tr.mu * sp.n_f / remainder
        * (net.P_B / (net.chi * net.P_F)) ** d
        * float(h2(sp.beta_M, d)) / ppp_integral(d)
    )
    valid = tr.lambda_M / (net.lambda_B * tr.mu) <= remainder
    return CriticalPointResult(value, "closed_form", valid,
                               note="assumes r_m = 0 and one channel per service")


def coverage_gap(scenario: Scenario, lambda_f_c: float, r_m=None, model: str = "linear",
                 zeta_orthogonal: float | None = None) -> float:
    """M_C - M_O at beta_M with each mode's activity at its own fixed point."""
    sc = scenario.replace(lambda_F=lambda_f_c / scenario.network.c)
    r_m = scenario.spectrum.r_m if r_m is None else r_m
    if zeta_orthogonal is None:
        zeta_orthogonal = solve_activity(sc, Mode.ORTHOGONAL, model=model).zeta
    zeta_c = solve_activity(sc, Mode.COCHANNEL, r_m, model=model).zeta
    m_c = coverage_mu(sc, zeta_c, mode=Mode.COCHANNEL, r_m=r_m)
    m_o = coverage_mu(sc, zeta_orthogonal, mode=Mode.ORTHOGONAL)
    return m_c - m_o


def critical_density_numerical(scenario: Scenario, lo: float = 1e-6, hi: float = 1e-1,
                               r_m=None, model: str = "linear", scan_points: int = 16,
                               rel_tol: float = 1e-3, max_iter: int = 100) -> CriticalPointResult:
    """Root in lambda_F c of the co-channel minus orthogonal MU coverage.

    A log-spaced scan locates the first sign change, then bisection in
    log space narrows it to ``rel_tol``. ``model`` picks the activity
    model handed to :func:`solve_activity`.
    """
    if not 0 < lo < hi:
        raise ValueError(f"search range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    if scenario.network.c <= 0:
        raise ValueError("cluster mean c must be positive to vary lambda_F c")
    sc = scenario.replace(r_m=scenario.spectrum.r_m if r_m is None else r_m)
    r_m = sc.spectrum.r_m
    z_o = solve_activity(sc, Mode.ORTHOGONAL, model=model).zeta
    valid = sc.traffic.lambda_M / (sc.network.lambda_B * sc.traffic.mu) <= sc.traffic.N - sc.spectrum.n_f

    def gap(x):
        return coverage_gap(sc, x, r_m, model, z_o)

    grid = np.geomspace(lo, hi, scan_points)
    gaps = [gap(x) for x in grid]
    if gaps[0] <= 0:
        return CriticalPointResult(None, "numerical", valid, (lo, hi), scan_points,
                                   "no crossover in range: orthogonal mode better throughout")
    idx = next((i for i, g in enumerate(gaps) if g <= 0), None)
    if idx is None:
        return CriticalPointResult(None, "numerical", valid, (lo, hi), scan_points,
                                   "no crossover in range: co-channel mode better throughout")
    a, b = grid[idx - 1], grid[idx]
    it = 0
    while b / a - 1.0 > rel_tol and it < max_iter:
        mid = math.sqrt(a * b)
        if gap(mid) > 0:
            a = mid
        else:
            b = mid
        it += 1
    return CriticalPointResult(math.sqrt(a * b), "numerical", valid, (float(a), float(b)),
                               scan_points + it)


@dataclass(frozen=True)
class EffectiveDensity:
    """One cell of the effective-density table.

    ``channels`` is the channel class the observer sits on, ``hole`` the
    radius of the FAP-free disc around the observer and ``c_tilde`` the mean
    co-channel FAPs per active cluster (0 for MBS rows).
    """

    observer: str
    interferer: str
    channels: str
    density: float
    c_tilde: float = 0.0
    hole: float = 0.0


def effective_densities(scenario: Scenario, zeta: float, mode=None) -> list[EffectiveDensity]:
    """Densities of co-channel MBSs and FAP clusters seen by each user type."""
    net, tr, sp = scenario.network, scenario.traffic, scenario.spectrum
    mode = sp.mode if mode is None else Mode.parse(mode)
    p = access_probability(sp.r_m, tr)
    mbs = zeta * net.lambda_B
    rows: list[EffectiveDensity] = []
    if mode is Mode.COCHANNEL:
        c_t = net.c / (p * tr.N)
        rows += [
            EffectiveDensity("mu", "mbs", "all", mbs),
            EffectiveDensity("mu", "fap", "all", p * net.lambda_F, c_t, sp.r_m),
            EffectiveDensity("fu", "mbs", "all", mbs),
            EffectiveDensity("fu", "fap", "all", p * net.lambda_F, c_t),
        ]
    elif mode is Mode.ORTHOGONAL:
        c_t = net.c / sp.n_f
        rows += [
            EffectiveDensity("mu", "mbs", "macro", mbs),
            EffectiveDensity("mu", "fap", "macro", 0.0),
            EffectiveDensity("fu", "mbs", "femto", 0.0),
            EffectiveDensity("fu", "fap", "femto", net.lambda_F, c_t),
        ]
    else:
        c_t = net.c / (p * sp.n_f)
        rows += [
            EffectiveDensity("mu", "mbs", "shared", mbs),
            EffectiveDensity("mu", "fap", "shared", p * net.lambda_F, c_t, sp.r_m),
            EffectiveDensity("mu", "mbs", "macro", mbs),
            EffectiveDensity("mu", "fap", "macro", 0.0),
            EffectiveDensity("fu", "mbs", "shared", mbs),
            EffectiveDensity("fu", "fap", "shared", p * net.lambda_F, c_t),
        ]
    return rows
