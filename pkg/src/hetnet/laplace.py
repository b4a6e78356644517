"""Laplace transforms of the interference seen by femto and macro users.

Every transform is a function of the Laplace variable ``s`` (1/W). Where a
tier splits its FAPs over fewer channels (orthogonal and partial modes) the
``n_channels`` argument replaces N in the co-channel FAP count; it defaults
to the traffic record's N.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .scenario import NetworkParams, TrafficParams, per_channel_mu_density
from .special import DEFAULT_QUADRATURE, QuadratureError, QuadratureSpec, h1, h2, ppp_integral, quad


def approx_cluster_mean(net: NetworkParams, traffic: TrafficParams, r_m: float,
                        n_channels: int | None = None) -> float:
    """(c/N) exp(pi lambda_m r_m^2 / mu): mean co-channel FAPs in a cognitive cluster."""
    n = traffic.N if n_channels is None else n_channels
    return net.c / n * math.exp(math.pi * per_channel_mu_density(traffic) * r_m * r_m)


def _ppp_exponent(density, power, s, delta):
    # pi^2 delta csc(pi delta) * density * (s P)^delta
    return math.pi * ppp_integral(delta) * density * np.power(s * power, delta)


def lt_macro_to_fu(s, zeta: float, net: NetworkParams):
    """LT of the macro-tier interference at an FU (all MBSs, thinned by zeta)."""
    return np.exp(-_ppp_exponent(net.lambda_B * zeta, net.chi * net.P_B, s, net.delta))


def lt_intra_cluster(s, r_m: float, net: NetworkParams, traffic: TrafficParams,
                     n_channels: int | None = None):
    """Approximate LT of the co-channel interference from the FU's own cluster."""
    w = np.asarray(s, dtype=float) * net.chi * net.P_F
    c_eff = approx_cluster_mean(net, traffic, r_m, n_channels)
    if c_eff == 0:
        return np.ones_like(w)[()]
    exponent = c_eff / net.R ** 2 * np.power(w, net.delta) * h1(w, net.R, net.delta)
    return np.exp(-exponent)


def lt_inter_cluster(s, net: NetworkParams, traffic: TrafficParams,
                     n_channels: int | None = None):
    """Approximate LT of the interference from all other clusters at an FU.

    Independent of r_m: thinning of the parents and the larger per-channel
    share cancel, leaving a PPP of density lambda_F c / N.
    """
    n = traffic.N if n_channels is None else n_channels
    return np.exp(-_ppp_exponent(net.lambda_F * net.c / n, net.chi * net.P_F, s, net.delta))


def lt_mbs_to_mu(s, r, zeta: float, net: NetworkParams):
    """LT of the interference from co-channel MBSs beyond the serving distance r."""
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    sp = s * net.P_B
    v = sp / r ** (2.0 / net.delta)
    return np.exp(-math.pi * net.lambda_B * zeta * np.power(sp, net.delta) * h2(v, net.delta))


# --- clustered FAPs outside an exclusion disc ----------------------------

def lens_area(d, a: float, b: float):
    """Area of the intersection of two discs of radii a, b at centre distance d."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    small = min(a, b)
    inside = d <= abs(a - b)
    out[inside] = math.pi * small * small
    part = (~inside) & (d < a + b)
    if np.any(part):
        dd = d[part]
        ca = np.clip((dd * dd + a * a - b * b) / (2 * dd * a), -1.0, 1.0)
        cb = np.clip((dd * dd + b * b - a * a) / (2 * dd * b), -1.0, 1.0)
        kite = (-dd + a + b) * (dd + a - b) * (dd - a + b) * (dd + a + b)
        out[part] = a * a * np.arccos(ca) + b * b * np.arccos(cb) - 0.5 * np.sqrt(np.maximum(kite, 0.0))
    return out[()] if out.ndim == 0 else out


def fap_hole_integral(w, r_m: float, R: float, delta: float,
                      spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Double integral of the FAP interference kernel over a holed plane.

    Computes J(w) = int_{|y|>r_m} int_{|x|<=R} f(x) / (1 + |x-y|^alpha / w) dx dy
    with f uniform on the cluster disc. Substituting z = y - x turns it into
    int k(|z|) (1 - |B(0,R) & B(-z,r_m)| / (pi R^2)) dz, so only a radial
    integral weighted by the lens area of two discs is left. The part where
    the lens is a full disc reduces to H1.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    alpha = 2.0 / delta
    total = ppp_integral(delta) * math.pi * np.power(w, delta)
    if r_m <= 0:
        return total if total.size > 1 else total[0]
    inner = abs(R - r_m)
    small = min(R, r_m)
    # the flat part of the lens, t <= |R - r_m|
    hole = math.pi * small * small / R ** 2 * np.power(w, delta) * (
        h1(w, inner, delta, spec) if inner > 0 else 0.0
    )

    def integrand(t):
        kern = 1.0 / (1.0 + t ** alpha / w)
        return 2.0 / R ** 2 * t * kern * lens_area(t, R, r_m) / total

    with np.errstate(over="ignore"):
        value, err = integrate.quad_vec(
            integrand, inner, R + r_m, epsabs=1e-13, epsrel=1e-11, norm="max", limit=2000,
        )
    if not np.all(np.isfinite(value)) or err > 1e-8:
        raise QuadratureError(f"lens integral did not converge (error estimate {err:g})")
    result = total - hole - value * total
    result = np.maximum(result, 0.0)
    return result if result.size > 1 else result[0]


def lt_fap_to_mu(s, r_m: float, net: NetworkParams, traffic: TrafficParams,
                 n_channels: int | None = None, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Approximate LT of co-channel FAP interference at an MU with an r_m hole.

    Cluster thinning p_{r_m} and the enlarged per-channel share c/(N p_{r_m})
    cancel, so the density prefactor is lambda_F c / N for any r_m.
    """
    n = traffic.N if n_channels is None else n_channels
    w = np.asarray(s, dtype=float) * net.chi * net.P_F
    J = fap_hole_integral(w, r_m, net.R, net.delta, spec)
    out = np.exp(-net.lambda_F * net.c / n * np.asarray(J))
    return out[()] if np.ndim(out) == 0 else out


# --- FU location sensitivity ----------------------------------------------

def _arc_fraction(t, rho: float, R: float):
    """Angular measure of the circle |x - y| = t lying inside B(0, R), |y| = rho."""
    t = np.asarray(t, dtype=float)
    if rho == 0:
        return np.where(t <= R, 2 * math.pi, 0.0)
    cos = np.clip((t * t + rho * rho - R * R) / (2 * t * rho), -1.0, 1.0)
    out = 2 * np.arccos(cos)
    out = np.where(t <= R - rho, 2 * math.pi, out)
    return np.where(t >= R + rho, 0.0, out)


def intra_cluster_moments(y, epsilon: float, net: NetworkParams, traffic: TrafficParams,
                          r_m: float = 0.0, n_channels: int | None = None,
                          spec: QuadratureSpec = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Mean and mean-square intra-cluster interference at offset ``y`` from the centre.

    Interferers closer than ``epsilon`` are excluded; without the guard both
    moments diverge for alpha >= 2. Powers are P_F without the wall factor.
    The second moment is E[I^2] = 2 c~/(pi R^2) int P_F^2 d^-2alpha + mean^2
    (unit-mean exponential fading, Poisson count).

    ``y`` is either a radius or a 2-D point.
    """
    if not epsilon > 0:
        raise ValueError("moments diverge under singular path loss for alpha >= 2; epsilon must be > 0")
    rho = float(np.hypot(*y)) if np.ndim(y) else float(y)
    if rho > net.R:
        raise ValueError(f"offset |y|={rho} lies outside the cluster radius {net.R}")
    c_eff = approx_cluster_mean(net, traffic, r_m, n_channels)
    if c_eff == 0:
        return 0.0, 0.0
    scale = c_eff / (math.pi * net.R ** 2)
    alpha = net.alpha
    upper = net.R + rho
    if epsilon >= upper:
        return 0.0, 0.0
    breaks = [b for b in (net.R - rho,) if epsilon < b < upper]

    def radial(power):
        f = lambda t: t * _arc_fraction(t, rho, net.R) * t ** (-power)  # noqa: E731
        return quad(f, epsilon, upper, spec, "moment", points=breaks or None)

    first = scale * net.P_F * radial(alpha)
    second = 2.0 * scale * net.P_F ** 2 * radial(2 * alpha) + first ** 2
    return first, second


def moment_flatness(epsilon: float, net: NetworkParams, traffic: TrafficParams,
                    r_m: float = 0.0, points: int = 11) -> float:
    """max/min of the first intra-cluster moment over |y| in [0, R/2]."""
    radii = np.linspace(0.0, net.R / 2, points)
    firsts = [intra_cluster_moments(r, epsilon, net, traffic, r_m)[0] for r in radii]
    return max(firsts) / min(firsts)
