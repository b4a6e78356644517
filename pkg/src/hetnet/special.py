"""Scalar special functions used by the interference closed forms.

``h1`` and ``h2`` are the two truncated integrals of ``1 / (1 + t**(1/delta))``
that appear in the Laplace transforms. Both have arctan forms at
``delta = 1/2`` (path-loss exponent 4) which are used by default there.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class QuadratureError(ArithmeticError):
    """An adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be at least 16")


DEFAULT_QUADRATURE = QuadratureSpec()


def quad(func, a, b, spec: QuadratureSpec = DEFAULT_QUADRATURE, what: str = "integral", **kwargs):
    """``scipy.integrate.quad`` that raises :class:`QuadratureError` instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(
                func, a, b,
                epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions,
                **kwargs,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"{what} on [{a}, {b}] did not converge: {exc}") from None
    return value


def csc_pi(delta: float) -> float:
    """csc(pi * delta) for delta in (0, 1)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    return 1.0 / math.sin(math.pi * delta)


def ppp_integral(delta: float) -> float:
    """Integral of 1/(1 + t**(1/delta)) over (0, inf) = pi*delta*csc(pi*delta)."""
    return math.pi * delta * csc_pi(delta)


def _kernel(t, delta):
    return 1.0 / (1.0 + t ** (1.0 / delta))


def h1_quad(w: float, R: float, delta: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Integral of 1/(1+t^(1/delta)) over [0, R^2 / w^delta] by adaptive quadrature."""
    if w <= 0:
        raise ValueError(f"w must be positive, got {w!r}")
    upper = R * R / w ** delta
    if upper <= 0:
        return 0.0
    if upper <= 1.0:
        return quad(_kernel, 0.0, upper, spec, "h1", args=(delta,))
    # the tail beyond t=1 is the h2 integral from 1 to upper
    return quad(_kernel, 0.0, 1.0, spec, "h1", args=(delta,)) + (
        _tail(1.0, spec, delta) - _tail(upper, spec, delta)
    )


def _tail(lower: float, spec: QuadratureSpec, delta: float) -> float:
    """Integral of 1/(1+t^(1/delta)) over [lower, inf).

    With t = 1/y the range becomes (0, 1/lower] and the integrand
    y^(1/delta - 2) / (1 + y^(1/delta)); the algebraic endpoint factor is
    handed to QUADPACK's weighted rule so no truncation is needed.
    """
    if math.isinf(lower):
        return 0.0
    if lower < 1.0:
        head = quad(_kernel, lower, 1.0, spec, "h2", args=(delta,))
        return head + _tail(1.0, spec, delta)
    a = 1.0 / delta
    upper = 1.0 / lower
    return quad(
        lambda y: 1.0 / (1.0 + y ** a), 0.0, upper, spec, "h2",
        weight="alg", wvar=(a - 2.0, 0.0),
    )


def h2_quad(v: float, delta: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Integral of 1/(1+t^(1/delta)) over [v^-delta, inf) by adaptive quadrature."""
    if v < 0:
        raise ValueError(f"v must be non-negative, got {v!r}")
    if v == 0:
        return 0.0
    csc_pi(delta)
    return _tail(v ** -delta, spec, delta)


def h1(w, R, delta, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """H1(w, R, delta): the intra-cluster interference integral.

    The upper limit is ``R**2 / w**delta``. Vectorised over ``w`` and ``R``.
    Uses ``arctan(R**2 / sqrt(w))`` when ``delta == 0.5``.
    """
    w = np.asarray(w, dtype=float)
    R = np.asarray(R, dtype=float)
    if delta == 0.5:
        out = np.arctan(R * R / np.sqrt(w))
    else:
        csc_pi(delta)
        out = np.vectorize(lambda ww, rr: h1_quad(ww, rr, delta, spec), otypes=[float])(w, R)
    return out[()] if out.ndim == 0 else out


def h2(v, delta, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """H2(v, delta): the out-of-ball macro interference integral.

    The lower limit is ``v**-delta``; ``arctan(sqrt(v))`` at ``delta == 0.5``.
    """
    v = np.asarray(v, dtype=float)
    if delta == 0.5:
        out = np.arctan(np.sqrt(v))
    else:
        csc_pi(delta)
        out = np.vectorize(lambda vv: h2_quad(vv, delta, spec), otypes=[float])(v)
    return out[()] if out.ndim == 0 else out


def incomplete_gammas(a: float, x: float) -> tuple[float, float]:
    """Unregularised lower and upper incomplete gamma functions (gamma(a,x), Gamma(a,x))."""
    if a <= 0:
        raise ValueError(f"a must be positive, got {a!r}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    g = special.gamma(a)
    if math.isinf(x):
        return g, 0.0
    return float(special.gammainc(a, x) * g), float(special.gammaincc(a, x) * g)
