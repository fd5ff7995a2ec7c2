"""Closed-form radial solutions on concentric annuli.

For the ring B_R minus B_r in R^N the p-capacitary potential depends on the
radius only, which gives exact boundary gradients and Bernoulli constants
for balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidExponent, OutOfRange

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RadialCase:
    p: float
    N: int
    r: float
    R: float

    def __post_init__(self):
        if self.p <= 1:
            raise InvalidExponent(f"p must exceed 1 (got {self.p})")
        if self.N < 2:
            raise ValueError("dimension N must be at least 2")
        if not 0 < self.r < self.R:
            raise ValueError(f"need 0 < r < R (got r={self.r}, R={self.R})")

    @property
    def beta(self):
        return (self.p - self.N) / (self.p - 1.0)

    @property
    def logarithmic(self):
        return self.p == self.N


def annulus_potential(case, s):
    """u(s) with u(r) = 1, u(R) = 0."""
    r, R = case.r, case.R
    if not r * (1 - 1e-14) <= s <= R * (1 + 1e-14):
        raise OutOfRange(f"radius {s} outside [{r}, {R}]")
    if case.logarithmic:
        return math.log(R / s) / math.log(R / r)
    b = case.beta
    return (s**b - R**b) / (r**b - R**b)


def annulus_boundary_gradient(case):
    """|u'(r)| on the inner sphere."""
    r, R = case.r, case.R
    if case.logarithmic:
        return 1.0 / (r * math.log(R / r))
    b = case.beta
    return abs(b) * r ** (b - 1.0) / abs(r**b - R**b)


def _gradient_map(p, N, R):
    return lambda r: annulus_boundary_gradient(RadialCase(p, N, r, R))


def golden_section_min(f, a, b, xtol):
    """Minimiser of a unimodal f on [a, b]."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def ball_minimizer_ratio(p, N):
    """r*/R minimising the inner-boundary gradient over concentric annuli."""
    return golden_section_min(_gradient_map(p, N, 1.0), 1e-9, 1.0 - 1e-9, 1e-11)


def bernoulli_constant_ball(p, N, R):
    """Bernoulli constant of the ball B_R, equal to C_N / R."""
    if p <= 1:
        raise InvalidExponent(f"p must exceed 1 (got {p})")
    if R <= 0:
        raise ValueError("R must be positive")
    rho = ball_minimizer_ratio(p, N)
    return _gradient_map(p, N, 1.0)(rho) / R


def c_N(p, N):
    """Ratio R / r* at the tangency (minimising) radius."""
    return 1.0 / ball_minimizer_ratio(p, N)


def bisect(f, a, b, xtol):
    fa = f(a)
    if fa * f(b) > 0:
        raise ValueError("root not bracketed")
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def bernoulli_radii(p, N, R, tau, xtol=1e-12):
    """Inner radii r with |u'(r)| = tau, sorted; the last one is the maximal solution.

    Returns () below the Bernoulli constant, (r*,) at tangency and
    (r_small, r_large) above it.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    rho = ball_minimizer_ratio(p, N)
    lam = bernoulli_constant_ball(p, N, R)
    if tau < lam * (1 - 1e-10):
        return ()
    if tau <= lam * (1 + 1e-10):
        return (rho * R,)
    G = _gradient_map(p, N, R)
    f = lambda r: G(r) - tau
    roots = []
    lo = 1e-6 * R
    if f(lo) > 0:
        roots.append(bisect(f, lo, rho * R, xtol * R))
    roots.append(bisect(f, rho * R, R * (1 - 1e-6), xtol * R))
    return tuple(roots)
