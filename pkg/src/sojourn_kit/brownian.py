"""Closed forms for Brownian motion (sigma = sqrt(2), D = d^2/dx^2).

Used as independent references for the generic engine. All hyperbolic
functions are written as exp(|z|) times a bounded factor, so the formulas
stay finite for long intervals and large rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigError, InvalidRate, ScaledMat2


def _ch_sh(z: float) -> tuple[float, float]:
    """cosh(z), sinh(z) divided by exp(|z|)/2."""
    e = math.exp(-2.0 * abs(z))
    return 1.0 + e, math.copysign(1.0 - e, z)


def product_identity(lam: float, mu: float, x: float, y: float) -> ScaledMat2:
    """Closed form of N(y)^-1 M(y) M(x)^-1 N(x) for the Brownian basis.

    With s = sqrt(lambda), r = sqrt(lambda + mu), z = r (y - x), C = cosh(z/2)
    and S = sinh(z/2), the product equals 1/(s r) times
    [[e^{s(x-y)} (sC + rS)(rC + sS),  mu e^{-s(x+y)} C S],
     [-mu e^{s(x+y)} C S,             e^{s(y-x)} (sC - rS)(rC - sS)]].
    """
    if not lam > 0:
        raise InvalidRate(f"lambda must be > 0, got {lam}")
    if mu < 0:
        raise ConfigError(f"mu must be >= 0, got {mu}")
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    z = r * (y - x)
    c, sh = _ch_sh(z / 2.0)  # each scaled by exp(|z|/2)/2
    g = abs(z)  # products of two scaled factors carry exp(|z|)/4
    pre = 1.0 / (4.0 * s * r)
    tl = (s * c + r * sh) * (r * c + s * sh) * pre
    br = (s * c - r * sh) * (r * c - s * sh) * pre
    cs = c * sh * pre
    return ScaledMat2.from_terms([
        [(tl, s * (x - y) + g)],
        [(mu * cs, -s * (x + y) + g)],
        [(-mu * cs, s * (x + y) + g)],
        [(br, s * (y - x) + g)],
    ])


@dataclass(frozen=True)
class SingleIntervalQuery:
    u: float
    v: float
    lam: float
    mu: float
    x: float

    def __post_init__(self):
        if not self.u < self.v:
            raise ConfigError(f"need u < v, got u={self.u}, v={self.v}")
        if not self.lam > 0:
            raise InvalidRate(f"lambda must be > 0, got {self.lam}")
        if self.mu < 0:
            raise ConfigError(f"mu must be >= 0, got {self.mu}")

    @property
    def w(self) -> float:
        return 0.5 * math.sqrt(self.lam + self.mu) * (self.v - self.u)


def _sinh_over_d(lam, mu, w):
    """sinh(w) / (sqrt(lam) cosh w + sqrt(lam+mu) sinh w)."""
    c, s = _ch_sh(w)
    return s / (math.sqrt(lam) * c + math.sqrt(lam + mu) * s)


def phi_single_interval(q: SingleIntervalQuery) -> float:
    """phi for one interval [u, v], piecewise in closed form.

    Outside: (1/lam)[1 - (mu/r) sinh(w) e^{-s dist} / D] with dist the
    distance to the interval. Inside: (1/(lam+mu))[1 + (mu/s) cosh(r (x - m)) / D],
    m the midpoint, D = s cosh w + r sinh w, s = sqrt(lam), r = sqrt(lam+mu).
    """
    lam, mu, u, v, x = q.lam, q.mu, q.u, q.v, q.x
    if mu == 0.0:
        return 1.0 / lam
    s, r, w = math.sqrt(lam), math.sqrt(lam + mu), q.w
    if u <= x <= v:
        t = r * abs(x - 0.5 * (u + v))
        c_t, _ = _ch_sh(t)
        c_w, s_w = _ch_sh(w)
        ratio = c_t * math.exp(t - w) / (s * c_w + r * s_w)
        return (1.0 + (mu / s) * ratio) / (lam + mu)
    dist = u - x if x < u else x - v
    return (1.0 - (mu / r) * _sinh_over_d(lam, mu, w) * math.exp(-s * dist)) / lam


def gamma0_single_interval(lam: float, mu: float, u: float, v: float) -> float:
    """-(mu / (lam r)) e^{-s u} sinh(w) / D."""
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    w = 0.5 * r * (v - u)
    return -(mu / (lam * r)) * math.exp(-s * u) * _sinh_over_d(lam, mu, w)


def delta1_single_interval(lam: float, mu: float, u: float, v: float) -> float:
    """-(mu / (lam r)) e^{s v} sinh(w) / D."""
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    w = 0.5 * r * (v - u)
    return -(mu / (lam * r)) * math.exp(s * v) * _sinh_over_d(lam, mu, w)


def p1_corner(lam: float, mu: float, u: float, v: float) -> float:
    """(1 0) P_1 (1 0)^T, which equals (0 1) P~_1 (0 1)^T:
    e^{s(u-v)} (s cosh w + r sinh w)(r cosh w + s sinh w) / (s r)."""
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    w = 0.5 * r * (v - u)
    c, sh = _ch_sh(w)
    return (s * c + r * sh) * (r * c + s * sh) * math.exp(s * (u - v) + 2 * w) / (4 * s * r)


def q1_corner(lam: float, mu: float, u: float, v: float, reversed_: bool = False) -> float:
    """(1 0) Q_1 (1 0)^T = e^{-s v} sinh(w)(r cosh w + s sinh w) / s.

    With ``reversed_`` returns (0 1) Q~_1 (1 0)^T, the same with e^{s u}.
    """
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    w = 0.5 * r * (v - u)
    c, sh = _ch_sh(w)
    lead = s * u if reversed_ else -s * v
    return sh * (r * c + s * sh) * math.exp(lead + 2 * w) / (4 * s)
