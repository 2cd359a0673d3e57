"""Gaver-Stehfest inversion of Laplace transforms in lambda.

Only real abscissae k ln2 / t are used, which is what the real-rate bases
provide. Weights are computed in exact rational arithmetic and rounded once.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

from .bases import DiffusionBasis
from .core import ConfigError, IntervalUnion, LaplaceParams, NonFinite, PointSet

LN2 = math.log(2.0)


@dataclass(frozen=True)
class InversionConfig:
    t: float = 1.0
    order: int = 14
    method: str = "gaver_stehfest"

    def __post_init__(self):
        if self.method != "gaver_stehfest":
            raise ConfigError(f"unknown inversion method {self.method!r}")
        if not isinstance(self.order, int) or isinstance(self.order, bool):
            raise ConfigError(f"inversion order must be an integer, got {self.order!r}")
        if self.order % 2 or not 4 <= self.order <= 18:
            raise ConfigError(f"inversion order must be even and within 4..18, got {self.order}")
        if not self.t > 0 or not math.isfinite(self.t):
            raise ConfigError(f"t must be positive, got {self.t}")

    def abscissae(self) -> list[float]:
        a = LN2 / self.t
        return [k * a for k in range(1, self.order + 1)]


@lru_cache(maxsize=None)
def stehfest_weights(order: int) -> tuple[float, ...]:
    """V_1..V_N for even N, exact rationals rounded to float."""
    half = order // 2
    out = []
    for k in range(1, order + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** half * math.factorial(2 * j),
                            math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                            * math.factorial(k - j) * math.factorial(2 * j - k))
        out.append(float((-1) ** (k + half) * acc))
    return tuple(out)


def _evaluate(transform: Callable[[float], float], lams, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(transform, lams))
    else:
        vals = [transform(lam) for lam in lams]
    for lam, v in zip(lams, vals):
        if not math.isfinite(v):
            raise NonFinite(f"transform is not finite at lambda={lam}")
    return vals


def invert_in_lambda(transform: Callable[[float], float], config: InversionConfig,
                     threads: int = 1) -> float:
    """Gaver-Stehfest estimate of f(t) from F(lambda) = int e^{-lambda t} f(t) dt."""
    lams = config.abscissae()
    vals = _evaluate(transform, lams, threads)
    w = stehfest_weights(config.order)
    return LN2 / config.t * math.fsum(wk * v for wk, v in zip(w, vals))


@dataclass(frozen=True)
class TimeEstimate:
    value: float
    raw: float
    clamped: bool
    lower: float
    upper: float


def _clamp(raw: float, lower: float, upper: float) -> TimeEstimate:
    value = min(max(raw, lower), upper)
    strayed = raw < lower - 1e-3 or raw > upper + 1e-3
    if strayed:
        warnings.warn(f"inverted value {raw:.6g} strays outside [{lower:.6g}, {upper:.6g}]",
                      RuntimeWarning, stacklevel=3)
    return TimeEstimate(value, raw, strayed, lower, upper)


def expectation_at_time(basis: DiffusionBasis, E: IntervalUnion, mu, x: float, t: float,
                        config: InversionConfig | None = None, threads: int = 1,
                        details: bool = False):
    """E_x exp(-<mu, T_t>) by inverting phi in lambda.

    The result is clamped to [exp(-max(mu) t), 1]; ``details=True`` returns
    a :class:`TimeEstimate` whose ``clamped`` flag is set when the raw value
    was more than 1e-3 outside that range.
    """
    from .transfer import solve_phi

    order = 14 if config is None else config.order
    cfg = InversionConfig(t=t, order=order)
    mu = tuple(float(m) for m in mu)
    LaplaceParams(1.0, mu).check_length(E.n)

    def transform(lam):
        return solve_phi(basis, E, LaplaceParams(lam, mu)).value(x)

    raw = invert_in_lambda(transform, cfg, threads)
    est = _clamp(raw, math.exp(-max(mu) * t), 1.0)
    return est if details else est.value


def local_time_expectation_at_time(points: PointSet, mu, x: float, t: float,
                                   config: InversionConfig | None = None, threads: int = 1,
                                   details: bool = False):
    """E_x exp(-<mu, L_t>) for Brownian local times, clamped to [0, 1]."""
    from .localtime import solve_local_time

    order = 14 if config is None else config.order
    cfg = InversionConfig(t=t, order=order)
    mu = tuple(float(m) for m in mu)

    def transform(lam):
        return solve_local_time(points, LaplaceParams(lam, mu)).value(x)

    est = _clamp(invert_in_lambda(transform, cfg, threads), 0.0, 1.0)
    return est if details else est.value


def sojourn_cdf_experimental(basis: DiffusionBasis, E: IntervalUnion, x: float, t: float,
                             s: float, config: InversionConfig | None = None,
                             outer_order: int = 12) -> float:
    """Experimental estimate of P_x(T_t <= s), T_t the total time spent in E.

    mu -> E_x exp(-mu T_t) is the Laplace transform of the law of T_t, so the
    distribution function is a second Gaver-Stehfest inversion of
    E_x exp(-mu T_t) / mu at s. The inner inversion (in lambda) uses
    ``config.order``; the outer one uses ``outer_order``, kept lower because
    the outer weights multiply the inner round-off.

    T_t has atoms at 0 (start outside E) and at t (never leaving E) and its
    distribution function is flat past t; the inversion smooths all of these,
    so values near s = 0 and s = t are unreliable. Clamped to [0, 1].
    """
    if not 0 < s:
        raise ConfigError(f"s must be positive, got {s}")
    order = 14 if config is None else config.order
    inner = InversionConfig(t=t, order=order)
    outer = InversionConfig(t=s, order=outer_order)
    n = E.n

    def in_mu(m):
        return expectation_at_time(basis, E, (m,) * n, x, t, inner) / m

    return min(max(invert_in_lambda(in_mu, outer), 0.0), 1.0)
