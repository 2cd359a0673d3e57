"""Fundamental solutions of D u = r u for the supported diffusions.

A basis hands out, for a rate r > 0 and a point x, the increasing solution
(written ``inc``, also called c or a_i) and the decreasing solution (``dec``,
d or b_i). Everything is reported in log form: ``log f(x)`` and the
log-derivative ``f'(x)/f(x)``. Exponentially large and small solutions then
never have to be materialized.
"""

from __future__ import annotations

import math
import threading
from typing import Callable

import numpy as np

from .core import ConfigError, InvalidRate, NonFinite


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not rate > 0 or not math.isfinite(rate):
        raise InvalidRate(f"rate must be a positive finite number, got {rate}")
    return rate


class DiffusionBasis:
    """Interface for the generator D = 1/2 sigma(x)^2 d^2/dx^2 + tau(x) d/dx."""

    kind = "abstract"
    thread_safe = True
    unit_brownian = False

    def sigma(self, x: float) -> float:
        raise NotImplementedError

    def drift(self, x: float) -> float:
        raise NotImplementedError

    def kappa(self, x: float) -> float:
        return 2.0 / self.sigma(x) ** 2

    def log_eval(self, rate: float, x: float) -> tuple[float, float, float, float]:
        """``(log inc, inc'/inc, log dec, dec'/dec)`` at x."""
        raise NotImplementedError

    def second_log(self, rate: float, x: float) -> tuple[float, float]:
        """``(inc''/inc, dec''/dec)``, from the ODE itself:
        f'' = 2 (r f - tau f') / sigma^2."""
        _, di, _, dd = self.log_eval(rate, x)
        s2 = self.sigma(x) ** 2
        tau = self.drift(x)
        return 2.0 * (rate - tau * di) / s2, 2.0 * (rate - tau * dd) / s2

    def eval(self, rate: float, x: float) -> tuple[float, float, float, float]:
        """``(inc, inc', dec, dec')`` as plain floats (may overflow)."""
        li, di, ld, dd = self.log_eval(rate, x)
        a, b = math.exp(li), math.exp(ld)
        return a, di * a, b, dd * b

    def log_wronskian_weight(self, rate: float, x: float) -> float:
        """log of w(x) = [inc'(x) dec(x) - inc(x) dec'(x)] / kappa(x)."""
        li, di, ld, dd = self.log_eval(rate, x)
        return li + ld + math.log(di - dd) - math.log(self.kappa(x))

    def wronskian_weight(self, rate: float, x: float) -> float:
        return math.exp(self.log_wronskian_weight(rate, x))

    def tail_rates(self, rate: float) -> tuple[float, float] | None:
        """Exponential decay rates (left, right) of the rate-r solutions far
        from the origin, when known in closed form."""
        return None


class BrownianPaper(DiffusionBasis):
    """Brownian motion with sigma = sqrt(2), so D = d^2/dx^2 and kappa = 1.

    Basis exp(+-sqrt(r) x), Wronskian weight 2 sqrt(r).
    """

    kind = "brownian"
    unit_brownian = True

    def sigma(self, x):
        return math.sqrt(2.0)

    def drift(self, x):
        return 0.0

    def kappa(self, x):
        return 1.0

    def log_eval(self, rate, x):
        s = math.sqrt(_check_rate(rate))
        return s * x, s, -s * x, -s

    def second_log(self, rate, x):
        rate = _check_rate(rate)
        return rate, rate

    def log_wronskian_weight(self, rate, x):
        return math.log(2.0 * math.sqrt(_check_rate(rate)))

    def tail_rates(self, rate):
        s = math.sqrt(_check_rate(rate))
        return s, s

    def __repr__(self):
        return "BrownianPaper()"


class BrownianGeneral(DiffusionBasis):
    """Brownian motion with constant volatility ``sigma`` and drift ``drift``.

    Basis exp(r1 x), exp(r2 x) with r1 > 0 > r2 the roots of
    1/2 sigma^2 s^2 + b s = r.
    """

    kind = "brownian_general"

    def __init__(self, sigma: float = 1.0, drift: float = 0.0):
        sigma = float(sigma)
        if not sigma > 0 or not math.isfinite(sigma):
            raise ConfigError(f"sigma must be positive, got {sigma}")
        if not math.isfinite(float(drift)):
            raise ConfigError(f"drift must be finite, got {drift}")
        self._sigma = sigma
        self._drift = float(drift)
        self.unit_brownian = self._drift == 0.0 and sigma == math.sqrt(2.0)

    def sigma(self, x):
        return self._sigma

    def drift(self, x):
        return self._drift

    def roots(self, rate: float) -> tuple[float, float]:
        rate = _check_rate(rate)
        s2, b = self._sigma ** 2, self._drift
        disc = math.sqrt(b * b + 2.0 * s2 * rate)
        # cancellation-free pair: r1 * r2 = -2 r / s2
        if b >= 0:
            r2 = (-b - disc) / s2
            r1 = -2.0 * rate / (s2 * r2)
        else:
            r1 = (-b + disc) / s2
            r2 = -2.0 * rate / (s2 * r1)
        return r1, r2

    def log_eval(self, rate, x):
        r1, r2 = self.roots(rate)
        return r1 * x, r1, r2 * x, r2

    def second_log(self, rate, x):
        r1, r2 = self.roots(rate)
        return r1 * r1, r2 * r2

    def tail_rates(self, rate):
        r1, r2 = self.roots(rate)
        return r1, -r2

    def __repr__(self):
        return f"BrownianGeneral(sigma={self._sigma!r}, drift={self._drift!r})"


class CustomBasis(DiffusionBasis):
    """User supplied fundamental solutions.

    Parameters:
        evaluator: ``evaluator(rate, x) -> (inc, inc', dec, dec')`` with
            analytic first derivatives.
        sigma, drift: callables of x.
        thread_safe: if False, calls into ``evaluator`` are serialized.
        check_rates, check_grid: spot-check positivity and monotonicity of the
            solutions at construction; pass ``check_grid=()`` to skip.
    """

    kind = "custom"

    def __init__(self, evaluator: Callable, sigma: Callable, drift: Callable,
                 thread_safe: bool = False,
                 check_rates=(0.5, 1.0, 4.0), check_grid=tuple(np.linspace(-3.0, 3.0, 13))):
        self._evaluator = evaluator
        self._sigma = sigma
        self._drift = drift
        self.thread_safe = bool(thread_safe)
        self._lock = None if thread_safe else threading.Lock()
        for r in check_rates:
            for x in check_grid:
                a, da, b, db = self._raw(r, x)
                if not (a > 0 and b > 0 and da >= 0 and db <= 0):
                    raise ConfigError(
                        f"custom basis is not positive/monotone at rate={r}, x={x}: "
                        f"inc=({a}, {da}), dec=({b}, {db})")

    def _raw(self, rate, x):
        rate = _check_rate(rate)
        if self._lock is None:
            out = self._evaluator(rate, x)
        else:
            with self._lock:
                out = self._evaluator(rate, x)
        out = tuple(float(v) for v in out)
        if not all(math.isfinite(v) for v in out):
            raise NonFinite(f"custom basis returned non-finite values at rate={rate}, x={x}")
        return out

    def sigma(self, x):
        return float(self._sigma(x))

    def drift(self, x):
        return float(self._drift(x))

    def log_eval(self, rate, x):
        a, da, b, db = self._raw(rate, x)
        return math.log(a), da / a, math.log(b), db / b

    def eval(self, rate, x):
        return self._raw(rate, x)


def brownian_basis() -> BrownianPaper:
    return BrownianPaper()


def make_basis(kind: str = "brownian", sigma: float | None = None,
               drift: float | None = None) -> DiffusionBasis:
    if kind == "brownian":
        return BrownianPaper()
    if kind == "brownian_general":
        return BrownianGeneral(1.0 if sigma is None else sigma, 0.0 if drift is None else drift)
    raise ConfigError(f"unknown diffusion kind {kind!r}")


# ---------------------------------------------------------------------------
# potential and hitting times
# ---------------------------------------------------------------------------

def log_potential(basis: DiffusionBasis, lam: float, x: float, y: float) -> float:
    lo, hi = (x, y) if x <= y else (y, x)
    li = basis.log_eval(lam, lo)[0]
    ld = basis.log_eval(lam, hi)[2]
    return li + ld - basis.log_wronskian_weight(lam, y)


def potential(basis: DiffusionBasis, lam: float, x: float, y: float) -> float:
    """lambda-potential rho(x, y) = inc(min) dec(max) / w(y)."""
    return math.exp(log_potential(basis, lam, x, y))


def potential_dx(basis: DiffusionBasis, lam: float, x: float, y: float, side: str = "right") -> float:
    """Partial derivative of the potential in x; at x == y ``side`` picks the
    one-sided limit."""
    _, di, _, dd = basis.log_eval(lam, x)
    left_of_y = x < y or (x == y and side == "left")
    return (di if left_of_y else dd) * potential(basis, lam, x, y)


def hitting_time_transform(basis: DiffusionBasis, lam: float, x: float, u: float) -> float:
    """E_x exp(-lambda tau_u): inc(x)/inc(u) if x <= u else dec(x)/dec(u)."""
    lx, ux = basis.log_eval(lam, x), basis.log_eval(lam, u)
    if x <= u:
        return math.exp(lx[0] - ux[0])
    return math.exp(lx[2] - ux[2])


def wronskian_drift_factor(basis: DiffusionBasis, x0: float, x1: float) -> float:
    """exp(-int_{x0}^{x1} 2 tau / sigma^2), the factor by which the plain
    Wronskian changes between x0 and x1 (Abel's identity)."""
    from scipy.integrate import quad

    val, _ = quad(lambda s: 2.0 * basis.drift(s) / basis.sigma(s) ** 2, x0, x1)
    return math.exp(-val)
