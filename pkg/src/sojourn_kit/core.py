"""Shared domain types: interval unions, Laplace parameters, log-scaled 2x2
matrices and coefficient containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class SojournError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SojournError, ValueError):
    """Invalid user input (intervals, parameters, configuration)."""


class NotSorted(ConfigError):
    pass


class Overlapping(ConfigError):
    pass


class Degenerate(ConfigError):
    pass


class Empty(ConfigError):
    pass


class InvalidRate(ConfigError):
    pass


class Unsupported(SojournError):
    """Requested combination is outside what the engine supports."""


class UnsupportedScheme(Unsupported):
    pass


class BandTooNarrow(ConfigError):
    pass


class NumericalError(SojournError, ArithmeticError):
    pass


class NonFinite(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class DegenerateSystem(NumericalError):
    pass


# ---------------------------------------------------------------------------
# sets and parameters
# ---------------------------------------------------------------------------

def _finite(x, what: str) -> float:
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} is not a number: {x!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{what} must be finite, got {x}")
    return x


@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint union of closed intervals u_1 < v_1 < u_2 < ... < v_n.

    Build through :func:`make_interval_union`, which validates the input.
    """

    pairs: tuple[tuple[float, float], ...]

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def u(self) -> tuple[float, ...]:
        return tuple(p[0] for p in self.pairs)

    @property
    def v(self) -> tuple[float, ...]:
        return tuple(p[1] for p in self.pairs)

    def contains(self, x: float) -> bool:
        return any(u <= x <= v for u, v in self.pairs)

    def indicator(self, x: np.ndarray) -> np.ndarray:
        """Index of the interval containing each x (1-based), 0 outside."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=np.int64)
        for i, (u, v) in enumerate(self.pairs, start=1):
            out[(x >= u) & (x <= v)] = i
        return out

    def reflected(self) -> "IntervalUnion":
        return IntervalUnion(tuple((-v, -u) for u, v in reversed(self.pairs)))


def make_interval_union(pairs: Iterable[Sequence[float]]) -> IntervalUnion:
    """Validate ``pairs`` and return an :class:`IntervalUnion`.

    Touching intervals are rejected rather than merged, since merging would
    silently change the number of rates the caller has to supply.
    """
    pairs = [tuple(p) for p in pairs]
    if not pairs:
        raise Empty("interval union needs at least one interval")
    clean = []
    for i, p in enumerate(pairs, start=1):
        if len(p) != 2:
            raise ConfigError(f"interval {i} must be a pair, got {p!r}")
        u = _finite(p[0], f"u_{i}")
        v = _finite(p[1], f"v_{i}")
        if u == v:
            raise Degenerate(f"interval {i} is a single point ({u}); use the local-time module")
        if u > v:
            raise NotSorted(f"interval {i} has u > v ({u} > {v})")
        clean.append((u, v))
    for i in range(len(clean) - 1):
        (u0, v0), (u1, _) = clean[i], clean[i + 1]
        if u1 < u0:
            raise NotSorted(f"interval {i + 2} starts before interval {i + 1}")
        if v0 >= u1:
            raise Overlapping(f"intervals {i + 1} and {i + 2} overlap or touch ({v0} >= {u1})")
    return IntervalUnion(tuple(clean))


@dataclass(frozen=True)
class PointSet:
    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(_finite(p, f"point {i + 1}") for i, p in enumerate(self.points))
        if not pts:
            raise Empty("point set needs at least one point")
        for i in range(len(pts) - 1):
            if not pts[i] < pts[i + 1]:
                raise NotSorted(f"points must be strictly increasing (point {i + 2})")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class LaplaceParams:
    """lambda > 0 and one nonnegative killing weight mu_i per interval/point."""

    lam: float
    mu: tuple[float, ...]

    def __post_init__(self):
        lam = _finite(self.lam, "lambda")
        if lam <= 0:
            raise InvalidRate(f"lambda must be > 0, got {lam}")
        mu = tuple(_finite(m, f"mu_{i + 1}") for i, m in enumerate(np.atleast_1d(self.mu)))
        for i, m in enumerate(mu):
            if m < 0:
                raise ConfigError(f"mu_{i + 1} must be >= 0, got {m}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def nu(self) -> tuple[float, ...]:
        lam = self.lam
        return tuple(m / (lam * (lam + m)) for m in self.mu)

    def check_length(self, n: int) -> None:
        if len(self.mu) != n:
            raise ConfigError(f"mu has {len(self.mu)} entries but the set has {n}")


# ---------------------------------------------------------------------------
# log-scaled 2x2 matrices
# ---------------------------------------------------------------------------

def _normalize(m: tuple, log_scale: float) -> tuple[tuple, float]:
    big = max(abs(m[0]), abs(m[1]), abs(m[2]), abs(m[3]))
    if big == 0.0:
        return (0.0, 0.0, 0.0, 0.0), 0.0
    if not math.isfinite(big) or not math.isfinite(log_scale):
        raise NonFinite("non-finite entry in scaled matrix")
    if 0.5 <= big < 2.0:
        return m, log_scale
    _, e = math.frexp(big)
    # exact power-of-two rescale: max |entry| ends in [1/2, 1)
    return tuple(math.ldexp(a, -e) for a in m), log_scale + e * LN2


@dataclass(frozen=True)
class ScaledMat2:
    """2x2 matrix ``exp(log_scale) * m`` with ``m`` row-major.

    Entries of ``m`` are kept with max modulus in [1/2, 2), so products of
    exponentially large and small factors stay representable.
    """

    m: tuple[float, float, float, float]
    log_scale: float = 0.0

    @classmethod
    def make(cls, a, b, c, d, log_scale: float = 0.0) -> "ScaledMat2":
        m, s = _normalize((float(a), float(b), float(c), float(d)), float(log_scale))
        return cls(m, s)

    @classmethod
    def identity(cls) -> "ScaledMat2":
        return cls.make(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def zero(cls) -> "ScaledMat2":
        return cls((0.0, 0.0, 0.0, 0.0), 0.0)

    @classmethod
    def from_terms(cls, entries) -> "ScaledMat2":
        """Build from four entries, each a list of ``(coef, log)`` terms
        standing for ``sum(coef * exp(log))``."""
        logs = [lg for terms in entries for c, lg in terms if c != 0.0]
        if not logs:
            return cls.zero()
        top = max(logs)
        vals = [math.fsum(c * math.exp(lg - top) for c, lg in terms if c != 0.0)
                for terms in entries]
        return cls.make(*vals, log_scale=top)

    @classmethod
    def from_array(cls, a) -> "ScaledMat2":
        a = np.asarray(a, dtype=float)
        return cls.make(a[0, 0], a[0, 1], a[1, 0], a[1, 1])

    # -- arithmetic ---------------------------------------------------------
    def __matmul__(self, other: "ScaledMat2") -> "ScaledMat2":
        a, b, c, d = self.m
        e, f, g, h = other.m
        return ScaledMat2.make(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h,
                               self.log_scale + other.log_scale)

    def __add__(self, other: "ScaledMat2") -> "ScaledMat2":
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        top = max(self.log_scale, other.log_scale)
        fa = math.exp(self.log_scale - top)
        fb = math.exp(other.log_scale - top)
        return ScaledMat2.make(*(x * fa + y * fb for x, y in zip(self.m, other.m)), log_scale=top)

    def __neg__(self) -> "ScaledMat2":
        return ScaledMat2(tuple(-x for x in self.m), self.log_scale)

    def __sub__(self, other: "ScaledMat2") -> "ScaledMat2":
        return self + (-other)

    def scale(self, k: float) -> "ScaledMat2":
        if k == 0.0 or self.is_zero():
            return ScaledMat2.zero()
        return ScaledMat2.make(*(x * k for x in self.m), log_scale=self.log_scale)

    def det(self) -> tuple[float, float]:
        """Determinant as ``(mantissa, log)``."""
        a, b, c, d = self.m
        return a * d - b * c, 2.0 * self.log_scale

    def inv(self) -> "ScaledMat2":
        a, b, c, d = self.m
        det = a * d - b * c
        if abs(det) < 1e-300:
            raise SingularMatrix(f"matrix is numerically singular (normalized det {det:.3g})")
        return ScaledMat2.make(d / det, -b / det, -c / det, a / det, -self.log_scale)

    def is_zero(self) -> bool:
        return self.m == (0.0, 0.0, 0.0, 0.0)

    # -- access -------------------------------------------------------------
    def entry(self, i: int, j: int) -> tuple[float, float]:
        """Entry (i, j) as ``(mantissa, log)``."""
        return self.m[2 * i + j], self.log_scale

    def entry_value(self, i: int, j: int) -> float:
        return LogCoef(self.m[2 * i + j], self.log_scale).value()

    def col(self, j: int) -> "ScaledVec2":
        return ScaledVec2((self.m[j], self.m[2 + j]), self.log_scale)

    def apply(self, vec: "ScaledVec2") -> "ScaledVec2":
        a, b, c, d = self.m
        x, y = vec.v
        return ScaledVec2((a * x + b * y, c * x + d * y), self.log_scale + vec.log_scale)

    def value(self) -> np.ndarray:
        """Plain ndarray value (may overflow for very large scales)."""
        with np.errstate(over="ignore"):
            return np.array(self.m, dtype=float).reshape(2, 2) * np.exp(self.log_scale)


@dataclass(frozen=True)
class ScaledVec2:
    v: tuple[float, float]
    log_scale: float = 0.0

    def value(self) -> np.ndarray:
        return np.array(self.v) * math.exp(self.log_scale)


def mat2_mul(a: ScaledMat2, b: ScaledMat2) -> ScaledMat2:
    return a @ b


def mat2_inv(a: ScaledMat2) -> ScaledMat2:
    return a.inv()


def scaled_ratio(num: tuple[float, float], den: tuple[float, float]) -> float:
    """``num / den`` for ``(mantissa, log)`` pairs, subtracting logs first."""
    if den[0] == 0.0:
        raise DegenerateSystem("zero denominator in coefficient ratio")
    if num[0] == 0.0:
        return 0.0
    return num[0] / den[0] * math.exp(num[1] - den[1])


def det2(a: ScaledVec2, b: ScaledVec2) -> tuple[float, float]:
    """det[a, b] = a0*b1 - a1*b0 as ``(mantissa, log)``."""
    return a.v[0] * b.v[1] - a.v[1] * b.v[0], a.log_scale + b.log_scale


def log_sum(terms: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """Sum of ``(mantissa, log)`` terms, returned in the same form."""
    terms = [(m, lg) for m, lg in terms if m != 0.0]
    if not terms:
        return 0.0, 0.0
    top = max(lg for _, lg in terms)
    return math.fsum(m * math.exp(lg - top) for m, lg in terms), top


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogCoef:
    """Real number ``mantissa * exp(log_scale)``."""

    mantissa: float
    log_scale: float = 0.0

    def value(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        try:
            return self.mantissa * math.exp(self.log_scale)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    def times_exp(self, log_factor: float) -> float:
        """``value * exp(log_factor)`` without forming either factor."""
        if self.mantissa == 0.0:
            return 0.0
        return self.mantissa * math.exp(self.log_scale + log_factor)


ZERO = LogCoef(0.0, 0.0)


@dataclass(frozen=True)
class CoefficientSet:
    """Solved coefficients for one (lambda, mu) query.

    ``per_interval[i-1]`` is A_i = (alpha_i, beta_i), the coefficients of the
    increasing and decreasing solutions at rate lambda + mu_i on [u_i, v_i].
    ``per_gap[i]`` is B_i = (gamma_i, delta_i) on (v_i, u_{i+1}), i = 0..n.
    For the joint transform the piece holding y is split; its two halves are
    ``split`` (entries of ``per_interval``/``per_gap`` at that index are the
    left half).
    """

    gamma0: float
    delta_n: float
    per_interval: tuple[tuple[LogCoef, LogCoef], ...]
    per_gap: tuple[tuple[LogCoef, LogCoef], ...]
    split: tuple[tuple[LogCoef, LogCoef], tuple[LogCoef, LogCoef]] | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def A(self, i: int) -> np.ndarray:
        return np.array([c.value() for c in self.per_interval[i - 1]])

    def B(self, i: int) -> np.ndarray:
        return np.array([c.value() for c in self.per_gap[i]])
