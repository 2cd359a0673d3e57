"""Monte Carlo estimates of E_x exp(-<mu, T_t>) and E_x exp(-<mu, L_t>).

Paths are simulated on a fixed time grid. Occupation is integrated with the
trapezoid rule on the indicator of the grid positions, which leaves an O(dt)
bias (excursions between grid points are missed). Paths are split into
fixed-size blocks; block b draws from a Philox stream keyed by (seed, b), and
block results are combined in block order. The estimate is therefore the same
for any number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bases import BrownianGeneral, BrownianPaper, DiffusionBasis
from .core import BandTooNarrow, ConfigError, IntervalUnion, PointSet, UnsupportedScheme

BLOCK_PATHS = 8192
CHUNK_STEPS = 256

SCHEMES = ("exact", "euler")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``scheme`` is "exact" (Gaussian increments, constant coefficients only)
    or "euler" (Euler-Maruyama). The step is adjusted to t / round(t / dt).
    """

    paths: int
    dt: float
    t: float
    seed: int = 0
    scheme: str = "exact"
    antithetic: bool = False

    def __post_init__(self):
        if not isinstance(self.paths, (int, np.integer)) or self.paths < 1:
            raise ConfigError(f"paths must be a positive integer, got {self.paths!r}")
        if not self.t > 0 or not math.isfinite(self.t):
            raise ConfigError(f"t must be positive, got {self.t}")
        if not 0 < self.dt <= self.t:
            raise ConfigError(f"dt must be in (0, t], got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.antithetic and self.paths % 2:
            raise ConfigError("antithetic sampling needs an even number of paths")

    @property
    def steps(self) -> int:
        return max(1, round(self.t / self.dt))

    @property
    def step(self) -> float:
        return self.t / self.steps


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    paths: int
    dt: float
    note: str = ""


def _generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(block) << 64)))


def _constant_coefficients(basis: DiffusionBasis):
    if isinstance(basis, (BrownianPaper, BrownianGeneral)):
        return basis.sigma(0.0), basis.drift(0.0)
    return None


def _rate_table(edges: np.ndarray, rates: np.ndarray):
    """Piecewise constant killing rate: ``rates[i]`` on [edges[2i], edges[2i+1]]."""
    table = np.zeros(len(edges) + 1)
    table[1::2] = rates

    def rate(xs):
        return table[np.searchsorted(edges, xs, side="right")]

    return rate


def _simulate_block(basis, cfg: SimConfig, x0: float, rate, block: int, n: int):
    """Return (count, mean, M2) of exp(-int rate(X_s) ds) over n paths."""
    rng = _generator(cfg.seed, block)
    h = cfg.step
    steps = cfg.steps
    const = _constant_coefficients(basis)
    if cfg.scheme == "exact" and const is None:
        raise UnsupportedScheme("exact Gaussian increments need constant coefficients")
    draw_n = n // 2 if cfg.antithetic else n
    x = np.full(n, float(x0))
    w_prev = rate(x)
    expo = np.zeros(n)
    done = 0
    while done < steps:
        k = min(CHUNK_STEPS, steps - done)
        z = rng.standard_normal((draw_n, k))
        if cfg.antithetic:
            z = np.concatenate([z, -z])
        if cfg.scheme == "exact":
            sigma, drift = const
            path = x[:, None] + np.cumsum(drift * h + sigma * math.sqrt(h) * z, axis=1)
            w = rate(path)
            expo += h * (0.5 * w_prev + w[:, :-1].sum(axis=1) + 0.5 * w[:, -1])
            x = path[:, -1]
            w_prev = w[:, -1]
        else:
            sig = np.vectorize(basis.sigma, otypes=[float])
            drf = np.vectorize(basis.drift, otypes=[float])
            for j in range(k):
                x = x + drf(x) * h + sig(x) * math.sqrt(h) * z[:, j]
                w = rate(x)
                expo += 0.5 * h * (w_prev + w)
                w_prev = w
        done += k
    vals = np.exp(-expo)
    if cfg.antithetic:
        vals = 0.5 * (vals[: n // 2] + vals[n // 2:])
    mean = float(vals.mean())
    return len(vals), mean, float(((vals - mean) ** 2).sum())


def _run(basis, cfg: SimConfig, x0: float, rate, threads: int, note: str) -> SimEstimate:
    sizes = [min(BLOCK_PATHS, cfg.paths - s) for s in range(0, cfg.paths, BLOCK_PATHS)]
    jobs = list(enumerate(sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _simulate_block(basis, cfg, x0, rate, *j), jobs))
    else:
        parts = [_simulate_block(basis, cfg, x0, rate, *j) for j in jobs]
    # Chan et al. pairwise update, always in block order
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = count + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * count * nb / tot
        count = tot
    se = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    return SimEstimate(mean, se, cfg.paths, cfg.step, note)


def estimate_sojourn_transform(basis: DiffusionBasis, E: IntervalUnion, mu, x: float,
                               cfg: SimConfig, threads: int = 1) -> SimEstimate:
    """Estimate E_x exp(-<mu, T_t>), T_t the vector of times spent in each interval."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (E.n,):
        raise ConfigError(f"mu has {mu.size} entries but E has {E.n} intervals")
    if np.any(mu < 0):
        raise ConfigError("mu must be nonnegative")
    if cfg.scheme == "exact" and _constant_coefficients(basis) is None:
        raise UnsupportedScheme("exact Gaussian increments need constant coefficients")
    edges = np.array([e for pair in E.pairs for e in pair])
    note = f"trapezoid occupation, dt={cfg.step:.6g}, bias O(dt)"
    return _run(basis, cfg, x, _rate_table(edges, mu), threads, note)


def estimate_local_time_transform(points: PointSet, mu, x: float, cfg: SimConfig, band: float,
                                  threads: int = 1) -> SimEstimate:
    """Estimate E_x exp(-<mu, L_t>) for Brownian motion with sigma = sqrt(2).

    L_t at u is approximated by (2/band) times the time spent in
    [u - band/2, u + band/2], i.e. the occupation of a half-width-h band over
    h with h = band/2, which is the normalization of the transform engine.
    Bias is O(band) + O(dt/band^2).
    """
    if not band > 0:
        raise ConfigError(f"band must be positive, got {band}")
    if cfg.step > band * band / 10.0:
        raise BandTooNarrow(f"dt={cfg.step:.3g} exceeds band^2/10={band * band / 10:.3g}")
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (points.n,):
        raise ConfigError(f"mu has {mu.size} entries but there are {points.n} points")
    pts = np.asarray(points.points)
    if points.n > 1 and np.min(np.diff(pts)) <= band:
        raise ConfigError("bands around neighbouring points overlap; use a smaller band")
    edges = np.column_stack([pts - band / 2, pts + band / 2]).ravel()
    note = f"band {band:.6g}, dt={cfg.step:.6g}, bias O(band) + O(dt/band^2)"
    return _run(BrownianPaper(), cfg, x, _rate_table(edges, mu * 2.0 / band), threads, note)
