"""Laplace transform of the vector of Brownian local times at finitely many
points.

The transform f(x) solves f'' = lambda f - 1 away from the points, is
continuous, and has derivative jumps f'(u_i+) - f'(u_i-) = 2 mu_i f(u_i).
This is the limit of the sojourn problem on [u_i - eps, u_i + eps] with
weights mu_i / eps. Only Brownian motion with sigma = sqrt(2)
is supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bases import BrownianPaper, DiffusionBasis
from .core import (ZERO, ConfigError, DegenerateSystem, InvalidRate, LaplaceParams, LogCoef,
                   PointSet, ScaledMat2, Unsupported, log_sum, scaled_ratio)
from ._sweep import Break, Piece, PiecewiseSolution, solve_piecewise


def limit_pair(lam: float, mu_i: float, u_i: float) -> tuple[ScaledMat2, ScaledMat2]:
    """Limit matrices for one point:

    Pbar = (1/s) [[s + mu, mu e^{-2 s u}], [-mu e^{2 s u}, s - mu]],
    Qbar = (mu/s) [[e^{-s u}, 0], [-e^{s u}, 0]], s = sqrt(lambda).
    """
    if not lam > 0:
        raise InvalidRate(f"lambda must be > 0, got {lam}")
    if mu_i < 0:
        raise ConfigError(f"mu must be >= 0, got {mu_i}")
    if mu_i == 0.0:
        return ScaledMat2.identity(), ScaledMat2.zero()
    s = math.sqrt(lam)
    p = ScaledMat2.from_terms([
        [((s + mu_i) / s, 0.0)], [(mu_i / s, -2 * s * u_i)],
        [(-mu_i / s, 2 * s * u_i)], [((s - mu_i) / s, 0.0)],
    ])
    q = ScaledMat2.from_terms([
        [(mu_i / s, -s * u_i)], [], [(-mu_i / s, s * u_i)], [],
    ])
    return p, q


@dataclass(frozen=True)
class LocalTimeAssembly:
    """Pbar_i, Qbar_i, Rbar_i = Pbar_i ... Pbar_1,
    Sbar_i = (1/lambda) [Qbar_i + Pbar_i Qbar_{i-1} + ... + Pbar_i ... Pbar_2 Qbar_1],
    gamma_bar = (1 0) Sbar_n C_0 / (1 0) Rbar_n C_0 and
    Bbar_i = Sbar_i C_0 - gamma_bar Rbar_i C_0 (as log-scaled entries)."""

    points: PointSet
    params: LaplaceParams
    P: tuple
    Q: tuple
    R: tuple
    S: tuple
    gamma_bar: float
    B: tuple


def assemble_local_time(points: PointSet, params: LaplaceParams) -> LocalTimeAssembly:
    params.check_length(points.n)
    lam = params.lam
    eye, zero = ScaledMat2.identity(), ScaledMat2.zero()
    P, Q, R, S = [eye], [zero], [eye], [zero]
    for u, mu in zip(points.points, params.mu):
        p, q = limit_pair(lam, mu, u)
        P.append(p)
        Q.append(q)
        R.append(p @ R[-1])
        S.append(q.scale(1.0 / lam) + p @ S[-1])
    n = points.n
    if R[n].entry(0, 0)[0] == 0.0:
        raise DegenerateSystem("(1 0) Rbar_n C_0 vanishes")
    g = scaled_ratio(S[n].entry(0, 0), R[n].entry(0, 0))
    B = []
    for i in range(n + 1):
        s_col, r_col = S[i].col(0), R[i].col(0)
        B.append(tuple(LogCoef(*log_sum([(s_col.v[k], s_col.log_scale),
                                         (-g * r_col.v[k], r_col.log_scale)]))
                       for k in range(2)))
    return LocalTimeAssembly(points, params, tuple(P), tuple(Q), tuple(R), tuple(S), g, tuple(B))


def local_time_problem(points: PointSet, params: LaplaceParams):
    lam = params.lam
    pieces = [Piece(lam, 1.0 / lam, ("gap", 0))]
    breaks = []
    for i, (u, mu) in enumerate(zip(points.points, params.mu), start=1):
        breaks.append(Break(u, jump1=2.0 * mu, owner="left"))
        pieces.append(Piece(lam, 1.0 / lam, ("gap", i)))
    return breaks, pieces


class LocalTimeSolution:
    def __init__(self, assembly: LocalTimeAssembly, solution: PiecewiseSolution):
        self.assembly = assembly
        self.solution = solution

    def value(self, x, side=None):
        return self.solution.value(float(x), side)

    def derivative(self, x, side=None):
        return self.solution.derivative(float(x), side)

    def literal_value(self, x, side=None):
        """(1 0) N(x) Bbar_i + 1/lambda straight from the limit matrices.

        The growing part on the last gap and the decaying part on the first
        vanish for a bounded solution; their computed values are round-off
        and are dropped.
        """
        i = self.solution.locate(float(x), side)
        s = math.sqrt(self.assembly.params.lam)
        g, d = self.assembly.B[i]
        if i == self.assembly.points.n:
            g = ZERO
        if i == 0:
            d = ZERO
        return g.times_exp(s * x) + d.times_exp(-s * x) + 1.0 / self.assembly.params.lam

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return self.value(float(x))
        return np.array([self.value(float(t)) for t in x.ravel()]).reshape(x.shape)


def solve_local_time(points: PointSet, params: LaplaceParams,
                     basis: DiffusionBasis | None = None) -> LocalTimeSolution:
    basis = BrownianPaper() if basis is None else basis
    if not getattr(basis, "unit_brownian", False):
        raise Unsupported("local times are only available for Brownian motion with sigma = sqrt(2)")
    asm = assemble_local_time(points, params)
    breaks, pieces = local_time_problem(points, params)
    return LocalTimeSolution(asm, solve_piecewise(basis, breaks, pieces))


def local_time_transform(points: PointSet, params: LaplaceParams, x,
                         basis: DiffusionBasis | None = None):
    """int_0^inf e^{-lambda t} E_x exp(-<mu, L_t>) dt."""
    return solve_local_time(points, params, basis)(x)


def closed_form_one_point(lam: float, mu: float, u: float, x: float) -> float:
    """(1/lambda)[1 - mu/(s + mu) e^{-s|x-u|}]."""
    s = math.sqrt(lam)
    return (1.0 - mu / (s + mu) * math.exp(-s * abs(x - u))) / lam


def closed_form_two_points(lam: float, mu: float, nu: float, u: float, v: float, x: float) -> float:
    """Two points u < v with weights mu, nu:

    (1/lambda)[1 - (mu [s + nu(1 - e)] e^{-s|x-u|} + nu [s + mu(1 - e)] e^{-s|x-v|})
                   / ((s + mu)(s + nu) - mu nu e^2)],  e = e^{s(u-v)}.
    """
    if not u < v:
        raise ConfigError(f"need u < v, got u={u}, v={v}")
    s = math.sqrt(lam)
    e = math.exp(s * (u - v))
    num = (mu * (s + nu * (1.0 - e)) * math.exp(-s * abs(x - u))
           + nu * (s + mu * (1.0 - e)) * math.exp(-s * abs(x - v)))
    den = (s + mu) * (s + nu) - mu * nu * e * e
    return (1.0 - num / den) / lam
