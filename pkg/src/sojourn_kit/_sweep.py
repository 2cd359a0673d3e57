"""Stable solve of piecewise second-order problems by an orthogonalized sweep.

The unknown f solves (D - r_k) f = -r_k p_k on each piece k of the line, so
f = p_k + alpha_k inc_k + beta_k dec_k there, with inc/dec the basis at rate
r_k. The pieces are glued at break points by value continuity and a
derivative jump ``f'(x+) - f'(x-) = jump0 + jump1 * f(x)``. f stays bounded at
both infinities.

Propagating coefficient vectors with the plain transfer matrices loses all
accuracy once the growing mode dominates. The sweep instead carries the
state as ``h * g + p`` with ``h`` a unit vector along the homogeneous
solution and ``p`` kept orthogonal to ``h``. The scalar g is recovered by
back substitution, which divides by the growth factors and is therefore
stable. States are stored in local coordinates: the coefficients are scaled
so both basis functions equal 1 at the current point.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .bases import DiffusionBasis
from .core import ZERO, DegenerateSystem, LogCoef, NonFinite

_MAX_LOG_STEP = 30.0


@dataclass(frozen=True)
class Piece:
    rate: float
    particular: float
    label: tuple


@dataclass(frozen=True)
class Break:
    x: float
    jump0: float = 0.0
    jump1: float = 0.0
    owner: str = "left"  # which piece a query exactly at x belongs to


class PiecewiseSolution:
    """Bounded solution evaluated piece by piece from log-scaled coefficients."""

    def __init__(self, basis: DiffusionBasis, breaks: list[Break], pieces: list[Piece],
                 coefs: list[tuple[LogCoef, LogCoef]]):
        self.basis = basis
        self.breaks = breaks
        self.pieces = pieces
        self.coefs = coefs
        self._xs = [b.x for b in breaks]

    def locate(self, x: float, side: str | None = None) -> int:
        """Index of the piece used for x. ``side`` = 'left'/'right' forces a
        one-sided limit at a break point."""
        lo = bisect.bisect_left(self._xs, x)
        hi = bisect.bisect_right(self._xs, x)
        if lo == hi:
            return lo
        if side == "left":
            return lo
        if side == "right":
            return hi
        for j in range(lo, hi):
            if self.breaks[j].owner == "left":
                return j
        return hi

    def _terms(self, k: int, x: float):
        piece = self.pieces[k]
        ci, cd = self.coefs[k]
        li, di, ld, dd = self.basis.log_eval(piece.rate, x)
        return piece, ci.times_exp(li), di, cd.times_exp(ld), dd

    def value(self, x: float, side: str | None = None) -> float:
        piece, ti, _, td, _ = self._terms(self.locate(x, side), x)
        return piece.particular + ti + td

    def derivative(self, x: float, side: str | None = None) -> float:
        _, ti, di, td, dd = self._terms(self.locate(x, side), x)
        return ti * di + td * dd

    def second_derivative(self, x: float, side: str | None = None) -> float:
        k = self.locate(x, side)
        piece, ti, _, td, _ = self._terms(k, x)
        si, sd = self.basis.second_log(piece.rate, x)
        return ti * si + td * sd

    def homogeneous(self, x: float, side: str | None = None) -> float:
        """Value minus the piecewise constant particular part."""
        _, ti, _, td, _ = self._terms(self.locate(x, side), x)
        return ti + td

    def rate_at(self, x: float, side: str | None = None) -> float:
        return self.pieces[self.locate(x, side)].rate

    def piece_coefficients(self, label) -> tuple[LogCoef, LogCoef]:
        for piece, c in zip(self.pieces, self.coefs):
            if piece.label == label:
                return c
        raise KeyError(label)


def _event(basis, left: Piece, right: Piece, brk: Break):
    x = brk.x
    _, li, _, ld = basis.log_eval(left.rate, x)
    _, ri, _, rd = basis.log_eval(right.rate, x)
    j1 = brk.jump1
    # rows of the left-side (value, derivative) map
    m = ((1.0, 1.0), (li + j1, ld + j1))
    off = (left.particular - right.particular, brk.jump0 + j1 * left.particular)
    den = rd - ri
    # inverse of [[1, 1], [ri, rd]]
    inv = ((rd / den, -1.0 / den), (-ri / den, 1.0 / den))
    t = tuple(tuple(inv[r][0] * m[0][c] + inv[r][1] * m[1][c] for c in range(2)) for r in range(2))
    q = tuple(inv[r][0] * off[0] + inv[r][1] * off[1] for r in range(2))
    return t, q


def solve_piecewise(basis: DiffusionBasis, breaks: list[Break], pieces: list[Piece]) -> PiecewiseSolution:
    """Solve for the bounded solution with the given pieces and break conditions."""
    if len(pieces) != len(breaks) + 1 or not breaks:
        raise ValueError("need len(pieces) == len(breaks) + 1 >= 2")

    h = (1.0, 0.0)
    p = (0.0, 0.0)
    hs, ps, steps = [h], [p], [(0.0, 0.0)]  # steps[k] = (log s_k, c_k)
    before, after = [], []  # state indices around each break

    def push(t, q):
        nonlocal h, p
        th = (t[0][0] * h[0] + t[0][1] * h[1], t[1][0] * h[0] + t[1][1] * h[1])
        s = math.hypot(*th)
        if not (s > 0 and math.isfinite(s)):
            raise NonFinite("sweep lost the homogeneous direction")
        h = (th[0] / s, th[1] / s)
        tp = (t[0][0] * p[0] + t[0][1] * p[1] + q[0], t[1][0] * p[0] + t[1][1] * p[1] + q[1])
        c = tp[0] * h[0] + tp[1] * h[1]
        p = (tp[0] - c * h[0], tp[1] - c * h[1])
        hs.append(h)
        ps.append(p)
        steps.append((math.log(s), c))

    for j, brk in enumerate(breaks):
        if j > 0:
            # propagate through piece j from breaks[j-1] to breaks[j]
            rate = pieces[j].rate
            a = basis.log_eval(rate, breaks[j - 1].x)
            b = basis.log_eval(rate, brk.x)
            gi, gd = b[0] - a[0], b[2] - a[2]
            nsub = max(1, math.ceil(max(abs(gi), abs(gd)) / _MAX_LOG_STEP))
            ei, ed = math.exp(gi / nsub), math.exp(gd / nsub)
            for _ in range(nsub):
                push(((ei, 0.0), (0.0, ed)), (0.0, 0.0))
        before.append(len(hs) - 1)
        t, q = _event(basis, pieces[j], pieces[j + 1], brk)
        push(t, q)
        after.append(len(hs) - 1)

    hk, pk = hs[-1], ps[-1]
    if hk[0] == 0.0 or abs(hk[0]) < 1e-300:
        raise DegenerateSystem("right boundary condition cannot be met (singular sweep)")
    g = [0.0] * len(hs)
    g[-1] = -pk[0] / hk[0]
    for k in range(len(hs) - 1, 0, -1):
        logs, c = steps[k]
        g[k - 1] = (g[k] - c) * math.exp(-logs)

    def state(k):
        return hs[k][0] * g[k] + ps[k][0], hs[k][1] * g[k] + ps[k][1]

    coefs = []
    last = len(pieces) - 1
    for k, piece in enumerate(pieces):
        if k < last:
            x_r = breaks[k].x
            a_r = state(before[k])[0]
            ci = LogCoef(a_r, -basis.log_eval(piece.rate, x_r)[0])
        else:
            ci = ZERO
        if k > 0:
            x_l = breaks[k - 1].x
            b_l = state(after[k - 1])[1]
            cd = LogCoef(b_l, -basis.log_eval(piece.rate, x_l)[2])
        else:
            cd = ZERO
        coefs.append((ci, cd))
    return PiecewiseSolution(basis, list(breaks), list(pieces), coefs)
