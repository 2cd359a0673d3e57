"""Joint transform psi(x, y) of the sojourn time and the terminal position.

psi(., y) solves the homogeneous piecewise equations of phi, with a
derivative jump of -kappa(y) at x = y. The piece that contains y is split
in two. If y lies in [u_i0, v_i0] (endpoints included), the split pieces
are A_{i0,1} and A_{i0,2}; otherwise, with y in gap i0, they are B_{i0,1}
and B_{i0,2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bases import DiffusionBasis, potential
from .core import (IntervalUnion, LaplaceParams, ScaledMat2, ScaledVec2,
                   det2, log_sum, scaled_ratio)
from .transfer import (TransferAssembly, _coefficient_set, _inv_l, _logs, _mul, _reported, assemble,
                       closed_form_route)
from ._sweep import Break, Piece, PiecewiseSolution, solve_piecewise


@dataclass(frozen=True)
class JointCase:
    kind: str  # "inside" or "gap"
    index: int  # interval index 1..n, or gap index 0..n

    def __str__(self):
        return f"{'Inside' if self.kind == 'inside' else 'Gap'}({self.index})"


def classify_y(E: IntervalUnion, y: float) -> JointCase:
    """Inside(i) if y is in the closed interval [u_i, v_i], else Gap(i0) with
    v_i0 < y < u_{i0+1}."""
    for i, (u, v) in enumerate(E.pairs, start=1):
        if u <= y <= v:
            return JointCase("inside", i)
    return JointCase("gap", sum(1 for v in E.v if v < y))


def _vec_from_terms(terms0, terms1) -> ScaledVec2:
    logs = [lg for c, lg in terms0 + terms1 if c != 0.0]
    if not logs:
        return ScaledVec2((0.0, 0.0), 0.0)
    top = max(logs)
    return ScaledVec2(tuple(math.fsum(c * math.exp(lg - top) for c, lg in t if c != 0.0)
                            for t in (terms0, terms1)), top)


def _inv_times_d0(basis, rate, y) -> ScaledVec2:
    """F(y)^-1 D_0 for F = [[inc, dec], [inc', dec']] at ``rate``."""
    (li, ld), lmat = _logs(basis, rate, y)
    inv = _inv_l(lmat)
    return _vec_from_terms([(inv[0][1], -li)], [(inv[1][1], -ld)])


def _exit_matrix(basis, lam, mu, x) -> ScaledMat2:
    """N(x)^-1 M(x) (M at rate lambda+mu)."""
    lm, lmat_m = _logs(basis, lam + mu, x)
    ln, lmat_n = _logs(basis, lam, x)
    k = _mul(_inv_l(lmat_n), lmat_m)
    return ScaledMat2.from_terms([[(k[j][c], lm[c] - ln[j])] for j in range(2) for c in range(2)])


@dataclass(frozen=True)
class JointAssembly:
    """y-dependent part of the psi solve on top of a TransferAssembly.

    ``W[i]`` holds U_i (case Inside) or V_i (case Gap) for i = 0..n, with the
    zero matrix for i < i0. ``w_y`` is M_i0(y)^-1 D_0 or N(y)^-1 D_0.
    """

    transfer: TransferAssembly
    y: float
    case: JointCase
    W: tuple
    w_y: ScaledVec2
    kappa_y: float


def joint_assembly(asm: TransferAssembly, y: float) -> JointAssembly:
    basis, lam = asm.basis, asm.params.lam
    case = classify_y(asm.E, y)
    i0 = case.index
    W = [ScaledMat2.zero()] * (asm.n + 1)
    if case.kind == "inside":
        mu = asm.params.mu[i0 - 1]
        W[i0] = _exit_matrix(basis, lam, mu, asm.E.pairs[i0 - 1][1])
        w_y = _inv_times_d0(basis, lam + mu, y)
    else:
        W[i0] = ScaledMat2.identity()
        w_y = _inv_times_d0(basis, lam, y)
    for i in range(i0 + 1, asm.n + 1):
        W[i] = asm.P[i] @ W[i - 1]
    return JointAssembly(asm, float(y), case, tuple(W), w_y, basis.kappa(y))


def gamma0_y(ja: JointAssembly) -> float:
    """kappa(y) (1 0) W_n w_y / (1 0) R_n C_0."""
    n = ja.transfer.n
    num = ja.W[n].apply(ja.w_y)
    return ja.kappa_y * scaled_ratio((num.v[0], num.log_scale), ja.transfer.R[n].entry(0, 0))


def delta_n_y_literal(ja: JointAssembly) -> float:
    """(0 1)[gamma_0(y) R_n C_0 - kappa W_n w_y] as printed (diagnostic)."""
    n = ja.transfer.n
    g = gamma0_y(ja)
    r21 = ja.transfer.R[n].entry(1, 0)
    t = ja.W[n].apply(ja.w_y)
    m, lg = log_sum([(g * r21[0], r21[1]), (-ja.kappa_y * t.v[1], t.log_scale)])
    return m * math.exp(lg) if m else 0.0


def delta_n_y_direct(ja: JointAssembly) -> float:
    """-kappa det[R_i0 C_0, W_i0 w_y] / (1 0) R_n C_0, the forward formula with
    the unimodular factors P_n ... P_{i0+1} cancelled from the determinant."""
    asm, i0 = ja.transfer, ja.case.index
    num = det2(asm.R[i0].col(0), ja.W[i0].apply(ja.w_y))
    return -ja.kappa_y * scaled_ratio(num, asm.R[asm.n].entry(0, 0))


def delta_n_y_reversed(ja: JointAssembly) -> float:
    """-kappa (0 1) W~_0 w_y / (0 1) R~_n D_0 with W~_0 = Rt_{i0-1} M-entry
    matrix (Inside) or Rt_{i0} (Gap)."""
    asm, i0 = ja.transfer, ja.case.index
    basis, lam = asm.basis, asm.params.lam
    if ja.case.kind == "inside":
        mu = asm.params.mu[i0 - 1]
        w0 = asm.Rt[i0 - 1] @ _exit_matrix(basis, lam, mu, asm.E.pairs[i0 - 1][0])
    else:
        w0 = asm.Rt[i0]
    t = w0.apply(ja.w_y)
    return -ja.kappa_y * scaled_ratio((t.v[1], t.log_scale), asm.Rt[asm.n].entry(1, 1))


def joint_problem(E: IntervalUnion, params: LaplaceParams, y: float, kappa_y: float):
    case = classify_y(E, y)
    lam = params.lam
    jump = Break(y, jump0=-kappa_y, owner="left")
    pieces, breaks = [], []

    def gap(i):
        if case.kind == "gap" and case.index == i:
            pieces.append(Piece(lam, 0.0, ("gap", i, 1)))
            breaks.append(jump)
            pieces.append(Piece(lam, 0.0, ("gap", i, 2)))
        else:
            pieces.append(Piece(lam, 0.0, ("gap", i)))

    gap(0)
    for i, ((u, v), mu) in enumerate(zip(E.pairs, params.mu), start=1):
        breaks.append(Break(u, owner="right"))
        if case.kind == "inside" and case.index == i:
            pieces.append(Piece(lam + mu, 0.0, ("interval", i, 1)))
            breaks.append(jump)
            pieces.append(Piece(lam + mu, 0.0, ("interval", i, 2)))
        else:
            pieces.append(Piece(lam + mu, 0.0, ("interval", i)))
        breaks.append(Break(v, owner="left"))
        gap(i)
    return case, breaks, pieces


class PsiSolution:
    """psi(., y) for fixed (lambda, mu, y)."""

    def __init__(self, joint: JointAssembly, solution: PiecewiseSolution, coefficients):
        self.joint = joint
        self.solution = solution
        self.coefficients = coefficients

    @property
    def y(self) -> float:
        return self.joint.y

    @property
    def case(self) -> JointCase:
        return self.joint.case

    def value(self, x, side=None):
        return self.solution.value(float(x), side)

    def derivative(self, x, side=None):
        return self.solution.derivative(float(x), side)

    def second_derivative(self, x, side=None):
        return self.solution.second_derivative(float(x), side)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return self.value(float(x))
        return np.array([self.value(float(t)) for t in x.ravel()]).reshape(x.shape)

    def ode_residual(self, x, side=None):
        b = self.solution.basis
        rate = self.solution.rate_at(x, side)
        return (0.5 * b.sigma(x) ** 2 * self.second_derivative(x, side)
                + b.drift(x) * self.derivative(x, side) - rate * self.value(x, side))


def solve_psi_coefficients(asm: TransferAssembly, y: float) -> PsiSolution:
    n = asm.n
    ja = joint_assembly(asm, y)
    diag = {
        "case": str(ja.case),
        "delta_n_direct": closed_form_route(delta_n_y_direct, ja),
        "delta_n_reversed": closed_form_route(delta_n_y_reversed, ja),
        "delta_n_literal": closed_form_route(delta_n_y_literal, ja),
    }
    case, breaks, pieces = joint_problem(asm.E, asm.params, ja.y, ja.kappa_y)
    sol = solve_piecewise(asm.basis, breaks, pieces)
    diag["gamma0_sweep"] = sol.coefs[0][0].value()
    diag["delta_n_sweep"] = sol.coefs[-1][1].value()
    g0, d_direct = _reported(asm, diag, closed_form_route(gamma0_y, ja))
    kind = "interval" if case.kind == "inside" else "gap"
    split = (sol.piece_coefficients((kind, case.index, 1)),
             sol.piece_coefficients((kind, case.index, 2)))
    coefs = _coefficient_set(sol, n, g0, d_direct, split=split, diagnostics=diag)
    return PsiSolution(ja, sol, coefs)


def solve_psi(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams, y: float,
              assembly: TransferAssembly | None = None) -> PsiSolution:
    asm = assembly if assembly is not None else assemble(basis, E, params)
    return solve_psi_coefficients(asm, y)


def psi(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams, x, y):
    """psi_{lambda,mu}(x, y); x may be an array."""
    return solve_psi(basis, E, params, y)(x)


# ---------------------------------------------------------------------------
# integrals
# ---------------------------------------------------------------------------

_TAIL = 40.0


def _y_tail_rates(basis, lam):
    rates = basis.tail_rates(lam)
    if rates is None:
        return None
    # decay of the y-dependence: the potential is inc(y)/w(y) to the left
    # and dec(y)/w(y) to the right, which swaps the x-decay rates when drift is present
    return rates[1], rates[0]


def integrate_psi_over_y(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams,
                         x: float, epsabs: float = 1e-13, epsrel: float = 1e-11) -> float:
    """Integral of psi(x, y) over all y, by adaptive quadrature between the
    interval endpoints and x plus exponential tails past the last 40 decay
    lengths."""
    asm = assemble(basis, E, params)

    def f(y):
        return solve_psi_coefficients(asm, y).value(x)

    rates = _y_tail_rates(basis, params.lam)
    lo_edge, hi_edge = min(E.u[0], x), max(E.v[-1], x)
    if rates is None:
        pts = sorted(set(list(E.u) + list(E.v) + [x]))
        total = quad(f, -np.inf, pts[0], epsabs=epsabs, epsrel=epsrel, limit=200)[0]
        total += quad(f, pts[-1], np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    else:
        kl, kr = rates
        lo, hi = lo_edge - _TAIL / kl, hi_edge + _TAIL / kr
        pts = sorted(set([lo, hi] + list(E.u) + list(E.v) + [x]))
        total = f(lo) / kl + f(hi) / kr
    for a, b in zip(pts[:-1], pts[1:]):
        total += quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return total


def integral_equation_residual(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams,
                               x: float, y: float) -> float:
    """psi(x, y) - [rho(x, y) - sum_i mu_i int_{u_i}^{v_i} rho(x, z) psi(z, y) dz]."""
    sol = solve_psi(basis, E, params, y)
    lam = params.lam
    acc = potential(basis, lam, x, y)
    for (u, v), mu in zip(E.pairs, params.mu):
        if mu == 0.0:
            continue
        pts = [p for p in (x, y) if u < p < v]
        val = quad(lambda z: potential(basis, lam, x, z) * sol.value(z), u, v,
                   points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        acc -= mu * val
    return sol.value(x) - acc
