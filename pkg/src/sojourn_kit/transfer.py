"""Iterated Laplace transform phi(x) of the sojourn time in a union of
intervals, via 2x2 transfer matrices.

phi solves (D - lambda - mu_i) phi = -1 on [u_i, v_i] and (D - lambda) phi = -1
on the gaps, with phi and phi' continuous and phi bounded. On the interval i,
phi = 1/(lambda+mu_i) + alpha_i a_i + beta_i b_i, and on gap i,
phi = 1/lambda + gamma_i c + delta_i d.

The transfer matrices P_i, Q_i and their products R_i, S_i give the
coefficient gamma_0 and delta_n in closed form. The full coefficient list is
computed by the stable sweep in ``_sweep``, which is the same recursion run
with orthogonalization (see ``solve_phi_coefficients``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bases import DiffusionBasis
from .core import (ZERO, CoefficientSet, DegenerateSystem, IntervalUnion, LaplaceParams,
                   LogCoef, ScaledMat2, det2, log_sum, scaled_ratio)
from ._sweep import Break, Piece, PiecewiseSolution, solve_piecewise


# ---------------------------------------------------------------------------
# local matrices
# ---------------------------------------------------------------------------

def _logs(basis: DiffusionBasis, rate: float, x: float):
    """(log inc, log dec) and the matrix [[1, 1], [inc'/inc, dec'/dec]]."""
    li, di, ld, dd = basis.log_eval(rate, x)
    return (li, ld), ((1.0, 1.0), (di, dd))


def _inv_l(lmat):
    (_, _), (p, q) = lmat
    den = q - p
    return ((q / den, -1.0 / den), (-p / den, 1.0 / den))


def _mul(a, b):
    return tuple(tuple(a[r][0] * b[0][c] + a[r][1] * b[1][c] for c in range(2)) for r in range(2))


def local_matrices(basis: DiffusionBasis, lam: float, mu_i: float, x: float):
    """M_i(x) at rate lambda+mu_i and N(x) at rate lambda; first row holds
    the values of (inc, dec), second row their derivatives."""
    out = []
    for rate in (lam + mu_i, lam):
        (li, ld), ((_, _), (di, dd)) = _logs(basis, rate, x)
        out.append(ScaledMat2.from_terms([[(1.0, li)], [(1.0, ld)], [(di, li)], [(dd, ld)]]))
    return out[0], out[1]


def _pair(basis, lam, mu, x0, x1):
    """P = N(x1)^-1 M(x1) M(x0)^-1 N(x0) and Q = N(x1)^-1 M(x1) M(x0)^-1 - N(x1)^-1.

    Entries are assembled from log-separated factors, so no intermediate
    matrix ever holds both exp(+big) and exp(-big).
    """
    if mu == 0.0:
        return ScaledMat2.identity(), ScaledMat2.zero()
    lm0, lmat_m0 = _logs(basis, lam + mu, x0)
    lm1, lmat_m1 = _logs(basis, lam + mu, x1)
    ln0, lmat_n0 = _logs(basis, lam, x0)
    ln1, lmat_n1 = _logs(basis, lam, x1)
    k1 = _mul(_inv_l(lmat_n1), lmat_m1)
    k0 = _mul(_inv_l(lmat_m0), lmat_n0)
    m0inv = _inv_l(lmat_m0)
    n1inv = _inv_l(lmat_n1)
    growth = (lm1[0] - lm0[0], lm1[1] - lm0[1])
    p_terms, q_terms = [], []
    for j in range(2):
        for k in range(2):
            p_terms.append([(k1[j][m] * k0[m][k], -ln1[j] + growth[m] + ln0[k]) for m in range(2)])
            q_terms.append([(k1[j][m] * m0inv[m][k], -ln1[j] + growth[m]) for m in range(2)]
                           + [(-n1inv[j][k], -ln1[j])])
    return ScaledMat2.from_terms(p_terms), ScaledMat2.from_terms(q_terms)


@dataclass(frozen=True)
class TransferAssembly:
    """P_i, Q_i, R_i, S_i and their reversed counterparts.

    Lists are indexed like the math: ``P[i]`` for i = 1..n (``P[0]`` is
    unused and set to the identity), ``R[0] = I`` and ``S[0] = 0``.
    ``Pt``/``Qt`` are built with u and v interchanged, ``Rt[i] = Pt[1]...Pt[i]``
    and ``St[i] = sum_k nu_k Pt[1]...Pt[k-1] Qt[k]``.
    """

    basis: DiffusionBasis
    E: IntervalUnion
    params: LaplaceParams
    P: tuple
    Q: tuple
    R: tuple
    S: tuple
    Pt: tuple
    Qt: tuple
    Rt: tuple
    St: tuple

    @property
    def n(self) -> int:
        return self.E.n


def assemble(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams) -> TransferAssembly:
    params.check_length(E.n)
    lam, nu = params.lam, params.nu
    eye, zero = ScaledMat2.identity(), ScaledMat2.zero()
    P, Q, Pt, Qt = [eye], [zero], [eye], [zero]
    R, S, Rt, St = [eye], [zero], [eye], [zero]
    for i, ((u, v), mu) in enumerate(zip(E.pairs, params.mu), start=1):
        p, q = _pair(basis, lam, mu, u, v)
        pt, qt = _pair(basis, lam, mu, v, u)
        P.append(p)
        Q.append(q)
        Pt.append(pt)
        Qt.append(qt)
        R.append(p @ R[-1])
        S.append(q.scale(nu[i - 1]) + p @ S[-1])
        St.append(St[-1] + (Rt[-1] @ qt).scale(nu[i - 1]))
        Rt.append(Rt[-1] @ pt)
    return TransferAssembly(basis, E, params, tuple(P), tuple(Q), tuple(R), tuple(S),
                            tuple(Pt), tuple(Qt), tuple(Rt), tuple(St))


# ---------------------------------------------------------------------------
# closed-form coefficients
# ---------------------------------------------------------------------------

def gamma0_formula(asm: TransferAssembly) -> float:
    """gamma_0 = -(1 0) S_n C_0 / (1 0) R_n C_0."""
    n = asm.n
    return -scaled_ratio(asm.S[n].entry(0, 0), asm.R[n].entry(0, 0))


def delta_n_literal(asm: TransferAssembly) -> float:
    """delta_n = (0 1)(gamma_0 R_n + S_n) C_0, evaluated as printed.

    Subtracts two quantities of size ~R_n; kept only as a diagnostic.
    """
    n = asm.n
    g = gamma0_formula(asm)
    r21, s21 = asm.R[n].entry(1, 0), asm.S[n].entry(1, 0)
    m, lg = log_sum([(g * r21[0], r21[1]), s21])
    return m * math.exp(lg) if m else 0.0


def delta_n_direct(asm: TransferAssembly) -> float:
    """delta_n from the forward products, in cancellation-free form.

    Since det P_i = 1, det[R_n C_0, S_n C_0] = sum_k nu_k det[R_k C_0, Q_k C_0],
    and delta_n = det[R_n C_0, S_n C_0] / (1 0) R_n C_0 (algebraically the same
    as ``delta_n_literal``).
    """
    nu = asm.params.nu
    terms = [det2(asm.R[k].col(0), asm.Q[k].col(0)) for k in range(1, asm.n + 1)]
    num = log_sum([(nu[k - 1] * m, lg) for k, (m, lg) in enumerate(terms, start=1)])
    return scaled_ratio(num, asm.R[asm.n].entry(0, 0))


def delta_n_reversed(asm: TransferAssembly) -> float:
    """delta_n = -(0 1) St_n C_0 / (0 1) Rt_n D_0 from the reversed recursion."""
    n = asm.n
    return -scaled_ratio(asm.St[n].entry(1, 0), asm.Rt[n].entry(1, 1))


# ---------------------------------------------------------------------------
# full solve
# ---------------------------------------------------------------------------

def sojourn_problem(E: IntervalUnion, params: LaplaceParams):
    """Breaks and pieces of the phi problem (intervals own their endpoints)."""
    lam = params.lam
    pieces = [Piece(lam, 1.0 / lam, ("gap", 0))]
    breaks = []
    for i, ((u, v), mu) in enumerate(zip(E.pairs, params.mu), start=1):
        breaks.append(Break(u, owner="right"))
        pieces.append(Piece(lam + mu, 1.0 / (lam + mu), ("interval", i)))
        breaks.append(Break(v, owner="left"))
        pieces.append(Piece(lam, 1.0 / lam, ("gap", i)))
    return breaks, pieces


def _coefficient_set(sol: PiecewiseSolution, n: int, gamma0: float, delta_n: float,
                     split=None, diagnostics=None) -> CoefficientSet:
    per_interval, per_gap = [], []
    for piece, c in zip(sol.pieces, sol.coefs):
        kind, idx = piece.label[:2]
        part = piece.label[2] if len(piece.label) > 2 else 1
        if part != 1:
            continue
        (per_interval if kind == "interval" else per_gap).append(c)
    return CoefficientSet(gamma0, delta_n, tuple(per_interval), tuple(per_gap), split,
                          diagnostics or {})


def _literal_coefficients(asm: TransferAssembly, gamma0: float):
    """A_i, B_i straight from B_i = (gamma_0 R_i + S_i) C_0 and
    A_i = M_i(v_i)^-1 N(v_i) B_i + nu_i M_i(v_i)^-1 C_0."""
    basis, lam = asm.basis, asm.params.lam
    gaps, ints = [], []
    for i in range(asm.n + 1):
        r, s = asm.R[i].col(0), asm.S[i].col(0)
        entries = []
        for k in range(2):
            m, lg = log_sum([(gamma0 * r.v[k], r.log_scale), (s.v[k], s.log_scale)])
            entries.append(LogCoef(m, lg))
        gaps.append(entries)
    gaps[asm.n][0] = ZERO  # gamma_n vanishes; the computed value is round-off
    gaps[0][1] = ZERO
    for i, ((u, v), mu) in enumerate(zip(asm.E.pairs, asm.params.mu), start=1):
        lm, lmat_m = _logs(basis, lam + mu, v)
        ln, lmat_n = _logs(basis, lam, v)
        minv = _inv_l(lmat_m)
        k = _mul(minv, lmat_n)
        b = gaps[i]
        nu = asm.params.nu[i - 1]
        coefs = []
        for j in range(2):
            terms = [(k[j][c] * b[c].mantissa, b[c].log_scale + ln[c] - lm[j]) for c in range(2)]
            terms.append((nu * minv[j][0], -lm[j]))
            coefs.append(LogCoef(*log_sum(terms)))
        ints.append(coefs)
    out = []
    for i in range(asm.n + 1):
        out.append(tuple(gaps[i]))
        if i < asm.n:
            out.append(tuple(ints[i]))
    return out


class PhiSolution:
    """phi for one (lambda, mu) with its coefficients; evaluation is pure."""

    def __init__(self, assembly: TransferAssembly, solution: PiecewiseSolution,
                 coefficients: CoefficientSet):
        self.assembly = assembly
        self.solution = solution
        self.coefficients = coefficients

    @property
    def basis(self):
        return self.assembly.basis

    def value(self, x: float, side: str | None = None) -> float:
        return self.solution.value(float(x), side)

    def derivative(self, x: float, side: str | None = None) -> float:
        return self.solution.derivative(float(x), side)

    def second_derivative(self, x: float, side: str | None = None) -> float:
        return self.solution.second_derivative(float(x), side)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return self.value(float(x))
        return np.array([self.value(float(t)) for t in x.ravel()]).reshape(x.shape)

    def ode_residual(self, x: float, side: str | None = None) -> float:
        """1/2 sigma^2 phi'' + tau phi' - (lambda + mu(x)) phi + 1."""
        b = self.basis
        rate = self.solution.rate_at(x, side)
        return (0.5 * b.sigma(x) ** 2 * self.second_derivative(x, side)
                + b.drift(x) * self.derivative(x, side) - rate * self.value(x, side) + 1.0)


def closed_form_route(route, *args) -> float:
    """Evaluate a closed-form coefficient route, NaN when it is unavailable.

    A ScaledMat2 shares one scale across its entries, so an entry smaller than
    the largest by more than ~1e308 is flushed to zero. This happens when
    sqrt(lambda) * max|u_i| exceeds roughly 350, and the ratio formulas then
    have nothing to divide by.
    """
    try:
        return route(*args)
    except DegenerateSystem:
        return math.nan


def _reported(asm, diag, gamma0):
    """gamma_0 and delta_n as reported: closed forms when available, else
    the sweep's values (flagged in ``diag``)."""
    delta = diag["delta_n_direct"]
    if math.isfinite(gamma0) and math.isfinite(delta):
        diag["closed_form"] = "available"
        return gamma0, delta
    diag["closed_form"] = "underflow in the transfer products; sweep values reported"
    return diag["gamma0_sweep"], diag["delta_n_sweep"]


def solve_phi_coefficients(asm: TransferAssembly, method: str = "sweep") -> PhiSolution:
    """Solve for every coefficient of phi.

    ``method="sweep"`` (default) uses the orthogonalized sweep, stable for any
    spread of the intervals. ``method="literal"`` evaluates the closed-form
    coefficient formulas term by term; it is exact in exact arithmetic but
    loses accuracy once exp(sqrt(lambda) * span) approaches 1/eps.

    gamma_0 and delta_n are reported from the transfer-matrix formulas
    whenever those are representable (see ``closed_form_route``);
    ``diagnostics`` holds delta_n by every route plus the sweep's own values.
    """
    n = asm.n
    diag = {
        "delta_n_direct": closed_form_route(delta_n_direct, asm),
        "delta_n_reversed": closed_form_route(delta_n_reversed, asm),
        "delta_n_literal": closed_form_route(delta_n_literal, asm),
        "log_scale_R_n": asm.R[n].log_scale,
        "method": method,
    }
    breaks, pieces = sojourn_problem(asm.E, asm.params)
    if method == "sweep":
        sol = solve_piecewise(asm.basis, breaks, pieces)
    elif method == "literal":
        sol = PiecewiseSolution(asm.basis, breaks, pieces,
                                _literal_coefficients(asm, gamma0_formula(asm)))
    else:
        raise ValueError(f"unknown method {method!r}")
    diag["gamma0_sweep"] = sol.coefs[0][0].value()
    diag["delta_n_sweep"] = sol.coefs[-1][1].value()
    g0, d_direct = _reported(asm, diag, closed_form_route(gamma0_formula, asm))
    coefs = _coefficient_set(sol, n, g0, d_direct, diagnostics=diag)
    return PhiSolution(asm, sol, coefs)


def solve_phi(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams,
              method: str = "sweep") -> PhiSolution:
    return solve_phi_coefficients(assemble(basis, E, params), method)


def phi(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams, x):
    """phi_{lambda,mu}(x) for scalar or array x."""
    return solve_phi(basis, E, params)(x)


def integral_equation_residual(basis: DiffusionBasis, E: IntervalUnion, params: LaplaceParams,
                               x: float) -> float:
    """phi(x) - [1/lambda - sum_i mu_i int_{u_i}^{v_i} rho(x, z) phi(z) dz]."""
    from scipy.integrate import quad

    from .bases import potential

    sol = solve_phi(basis, E, params)
    lam = params.lam
    acc = 1.0 / lam
    for (u, v), mu in zip(E.pairs, params.mu):
        if mu == 0.0:
            continue
        pts = [x] if u < x < v else None
        val = quad(lambda z: potential(basis, lam, x, z) * sol.value(z), u, v,
                   points=pts, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        acc -= mu * val
    return sol.value(x) - acc
