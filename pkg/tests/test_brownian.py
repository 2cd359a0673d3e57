from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import four_unknown_phi
from sojourn_kit import BrownianPaper, LaplaceParams, assemble, local_matrices, make_interval_union, solve_phi
from sojourn_kit.brownian import (SingleIntervalQuery, delta1_single_interval, gamma0_single_interval,
                                  p1_corner, phi_single_interval, product_identity, q1_corner)
from sojourn_kit.core import ConfigError

B = BrownianPaper()
LAMS = (0.5, 1.0, 2.0, 5.0)
MUS = (0.1, 1.0, 10.0)
XS = np.linspace(-2.0, 3.0, 41)


def _numpy_product(lam, mu, x, y):
    mx, nx = (m.value() for m in local_matrices(B, lam, mu, x))
    my, ny = (m.value() for m in local_matrices(B, lam, mu, y))
    return np.linalg.inv(ny) @ my @ np.linalg.inv(mx) @ nx


def test_product_identity_examples():
    assert np.allclose(product_identity(1.0, 0.0, -0.3, 1.2).value(), np.eye(2), rtol=0, atol=1e-15)
    assert product_identity(1.0, 1.0, 0.0, 1.0).entry_value(0, 0) == pytest.approx(1.5564, abs=5e-5)
    lam, mu, x, y = 1.3, 0.8, -0.4, 0.9
    s, r = math.sqrt(lam), math.sqrt(lam + mu)
    z = r * (y - x)
    off = mu * math.exp(-s * (x + y)) * math.cosh(z / 2) * math.sinh(z / 2) / (s * r)
    m = product_identity(lam, mu, x, y)
    assert m.entry_value(0, 1) == pytest.approx(off, rel=1e-13)
    assert m.entry_value(1, 0) == pytest.approx(-off * math.exp(2 * s * (x + y)), rel=1e-13)


@given(st.floats(0.05, 10), st.floats(0.0, 10), st.floats(-3, 3), st.floats(0.01, 4))
def test_product_identity_matches_four_matrix_product(lam, mu, x, length):
    y = x + length
    ref = _numpy_product(lam, mu, x, y)
    got = product_identity(lam, mu, x, y).value()
    scale = np.abs(ref).max()
    assert np.abs(got - ref).max() <= 1e-11 * scale


def test_closed_form_matches_engine_on_grid():
    E = make_interval_union([(0.0, 1.0)])
    for lam in LAMS:
        for mu in MUS:
            sol = solve_phi(B, E, LaplaceParams(lam, (mu,)))
            for x in XS:
                ref = phi_single_interval(SingleIntervalQuery(0.0, 1.0, lam, mu, float(x)))
                assert abs(sol.value(x) - ref) <= 1e-10 / lam


def test_closed_form_examples():
    assert phi_single_interval(SingleIntervalQuery(0, 1, 1.0, 0.0, 0.3)) == 1.0
    at_u = phi_single_interval(SingleIntervalQuery(0, 1, 1.0, 1.0, 0.0))
    assert at_u == pytest.approx(0.76866, abs=5e-6)
    assert at_u == pytest.approx(four_unknown_phi(1, 1, 0, 1, 0.0), rel=1e-13)
    mid = phi_single_interval(SingleIntervalQuery(0, 1, 1.0, 1.0, 0.5))
    assert mid == pytest.approx(0.71313, abs=5e-6)


@given(st.floats(0.05, 10), st.floats(0.0, 20), st.floats(-3, 3), st.floats(0.01, 5))
def test_closed_form_c1_and_bounds(lam, mu, u, length):
    v = u + length
    q = lambda x: phi_single_interval(SingleIntervalQuery(u, v, lam, mu, x))  # noqa: E731
    h = 1e-6 * max(1.0, length)
    for e in (u, v):
        left, mid, right = q(e - h), q(e), q(e + h)
        assert abs(left - mid) <= 1e-4 * (mid + h)
        assert abs(right - mid) <= 1e-4 * (mid + h)
    for x in np.linspace(u - 2, v + 2, 21):
        val = q(float(x))
        assert 1 / (lam + mu) * (1 - 1e-12) <= val <= 1 / lam * (1 + 1e-12)


def test_gamma0_and_delta1_displays():
    rng = np.random.default_rng(2)
    for _ in range(30):
        lam, mu = rng.uniform(0.1, 5.0, 2)
        u = float(rng.uniform(-3, 3))
        v = u + float(rng.uniform(0.05, 4.0))
        coefs = solve_phi(B, make_interval_union([(u, v)]), LaplaceParams(lam, (mu,))).coefficients
        assert coefs.gamma0 == pytest.approx(gamma0_single_interval(lam, mu, u, v), rel=1e-11)
        assert coefs.delta_n == pytest.approx(delta1_single_interval(lam, mu, u, v), rel=1e-11)


def test_transfer_corners_and_reversal():
    for lam, mu, u, v in ((1.0, 1.0, 0.0, 1.0), (2.5, 0.4, -1.0, 0.7), (0.3, 6.0, 1.0, 3.5)):
        asm = assemble(B, make_interval_union([(u, v)]), LaplaceParams(lam, (mu,)))
        assert asm.P[1].entry_value(0, 0) == pytest.approx(p1_corner(lam, mu, u, v), rel=1e-12)
        assert asm.Pt[1].entry_value(1, 1) == pytest.approx(p1_corner(lam, mu, u, v), rel=1e-12)
        assert asm.Q[1].entry_value(0, 0) == pytest.approx(q1_corner(lam, mu, u, v), rel=1e-12)
        assert asm.Qt[1].entry_value(1, 0) == pytest.approx(q1_corner(lam, mu, u, v, True), rel=1e-12)


def test_exit_matrix_reduction():
    """M(v)^-1 N(v) P_1 = M(u)^-1 N(u)."""
    for lam, mu, u, v in ((1.0, 1.0, 0.0, 1.0), (0.7, 3.0, -0.5, 1.5)):
        mu_, nu_ = (m.value() for m in local_matrices(B, lam, mu, u))
        mv, nv = (m.value() for m in local_matrices(B, lam, mu, v))
        p1 = assemble(B, make_interval_union([(u, v)]), LaplaceParams(lam, (mu,))).P[1].value()
        lhs = np.linalg.inv(mv) @ nv @ p1
        rhs = np.linalg.inv(mu_) @ nu_
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-13)


def test_limits_in_mu_and_length():
    inside = [phi_single_interval(SingleIntervalQuery(0, 1, 1.0, mu, 0.5)) for mu in (1e2, 1e4, 1e6)]
    assert inside[-1] < 1e-5 and inside[0] > inside[1] > inside[2]
    far = phi_single_interval(SingleIntervalQuery(-200, 200, 1.0, 2.0, 0.0))
    assert far == pytest.approx(1 / 3.0, rel=1e-14)
    assert math.isfinite(phi_single_interval(SingleIntervalQuery(-1e4, 1e4, 4.0, 2.0, 3.0)))


def test_query_validation():
    with pytest.raises(ConfigError):
        SingleIntervalQuery(1.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        SingleIntervalQuery(0.0, 1.0, 1.0, -1.0, 0.0)
