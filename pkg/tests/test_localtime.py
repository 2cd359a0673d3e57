from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_local_time
from sojourn_kit import (BrownianGeneral, BrownianPaper, LaplaceParams, PointSet, closed_form_one_point,
                         closed_form_two_points, limit_pair, local_time_transform, make_interval_union,
                         solve_local_time, solve_phi)
from sojourn_kit.core import Unsupported
from sojourn_kit.localtime import assemble_local_time
from sojourn_kit.transfer import _pair

LAMS = (0.5, 1.0, 2.0)
WEIGHTS = (0.0, 0.5, 1.0, 5.0)
XS = np.linspace(-3.0, 3.0, 41)


def _eps_phi(points, lam, mu, eps, x):
    E = make_interval_union([(u - eps, u + eps) for u in points])
    return solve_phi(BrownianPaper(), E, LaplaceParams(lam, tuple(m / eps for m in mu))).value(x)


def test_limit_matrix_examples():
    p, q = limit_pair(1.0, 0.0, 0.7)
    assert np.array_equal(p.value(), np.eye(2)) and q.is_zero()
    p, _ = limit_pair(1.0, 1.0, 0.0)
    assert np.allclose(p.value(), [[2, 1], [-1, 0]], rtol=1e-15, atol=0)


@given(st.floats(0.05, 10), st.floats(0, 10), st.floats(-5, 5))
def test_limit_matrix_unimodular(lam, mu, u):
    m, lg = limit_pair(lam, mu, u)[0].det()
    assert m * math.exp(lg) == pytest.approx(1.0, rel=1e-12)


def test_limit_matrices_are_the_eps_limit():
    for lam, mu, u in ((1.0, 1.0, 0.0), (2.0, 0.5, 0.3)):
        eps = 1e-4
        p_eps, q_eps = _pair(BrownianPaper(), lam, mu / eps, u - eps, u + eps)
        p_bar, q_bar = limit_pair(lam, mu, u)
        nu = (mu / eps) / (lam * (lam + mu / eps))
        # relative per entry, with zero limit entries measured against the matrix scale
        pb = p_bar.value()
        assert np.all(np.abs(p_eps.value() - pb) <= 5e-3 * np.maximum(np.abs(pb), np.abs(pb).max()))
        # nu_eps Q_eps tends to Qbar / lambda
        qb = q_bar.value() / lam
        assert np.all(np.abs(nu * q_eps.value() - qb) <= 5e-3 * np.maximum(np.abs(qb), np.abs(qb).max()))


def test_one_point_examples():
    assert closed_form_one_point(1.0, 0.0, 0.0, 2.0) == 1.0
    assert local_time_transform(PointSet((0.0,)), LaplaceParams(1.0, (1.0,)), 0.0) == pytest.approx(0.5, rel=1e-15)
    v = local_time_transform(PointSet((0.0,)), LaplaceParams(1.0, (1.0,)), 1.0)
    assert v == pytest.approx(1 - 0.5 * math.exp(-1.0), rel=1e-14)
    assert v == pytest.approx(0.81606, abs=5e-6)
    assert local_time_transform(PointSet((0.0,)), LaplaceParams(1.0, (1.0,)), 80.0) == pytest.approx(1.0, rel=1e-14)


def test_two_point_example():
    assert closed_form_two_points(1.0, 1.0, 1.0, -1.0, 1.0, 0.0) == pytest.approx(0.65543, abs=1e-5)


def test_engine_matches_closed_forms():
    for lam in LAMS:
        for mu in WEIGHTS:
            one = solve_local_time(PointSet((0.3,)), LaplaceParams(lam, (mu,)))
            for x in XS:
                ref = closed_form_one_point(lam, mu, 0.3, x)
                assert abs(one.value(x) - ref) <= 1e-11 * ref
            for nu in WEIGHTS:
                two = solve_local_time(PointSet((-0.5, 1.0)), LaplaceParams(lam, (mu, nu)))
                for x in XS:
                    ref = closed_form_two_points(lam, mu, nu, -0.5, 1.0, x)
                    assert abs(two.value(x) - ref) <= 1e-11 * ref


def test_two_point_reduces_to_one_point():
    for lam in LAMS:
        for mu in WEIGHTS:
            for x in XS:
                a = closed_form_two_points(lam, mu, 0.0, -0.5, 1.0, x)
                b = closed_form_one_point(lam, mu, -0.5, x)
                assert abs(a - b) <= 1e-12 * b


@given(st.floats(0.05, 5), st.floats(0, 5), st.floats(0, 5), st.floats(-2, 2), st.floats(0.05, 3),
       st.floats(-4, 4))
def test_two_point_reflection_symmetry(lam, mu, nu, u, length, x):
    v = u + length
    a = closed_form_two_points(lam, mu, nu, u, v, x)
    b = closed_form_two_points(lam, nu, mu, u, v, u + v - x)
    assert a == pytest.approx(b, rel=1e-13)


@given(st.integers(0, 2 ** 32 - 1))
def test_engine_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    pts = np.sort(rng.uniform(-4, 4, n))
    if n > 1 and np.min(np.diff(pts)) < 1e-3:
        return
    lam = float(rng.uniform(0.1, 6.0))
    mu = tuple(float(m) for m in rng.uniform(0, 5, n))
    sol = solve_local_time(PointSet(tuple(pts)), LaplaceParams(lam, mu))
    for x in rng.uniform(-6, 6, 10):
        ref = dense_local_time(pts, lam, mu, x)
        assert sol.value(x) == pytest.approx(ref, rel=1e-11)
        # the literal route cancels terms of size exp(2 sqrt(lam) span)
        growth = math.exp(2 * math.sqrt(lam) * (pts[-1] - pts[0]))
        assert sol.literal_value(x) == pytest.approx(ref, rel=1e-14 * growth + 1e-12)
        assert 0 < sol.value(x) <= 1 / lam * (1 + 1e-14)
    for u in pts:
        assert sol.value(u, "left") == pytest.approx(sol.value(u, "right"), rel=1e-11)


def test_last_literal_coefficient_has_no_growing_part():
    asm = assemble_local_time(PointSet((-1.0, 0.2, 1.5)), LaplaceParams(1.3, (1.0, 0.4, 2.0)))
    g, d = asm.B[-1]
    assert abs(g.value()) <= 1e-12 * abs(d.value())


def test_nonincreasing_in_each_weight():
    rng = np.random.default_rng(8)
    pts = PointSet((-1.0, 0.5, 2.0))
    for _ in range(20):
        mu = list(rng.uniform(0, 3, 3))
        x = float(rng.uniform(-3, 4))
        i = int(rng.integers(0, 3))
        base = local_time_transform(pts, LaplaceParams(1.0, tuple(mu)), x)
        mu[i] += 0.2
        assert local_time_transform(pts, LaplaceParams(1.0, tuple(mu)), x) <= base + 1e-15


def test_eps_limit_at_probe_points():
    points, lam, mu = (-0.7, 0.4, 1.6), 1.2, (1.0, 0.5, 2.0)
    sol = solve_local_time(PointSet(points), LaplaceParams(lam, mu))
    for x in np.linspace(-2.5, 3.0, 10):
        assert abs(_eps_phi(points, lam, mu, 1e-4, x) - sol.value(x)) <= 5e-3


def test_eps_limit_converges_linearly():
    points, lam, mu = (-0.7, 0.4, 1.6), 1.2, (1.0, 0.5, 2.0)
    sol = solve_local_time(PointSet(points), LaplaceParams(lam, mu))
    xs = np.linspace(-2.5, 3.0, 10)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        errs.append(max(abs(_eps_phi(points, lam, mu, eps, x) - sol.value(x)) for x in xs))
    ratios = [e / eps for e, eps in zip(errs, (1e-2, 1e-3, 1e-4))]
    assert max(ratios) < 10.0
    assert errs[0] > errs[1] > errs[2]


def test_other_bases_rejected():
    with pytest.raises(Unsupported):
        solve_local_time(PointSet((0.0,)), LaplaceParams(1.0, (1.0,)), basis=BrownianGeneral(1.0, 0.0))
