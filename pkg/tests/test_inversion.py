from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from sojourn_kit import BrownianPaper, InversionConfig, expectation_at_time, invert_in_lambda, make_interval_union
from sojourn_kit.core import ConfigError, NonFinite
from sojourn_kit.inversion import local_time_expectation_at_time, sojourn_cdf_experimental, stehfest_weights
from sojourn_kit import PointSet, closed_form_one_point

B = BrownianPaper()
E1 = make_interval_union([(0.0, 1.0)])

PAIRS = {
    "one_over_lambda": (lambda lam: 1.0 / lam, lambda t: 1.0),
    "one_over_lambda_sq": (lambda lam: 1.0 / lam ** 2, lambda t: t),
    "shifted_pole": (lambda lam: 1.0 / (lam + 1.0), lambda t: math.exp(-t)),
}


def _invert(F, t, order=14):
    return invert_in_lambda(F, InversionConfig(t=t, order=order))


def test_config_validation():
    for bad in (3, 20, 2, 15):
        with pytest.raises(ConfigError):
            InversionConfig(order=bad)
    with pytest.raises(ConfigError):
        InversionConfig(t=0.0)
    with pytest.raises(ConfigError):
        InversionConfig(method="talbot")


def test_weights_are_exact_rationals_rounded():
    for order in range(4, 19, 2):
        w = stehfest_weights(order)
        # sum V_k = 0 and sum V_k / k = 1 (exact for f = 1)
        assert abs(math.fsum(w)) <= 1e-16 * max(map(abs, w)) * order
        assert math.fsum(v / k for k, v in enumerate(w, start=1)) == pytest.approx(1.0, abs=1e-15 * max(map(abs, w)))
    assert stehfest_weights(4) == (-2.0, 26.0, -48.0, 24.0)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0, 10.0])
def test_constant_pair_within_1e_10(t):
    assert abs(_invert(PAIRS["one_over_lambda"][0], t) - 1.0) <= 1e-10


def test_shifted_pole_example():
    assert abs(_invert(PAIRS["shifted_pole"][0], 1.0) - math.exp(-1.0)) <= 1e-6


def test_ramp_example():
    assert abs(_invert(PAIRS["one_over_lambda_sq"][0], 2.0) - 2.0) <= 1e-8


@pytest.mark.parametrize("name", list(PAIRS))
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_known_pairs_across_scales(name, t):
    F, f = PAIRS[name]
    assert abs(_invert(F, t) - f(t)) <= 1e-6 * abs(f(t))


def test_low_order_recovers_constants_to_round_off():
    """Fewer terms mean smaller weights, so f = 1 is exact to ~1e-12."""
    for t in (0.1, 1.0, 10.0):
        assert abs(_invert(PAIRS["one_over_lambda"][0], t, order=8) - 1.0) <= 1e-11


def test_linearity():
    F1, f1 = PAIRS["one_over_lambda_sq"]
    F2, f2 = PAIRS["shifted_pole"]
    for t in (0.5, 1.0, 2.0):
        combo = _invert(lambda lam: 2.0 * F1(lam) - 3.0 * F2(lam), t)
        # weights reach ~1e7 at order 14, so round-off alone is ~1e-9 per term
        assert combo == pytest.approx(2.0 * _invert(F1, t) - 3.0 * _invert(F2, t), abs=1e-7)


def test_non_finite_transform_raises():
    with pytest.raises(NonFinite):
        _invert(lambda lam: math.nan, 1.0)


def test_threads_do_not_change_result():
    F = PAIRS["shifted_pole"][0]
    cfg = InversionConfig(t=1.3)
    assert invert_in_lambda(F, cfg, threads=4) == invert_in_lambda(F, cfg, threads=1)


def test_expectation_examples():
    assert abs(expectation_at_time(B, E1, (0.0,), 0.5, 1.0) - 1.0) <= 1e-9
    assert abs(expectation_at_time(B, E1, (1.0,), -20.0, 0.01) - 1.0) <= 1e-4


def test_expectation_bounds_and_clamp_flag():
    est = expectation_at_time(B, E1, (3.0,), 0.5, 1.0, details=True)
    assert math.exp(-3.0) <= est.value <= 1.0
    assert est.lower == pytest.approx(math.exp(-3.0)) and est.upper == 1.0
    assert not est.clamped


def test_clamp_warns_when_raw_strays():
    with pytest.warns(RuntimeWarning):
        from sojourn_kit.inversion import _clamp

        out = _clamp(1.01, 0.0, 1.0)
    assert out.value == 1.0 and out.clamped


def test_nonincreasing_in_t_inside():
    E = make_interval_union([(0.0, 1.0), (2.0, 2.5)])
    ts = np.linspace(0.1, 3.0, 15)
    for x in (0.5, 2.25):
        vals = [expectation_at_time(B, E, (1.0, 1.0), x, float(t)) for t in ts]
        assert all(b <= a + 1e-4 for a, b in zip(vals[:-1], vals[1:]))


def test_local_time_expectation_against_one_point_form():
    t = 1.5
    direct = local_time_expectation_at_time(PointSet((0.0,)), (0.7,), 0.3, t)
    via_closed = invert_in_lambda(lambda lam: closed_form_one_point(lam, 0.7, 0.0, 0.3), InversionConfig(t=t))
    # transform values agree to ~1e-16; the weights amplify that by ~1e7
    assert direct == pytest.approx(via_closed, abs=1e-8)


def _occupation_samples(pairs, x0, t, n=20000, steps=1000, seed=4):
    rng = np.random.default_rng(seed)
    dt = t / steps
    x = np.full(n, float(x0))
    occ = np.zeros(n)
    for _ in range(steps):
        x += math.sqrt(2 * dt) * rng.standard_normal(n)
        inside = np.zeros(n, dtype=bool)
        for u, v in pairs:
            inside |= (x >= u) & (x <= v)
        occ += dt * inside
    return occ


@pytest.mark.slow
def test_experimental_cdf_against_simulated_occupation():
    for pairs, x0, t in (([(0.0, 1.0)], 0.5, 1.0), ([(0.0, 1.0), (1.5, 2.5)], -0.3, 2.0)):
        E = make_interval_union(pairs)
        occ = _occupation_samples(pairs, x0, t)
        for frac in (0.2, 0.4, 0.6, 0.8):
            s = frac * t
            est = sojourn_cdf_experimental(B, E, x0, t, s)
            assert abs(est - np.mean(occ <= s)) <= 5e-2


def test_weights_match_independent_formula():
    """Cross-check the cached weights against a direct Fraction evaluation."""
    order = 12
    half = order // 2
    for k, w in enumerate(stehfest_weights(order), start=1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** (half + 1), math.factorial(half)) * math.comb(half, j) \
                * math.comb(2 * j, j) * math.comb(j, k - j)
        assert w == float((-1) ** (k + half) * acc)
