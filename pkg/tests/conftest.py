from __future__ import annotations

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from sojourn_kit import make_interval_union  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


def random_config(rng: np.random.Generator, n_max=6, span_max=10.0, lam_range=(0.1, 10.0),
                  mu_max=5.0):
    """Random (E, lam, mu) with at most n_max intervals inside [-span/2, span/2]."""
    n = int(rng.integers(1, n_max + 1))
    span = float(rng.uniform(1.0, span_max))
    cuts = np.sort(rng.uniform(-span / 2, span / 2, 2 * n))
    while np.min(np.diff(cuts)) < 1e-3:
        cuts = np.sort(rng.uniform(-span / 2, span / 2, 2 * n))
    E = make_interval_union(cuts.reshape(n, 2))
    lam = float(math.exp(rng.uniform(math.log(lam_range[0]), math.log(lam_range[1]))))
    mu = tuple(float(m) for m in rng.uniform(0.0, mu_max, n))
    return E, lam, mu


@st.composite
def configs(draw, n_max=6, span_max=10.0):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_config(np.random.default_rng(seed), n_max, span_max)


def rel_err(a, b, floor=1e-300):
    return abs(a - b) / max(abs(b), floor)


@pytest.fixture
def acceptance_union():
    return make_interval_union([(0.0, 1.0), (2.0, 2.5)])
