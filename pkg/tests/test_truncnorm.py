import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from loadpf import truncnorm
from loadpf.errors import IntervalEmpty


def test_untruncated_moments():
    x = truncnorm.sample(np.full(100_000, 2.0), 3.0, rng=np.random.default_rng(0))
    se = 3.0 / math.sqrt(x.size)
    assert abs(x.mean() - 2.0) < 3 * se
    assert abs(x.std() - 3.0) < 3 * 3.0 / math.sqrt(2 * x.size)


def test_half_normal_mean():
    x = truncnorm.sample(np.zeros(100_000), 1.0, 0.0, np.inf, np.random.default_rng(1))
    assert np.all(x > 0)
    assert x.mean() == pytest.approx(math.sqrt(2 / math.pi), abs=0.01)


@pytest.mark.parametrize("mu, sd, lo, hi", [(0, 1, 1, 2), (0, 1, -3, -2.5), (5, 2, -np.inf, 0),
                                            (0, 1, 9, np.inf), (0, 1, -40, -39), (1e5, 1, 0, np.inf)])
def test_against_scipy_cdf(mu, sd, lo, hi):
    # oracle: scipy's truncated normal distribution
    x = truncnorm.sample(np.full(20_000, mu, dtype=float), sd, lo, hi, np.random.default_rng(2))
    assert np.all((x > lo) & (x < hi))
    ref = stats.truncnorm((lo - mu) / sd, (hi - mu) / sd, loc=mu, scale=sd)
    assert stats.kstest(x, ref.cdf).statistic < 0.015


def test_deep_tail_mean_matches_formula():
    x = truncnorm.sample(np.zeros(50_000), 1.0, 12.0, np.inf, np.random.default_rng(3))
    assert x.mean() == pytest.approx(stats.truncnorm.mean(12.0, np.inf), rel=1e-3)


def test_zero_sd_clamps_inside():
    rng = np.random.default_rng(0)
    assert truncnorm.sample(3.0, 0.0, 0.0, np.inf, rng) == 3.0
    out = truncnorm.sample(-1.0, 0.0, 0.0, np.inf, rng)
    assert out > 0


def test_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(IntervalEmpty):
        truncnorm.sample(0.0, 1.0, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        truncnorm.sample(0.0, -1.0, rng=rng)
    with pytest.raises(ValueError):
        truncnorm.sample(0.0, 1.0)


@settings(max_examples=80)
@given(st.floats(-1e4, 1e4), st.floats(1e-6, 1e3), st.floats(-1e4, 1e4), st.floats(1e-9, 1e4),
       st.integers(0, 2**31))
def test_draws_strictly_inside(mu, sd, lo, width, seed):
    hi = lo + width
    x = truncnorm.sample(np.full(64, mu), sd, lo, hi, np.random.default_rng(seed))
    assert np.all((x > lo) & (x < hi))


def test_narrow_deep_tail_interval_terminates():
    x = truncnorm.sample(np.zeros(1000), 1.0, 50.0, 50.0 + 1e-9, np.random.default_rng(4))
    assert np.all((x > 50.0) & (x < 50.0 + 1e-9))
