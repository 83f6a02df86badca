import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from loadpf import loadmodel as lm
from loadpf.errors import AllZero, IntervalEmpty

EX_WARM = lm.ExogenousRecord(daytype=0, t_heat=20.0, delta_cool=0.0)


def point(s=50_000.0, g_heat=-1000.0, ssn=100.0, sgn=5.0, sigma_s=2.0, sigma_g=0.2, g_cool=500.0,
          u=14.0, sigma=300.0):
    return lm.ExtendedStatePoint(lm.LoadDynamicState(s, g_heat, ssn, sgn),
                                 lm.LoadParams(sigma_s, sigma_g, g_cool, u, sigma)).to_vector()


def test_observation_mean_examples():
    assert lm.observation_mean(point(), EX_WARM) == pytest.approx(50_000.0)
    cold = lm.ExogenousRecord(0, 10.0, 0.0)
    assert lm.observation_mean(point(), cold) - 50_000.0 == pytest.approx(4000.0)
    hot = lm.ExogenousRecord(0, 25.0, 3.0)
    assert lm.observation_mean(point(), hot) - 50_000.0 == pytest.approx(1500.0)


def test_observation_likelihood_examples():
    z = point(sigma=300.0)
    mean = lm.observation_mean(z, EX_WARM)
    peak = 1.0 / (300.0 * np.sqrt(2 * np.pi))
    assert lm.observation_likelihood(z, mean, EX_WARM) == pytest.approx(peak)
    assert lm.observation_likelihood(z, mean + 300.0, EX_WARM) == pytest.approx(np.exp(-0.5) * peak)
    assert lm.observation_likelihood(z, mean + 123.0, EX_WARM) == pytest.approx(
        lm.observation_likelihood(z, mean - 123.0, EX_WARM))


def test_transition_zero_innovations_is_identity():
    z = point(ssn=0.0 + 1e-300, sgn=1e-300, sigma_s=1e-300, sigma_g=1e-300)
    out = lm.sample_transition(z, EX_WARM, np.random.default_rng(0))
    np.testing.assert_allclose(out, z, rtol=1e-12, atol=1e-290)


def test_transition_static_block_bit_identical():
    rng = np.random.default_rng(1)
    Z = np.tile(point(), (100, 1))
    out = lm.sample_transition(Z, EX_WARM, rng)
    np.testing.assert_array_equal(out[:, 4:], Z[:, 4:])


def test_transition_mean_drifts_up_near_zero():
    Z = np.tile(point(s=100.0, ssn=1.0, sigma_s=1e-12), (100_000, 1))
    out = lm.sample_transition(Z, EX_WARM, np.random.default_rng(2))
    assert np.all(out[:, lm.S] > 0)
    # truncation at 0 is 100 sds away: the drift is positive but negligible
    assert out[:, lm.S].mean() == pytest.approx(stats.truncnorm.mean(-100.0, np.inf, loc=100.0), abs=0.02)
    Z = np.tile(point(s=1.0, ssn=1.0, sigma_s=1e-12), (100_000, 1))
    out = lm.sample_transition(Z, EX_WARM, np.random.default_rng(3))
    expect = stats.truncnorm.mean(-1.0, np.inf, loc=1.0)
    assert out[:, lm.S].mean() == pytest.approx(expect, abs=0.01) and expect > 1.0


def test_signs_preserved_over_many_steps():
    rng = np.random.default_rng(4)
    Z = np.tile(point(s=5.0, g_heat=-0.5, ssn=2.0, sgn=0.5, sigma_s=1.0, sigma_g=0.3), (10_000, 1))
    for _ in range(1000):
        Z = lm.sample_transition(Z, EX_WARM, rng)
    assert np.all(Z[:, lm.S] > 0) and np.all(Z[:, lm.G_HEAT] < 0)
    assert np.all(Z[:, lm.SIG_S_N] > 0) and np.all(Z[:, lm.SIG_G_N] > 0)


@pytest.mark.slow
def test_signs_preserved_full_scale():
    rng = np.random.default_rng(5)
    Z = np.tile(point(s=5.0, g_heat=-0.5, ssn=2.0, sgn=0.5, sigma_s=1.0, sigma_g=0.3), (100_000, 1))
    for _ in range(1000):
        Z = lm.sample_transition(Z, EX_WARM, rng)
    assert np.all(Z[:, lm.S] > 0) and np.all(Z[:, lm.G_HEAT] < 0)
    assert np.all(Z[:, lm.SIG_S_N] > 0) and np.all(Z[:, lm.SIG_G_N] > 0)


def test_truncated_normal_examples():
    rng = np.random.default_rng(6)
    x = lm.sample_truncated_normal(np.zeros(100_000), 1.0, (0.0, np.inf), rng)
    assert np.all(x > 0) and x.mean() == pytest.approx(np.sqrt(2 / np.pi), abs=0.01)
    assert lm.sample_truncated_normal(5.0, 0.0, (0.0, 1.0), rng) < 1.0
    with pytest.raises(IntervalEmpty):
        lm.sample_truncated_normal(0.0, 1.0, (2.0, 1.0), rng)


def test_kappa_constraint_examples():
    np.testing.assert_array_equal(lm.enforce_kappa_constraint(np.ones(9)), np.ones(9))
    np.testing.assert_allclose(lm.enforce_kappa_constraint([2.0, 2.0, 2.0]), [1.0, 1.0, 1.0])
    with pytest.raises(AllZero):
        lm.enforce_kappa_constraint(np.zeros(9))


@given(st.lists(st.floats(1e-3, 1e3), min_size=9, max_size=9), st.floats(1e-3, 1e3))
def test_kappa_constraint_mean_and_scale_invariance(k, c):
    k = np.array(k)
    out = lm.enforce_kappa_constraint(k)
    assert abs(out.mean() - 1.0) < 1e-12
    np.testing.assert_allclose(lm.enforce_kappa_constraint(c * k), out, rtol=1e-12)


@settings(max_examples=200)
@given(st.floats(-1e5, 0, exclude_max=True), st.floats(-30, 40), st.floats(-10, 30), st.floats(0, 20),
       st.floats(0, 2000))
def test_heating_and_cooling_parts_nonnegative(g_heat, t, u, dcool, g_cool):
    assert lm.heating_part(g_heat, t, u) >= 0
    assert g_cool * dcool >= 0


def test_observation_mean_piecewise_linear_with_kink_at_threshold():
    z = point(u=14.0, g_heat=-1000.0)
    temps = np.linspace(0, 30, 301)
    m = np.array([lm.observation_mean(z, lm.ExogenousRecord(0, t, 0.0)) for t in temps])
    slope = np.diff(m) / np.diff(temps)
    # below the threshold the load falls by |g_heat| per degree
    np.testing.assert_allclose(slope[temps[1:] <= 14.0], -1000.0, atol=1e-6)
    np.testing.assert_allclose(slope[temps[:-1] >= 14.0], 0.0, atol=1e-6)


def test_synthesize_noiseless_and_deterministic():
    params = lm.LoadParams(1e-300, 1e-300, 500.0, 14.0, 1e-300)
    s0 = lm.LoadDynamicState(50_000.0, -1000.0, 1e-300, 1e-300)
    ex = [lm.ExogenousRecord(k % 9, 5.0 + k, 0.5 * (k % 3)) for k in range(20)]
    states, y = lm.synthesize(params, s0, ex, np.random.default_rng(7))
    z = lm.ExtendedStatePoint(s0, params).to_vector()
    np.testing.assert_allclose(y, [lm.observation_mean(z, e) for e in ex], rtol=1e-12)
    a = lm.synthesize(lm.LoadParams(3.0, 0.3, 400.0, 14.5, 300.0), s0, ex, np.random.default_rng(8))
    b = lm.synthesize(lm.LoadParams(3.0, 0.3, 400.0, 14.5, 300.0), s0, ex, np.random.default_rng(8))
    np.testing.assert_array_equal(a[1], b[1])


def test_synthesize_residuals_match_noise():
    params = lm.LoadParams(3.0, 0.3, 400.0, 14.5, 300.0)
    s0 = lm.LoadDynamicState(50_000.0, -1000.0, 100.0, 5.0)
    ex = [lm.ExogenousRecord(k % 9, 10.0, 0.0) for k in range(10_000)]
    states, y = lm.synthesize(params, s0, ex, np.random.default_rng(9))
    kappa = np.asarray(params.kappa)[[e.daytype for e in ex]]
    resid = y - lm.signal(states[:, 0], states[:, 1], 400.0, 14.5, kappa, 10.0, 0.0)
    assert abs(resid.mean()) < 3 * 300.0 / 100.0
    assert resid.std() == pytest.approx(300.0, rel=0.03)


def test_parameter_validation():
    with pytest.raises(ValueError):
        lm.LoadParams(1.0, 1.0, -1.0, 14.0, 1.0)
    with pytest.raises(ValueError):
        lm.LoadParams(1.0, 1.0, 1.0, 14.0, 1.0, kappa=(2.0,) * 9)
    with pytest.raises(ValueError):
        lm.LoadDynamicState(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        lm.ExogenousRecord(9, 10.0)


def test_vector_round_trip():
    z = point()
    np.testing.assert_array_equal(lm.ExtendedStatePoint.from_vector(z).to_vector(), z)
    assert z.size == lm.N_X == 18
