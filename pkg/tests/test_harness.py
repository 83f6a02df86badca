import copy
from dataclasses import replace

import numpy as np
import pytest

from loadpf import harness
from loadpf import loadmodel as lm
from loadpf.config import RunConfig
from loadpf.errors import ValidationError

from helpers import truth_cloud

N0 = 30


def clouds(run, M=2000):
    return {i: truth_cloud(run, i, N0 - 1, M, seed=i) for i in run.dataset.instants}


def test_vague_run_counts_forecasts(small_run):
    cfg = RunConfig(particles=1000, tau_max=1, init_method="vague", n0=1)
    results = harness.run_forecast(small_run.dataset, cfg)
    assert [r.instant for r in results] == [0, 24]
    for r in results:
        assert len(r.forecasts) == 99
        assert [f.target for f in r.forecasts] == list(range(1, 100))
        assert len(r.steps) == 100


def test_horizons_are_truncated_at_the_end(small_run):
    cfg = RunConfig(particles=500, tau_max=5, n0=N0, instants=(0,), init_method="file")
    res = harness.run_forecast(small_run.dataset, cfg, clouds(small_run, 500))[0]
    assert len(res.forecasts) == sum(min(5, 99 - n) for n in range(N0 - 1, 99))
    assert all(f.target < 100 for f in res.forecasts)
    assert all(f.state_lo <= f.state_hi and f.obs_lo <= f.obs_hi for f in res.forecasts)


def test_outputs_byte_identical_across_runs_and_workers(small_run, tmp_path):
    init = clouds(small_run)
    paths = []
    for k, workers in enumerate((1, 1, 2)):
        cfg = RunConfig(particles=2000, n0=N0, seed=7, workers=workers, init_method="file")
        res = harness.run_forecast(small_run.dataset, cfg, init)
        p = tmp_path / f"f{k}.csv"
        harness.write_forecasts(res, small_run.dataset, p)
        harness.write_steps(res, small_run.dataset, tmp_path / f"s{k}.csv")
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()
    assert (tmp_path / "s0.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()


def test_instant_order_does_not_matter(small_run):
    init = clouds(small_run)
    cfg = RunConfig(particles=2000, n0=N0, seed=1, init_method="file")
    together = harness.run_forecast(small_run.dataset, cfg, init)
    alone = [harness.run_instant(small_run.dataset, i, cfg, init[i]) for i in (24, 0)][::-1]
    for a, b in zip(together, alone):
        assert a.forecasts == b.forecasts


def test_forecasts_never_read_future_loads(small_run):
    init = clouds(small_run)
    cfg = RunConfig(particles=2000, n0=N0, seed=2, instants=(24,), init_method="file")
    clean = harness.run_forecast(small_run.dataset, cfg, init)[0]
    poisoned = copy.deepcopy(small_run.dataset)
    cut = 60
    poisoned.load[cut:, :] = 1e12
    dirty = harness.run_forecast(poisoned, cfg, init)[0]
    before = [f for f in clean.forecasts if f.issue < cut]
    assert before == [f for f in dirty.forecasts if f.issue < cut]
    assert clean.forecasts != dirty.forecasts


def test_missing_loads_are_logged_as_missing(small_run):
    ds = copy.deepcopy(small_run.dataset)
    ds.load[40, 0] = np.nan
    cfg = RunConfig(particles=1000, n0=N0, instants=(0,), init_method="file")
    res = harness.run_forecast(ds, cfg, clouds(small_run, 1000))[0]
    step = next(s for s in res.steps if s.n == 40)
    assert step.action.value == "Missing"


def test_file_init_without_cloud_names_the_instant(small_run):
    cfg = RunConfig(particles=100, n0=N0, instants=(24,), init_method="file")
    with pytest.raises(ValidationError, match="instant 24"):
        harness.run_forecast(small_run.dataset, cfg)


def test_unknown_instant_is_rejected(small_run):
    with pytest.raises(ValidationError):
        harness.run_forecast(small_run.dataset, RunConfig(particles=100, n0=N0, instants=(5,)))


def test_mcmc_initial_ensemble_is_valid_and_seeded(small_run):
    cfg = RunConfig(particles=400, n0=60, mcmc_chains=2, mcmc_iterations=60, mcmc_check=False)
    a = harness.initial_ensemble(small_run.dataset, 0, cfg)
    b = harness.initial_ensemble(small_run.dataset, 0, cfg)
    np.testing.assert_array_equal(a.particles, b.particles)
    assert a.M == 400
    for z in a.particles[:50]:
        lm.ExtendedStatePoint.from_vector(z)
    with pytest.raises(ValidationError):
        harness.initial_ensemble(small_run.dataset, 0, replace(cfg, n0=101))


def test_instant_streams_are_independent():
    a = harness.instant_rng(0, 3, harness.FILTER_STAGE).random(4)
    b = harness.instant_rng(0, 3, harness.INIT_STAGE).random(4)
    c = harness.instant_rng(0, 4, harness.FILTER_STAGE).random(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, harness.instant_rng(0, 3, harness.FILTER_STAGE).random(4))
