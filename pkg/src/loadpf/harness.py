"""Per-instant orchestration: initialise, filter day by day, forecast ahead.

Randomness for instant ``i`` comes from ``SeedSequence(seed, spawn_key=(i, stage))``
with stage 0 for initialisation and stage 1 for filtering, so results do not
depend on how instants are scheduled across workers.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import filter as pf
from . import init_mcmc
from . import loadmodel as lm
from .config import RunConfig
from .data import CausalView, Dataset, fmt
from .ensemble import WeightedEnsemble
from .errors import LoadPFError, ValidationError

INIT_STAGE, FILTER_STAGE = 0, 1

FORECAST_COLUMNS = ("instant", "issue_date", "target_date", "horizon", "mean",
                    "state_lo", "state_hi", "obs_lo", "obs_hi")
STEP_COLUMNS = ("instant", "date", "action", "ess", "ess_ratio", "cv", "entropy",
                "relative_entropy", "filtered_signal")


def instant_rng(seed: int, instant: int, stage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(instant, stage)))


@dataclass
class InstantResult:
    instant: int
    start_day: int
    forecasts: list
    steps: list  # StepRecord, ``n`` is the day index

    @property
    def outlier_days(self):
        return [r.n for r in self.steps if r.action is pf.StepAction.OUTLIER_SKIPPED]


def _annotate(err: LoadPFError, dataset: Dataset, day, instant):
    where = f"{dataset.dates[day]} instant {instant}" if day is not None else f"instant {instant}"
    try:
        return type(err)(f"{where}: {err}")
    except TypeError:
        return err


def initial_ensemble(dataset: Dataset, instant: int, cfg: RunConfig, view: CausalView | None = None):
    """MCMC warm-up on days ``0..n0-1``; returns the cloud at day ``n0 - 1``."""
    if cfg.n0 > dataset.n_days:
        raise ValidationError(f"n0={cfg.n0} exceeds the {dataset.n_days} days of data")
    view = view or CausalView(dataset, instant)
    view.advance(cfg.n0 - 1)
    y = np.array([view.load(k) for k in range(cfg.n0)])
    ex = [view.exogenous(k) for k in range(cfg.n0)]
    rng = instant_rng(cfg.seed, instant, INIT_STAGE)
    mc = cfg.mcmc_config()
    fit = init_mcmc.fit_reduced_model(
        y, [e.daytype for e in ex], [e.t_heat for e in ex], [e.delta_cool for e in ex],
        config=mc, rng=rng, M=cfg.particles)
    completion = init_mcmc.derive_completion_prior(fit, scale=mc.completion_scale, floor=mc.min_spread)
    return init_mcmc.compose_initial_ensemble(fit, completion, cfg.particles, rng)


def run_instant(dataset: Dataset, instant: int, cfg: RunConfig,
                initial: WeightedEnsemble | None = None) -> InstantResult:
    """Filter one instant through the whole dataset, issuing forecasts before each update."""
    model = lm.LoadModel()
    fc = cfg.filter_config()
    view = CausalView(dataset, instant)
    rng = instant_rng(cfg.seed, instant, FILTER_STAGE)
    day = None
    try:
        if initial is None and cfg.init_method == "vague":
            view.advance(0)
            fs = pf.init(model, view.load(0), view.exogenous(0), cfg.particles, fc, rng)
            steps = list(fs.degeneracy_log)
        else:
            if initial is None:
                if cfg.init_method == "file":
                    raise ValidationError(f"no initial particle cloud for instant {instant}")
                initial = initial_ensemble(dataset, instant, cfg, view)
            fs = pf.from_ensemble(initial, cfg.n0 - 1)
            steps = []
        start = fs.n
        forecasts = []
        for day in range(start + 1, dataset.n_days):
            horizon = min(cfg.tau_max, dataset.n_days - fs.n - 1)
            future = [view.exogenous(fs.n + tau) for tau in range(1, horizon + 1)]
            forecasts.extend(replace(rec, instant=instant)
                             for rec in pf.predict(fs, model, future, rng, level=cfg.ci_level))
            view.advance(day)
            fs, _ = pf.step(fs, model, view.load(day), view.exogenous(day), rng, fc)
            steps.append(fs.last)
            # keep the growing log off the state; it is collected here instead
            fs = pf.FilterState(fs.ensemble, fs.n)
    except LoadPFError as err:
        raise _annotate(err, dataset, day, instant) from err
    return InstantResult(instant, start, forecasts, steps)


def _run_one(args):
    return run_instant(*args)


def run_forecast(dataset: Dataset, cfg: RunConfig, initial: dict | None = None) -> list:
    """Run every selected instant; results are ordered by instant whatever the worker count."""
    instants = cfg.instants if cfg.instants is not None else dataset.instants
    for i in instants:
        dataset.column(i)
    initial = initial or {}
    jobs = [(dataset, i, cfg, initial.get(i)) for i in sorted(instants)]
    if cfg.workers == 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_one, jobs))


def write_forecasts(results, dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_COLUMNS)
        for res in results:
            for r in res.forecasts:
                w.writerow((res.instant, dataset.dates[r.issue].isoformat(),
                            dataset.dates[r.target].isoformat(), r.horizon, fmt(r.state_mean),
                            fmt(r.state_lo), fmt(r.state_hi), fmt(r.obs_lo), fmt(r.obs_hi)))


def write_steps(results, dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        for res in results:
            for r in res.steps:
                rep = r.report
                vals = ((rep.ess, rep.ess_ratio, rep.cv, rep.entropy, rep.relative_entropy)
                        if rep is not None else (float("nan"),) * 5)
                w.writerow((res.instant, dataset.dates[r.n].isoformat(), r.action.value,
                            *map(fmt, vals), fmt(r.filtered_signal)))
