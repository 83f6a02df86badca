"""Composite robust particle filter.

Prior-proposal sequential importance sampling with

* residual resampling followed by a kernel regularisation move whenever
  ``ESS < resample * M``;
* outlier removal: when ``ESS < critical * M`` the observation is treated as
  missing (propagated particles are kept with the previous weights);
* multi-horizon prediction and missing-observation handling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any, Protocol, Sequence

import numpy as np

from . import regularize
from .degeneracy import DegeneracyReport, Health, Thresholds, report
from .ensemble import WeightedEnsemble, interval, normalize_weights
from .errors import AllWeightsZero, DegenerateCovariance, MissingExogenous, NonFiniteWeight
from .resampling import Method, resample

Array = np.ndarray


class StateSpaceModel(Protocol):
    """Vectorised model capability used by the filter.

    Every method acts on a whole ``(M, n_x)`` particle array. Models may also
    provide ``observation_loglik`` (used for a guarded weight update) and
    ``project`` (re-impose constraints after a regularisation move).
    """

    n_x: int
    bounds: tuple

    def sample_initial(self, M: int, rng: np.random.Generator) -> Array: ...

    def sample_transition(self, X: Array, exog: Any, rng: np.random.Generator) -> Array: ...

    def observation_likelihood(self, X: Array, y: float, exog: Any) -> Array: ...

    def observation_mean(self, X: Array, exog: Any) -> Array: ...

    def observation_sample(self, X: Array, exog: Any, rng: np.random.Generator) -> Array: ...


class StepAction(str, enum.Enum):
    KEPT = "Kept"
    RESAMPLED_AND_MOVED = "ResampledAndMoved"
    OUTLIER_SKIPPED = "OutlierSkipped"
    MISSING = "Missing"


_ACTION_FOR = {
    Health.HEALTHY: StepAction.KEPT,
    Health.DEGENERATE: StepAction.RESAMPLED_AND_MOVED,
    Health.CRITICAL: StepAction.OUTLIER_SKIPPED,
}


@dataclass(frozen=True)
class FilterConfig:
    thresholds: Thresholds = Thresholds()
    detect_outliers: bool = True
    regularize: bool = True
    bandwidth: float | None = None
    shrink: bool = False
    resample_method: Method = Method.RESIDUAL
    ci_level: float = 0.9


@dataclass(frozen=True)
class StepRecord:
    """What happened at time ``n``; means are taken before any resampling."""

    n: int
    action: StepAction
    report: DegeneracyReport | None
    predicted_mean: Array
    filtered_mean: Array
    filtered_signal: float = float("nan")


@dataclass(frozen=True)
class FilterState:
    ensemble: WeightedEnsemble
    n: int
    outlier_log: tuple = ()
    degeneracy_log: tuple = ()

    @property
    def last(self) -> StepRecord | None:
        return self.degeneracy_log[-1] if self.degeneracy_log else None


@dataclass(frozen=True)
class ForecastRecord:
    issue: int
    horizon: int
    state_mean: float
    state_lo: float
    state_hi: float
    obs_lo: float
    obs_hi: float
    instant: int | None = None
    target: int | None = field(default=None)

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", self.issue + self.horizon)


def _underflow_report(M: int) -> DegeneracyReport:
    return DegeneracyReport(ess=0.0, cv=float("nan"), entropy=float("nan"), health=Health.CRITICAL, M=M)


def _likelihood(model, X, y, exog) -> Array:
    loglik = getattr(model, "observation_loglik", None)
    if loglik is not None:
        ll = np.asarray(loglik(X, y, exog), dtype=np.float64)
        if np.any(np.isnan(ll)) or np.any(ll == np.inf):
            raise NonFiniteWeight("observation log-likelihood is NaN or +inf")
        top = ll.max()
        if top == -np.inf:
            return np.zeros_like(ll)
        # per-step constant rescaling; cancels in the normalisation
        return np.exp(ll - top)
    lik = np.asarray(model.observation_likelihood(X, y, exog), dtype=np.float64)
    if not np.all(np.isfinite(lik)) or np.any(lik < 0):
        raise NonFiniteWeight("observation likelihood is negative or non-finite")
    top = lik.max()
    return lik / top if top > 0 else lik


def _reweight(prev_w, lik, config: FilterConfig):
    """Normalised updated weights and their degeneracy report (None weights on underflow)."""
    try:
        w = normalize_weights(prev_w * lik)
    except AllWeightsZero:
        return None, _underflow_report(prev_w.size)
    return w, report(w, config.thresholds)


def _move(model, X, w, config: FilterConfig, rng) -> Array:
    ens = resample(WeightedEnsemble(X, w), rng, config.resample_method)
    if not config.regularize:
        return ens.particles
    try:
        wt = regularize.weighted_covariance(WeightedEnsemble(X, w))
    except DegenerateCovariance:
        return ens.particles
    spec = regularize.KernelSpec(bounds=tuple(getattr(model, "bounds", ()) or ()), bandwidth=config.bandwidth,
                                  shrink=config.shrink)
    moved = regularize.regularize_move(ens, spec, wt, rng).particles
    project = getattr(model, "project", None)
    return project(moved) if project is not None else moved


def _signal(model, X, w, exog) -> float:
    return float(w @ model.observation_mean(X, exog))


def _branch(model, X_hat, prev_w, w_hat, rep, config, rng, critical_w):
    health = rep.health
    if health is Health.CRITICAL and not config.detect_outliers:
        # failure mode the outlier rule prevents: resample the collapsed cloud
        health = Health.DEGENERATE if w_hat is not None else Health.CRITICAL
    if health is Health.CRITICAL:
        return X_hat, critical_w, StepAction.OUTLIER_SKIPPED
    if health is Health.DEGENERATE:
        X = _move(model, X_hat, w_hat, config, rng)
        return X, np.full(X.shape[0], 1.0 / X.shape[0]), StepAction.RESAMPLED_AND_MOVED
    return X_hat, w_hat, StepAction.KEPT


def init(model, y0, exog, M: int, config: FilterConfig = FilterConfig(), rng=None) -> FilterState:
    """Sample ``M`` particles from the prior and assimilate ``y0``.

    On critical degeneracy the prior draws are kept with uniform weights and
    ``y0`` is logged as an outlier.
    """
    if M < 2:
        raise ValueError("need at least two particles")
    X_hat = np.asarray(model.sample_initial(M, rng), dtype=np.float64)
    uniform = np.full(M, 1.0 / M)
    if y0 is None or (np.ndim(y0) == 0 and np.isnan(y0)):
        rec = StepRecord(0, StepAction.MISSING, None, uniform @ X_hat, uniform @ X_hat,
                         _signal(model, X_hat, uniform, exog))
        return FilterState(WeightedEnsemble(X_hat, uniform), 0, (), (rec,))
    w_hat, rep = _reweight(uniform, _likelihood(model, X_hat, y0, exog), config)
    skip = w_hat is None or (rep.health is Health.CRITICAL and config.detect_outliers)
    used = uniform if skip else w_hat
    rec = StepRecord(0, _ACTION_FOR[rep.health], rep, uniform @ X_hat, used @ X_hat,
                     _signal(model, X_hat, used, exog))
    X, w, action = _branch(model, X_hat, uniform, w_hat, rep, config, rng, uniform)
    rec = replace(rec, action=action)
    outliers = (0,) if action is StepAction.OUTLIER_SKIPPED else ()
    return FilterState(WeightedEnsemble(X, w), 0, outliers, (rec,))


def from_ensemble(ens: WeightedEnsemble, n: int) -> FilterState:
    """Start from an externally supplied filtered cloud at time ``n``."""
    return FilterState(ens, n)


def step(fs: FilterState, model, y, exog, rng, config: FilterConfig = FilterConfig()):
    """Advance one time step assimilating ``y``; returns ``(FilterState, StepAction)``.

    ``y=None`` or NaN routes to :func:`step_missing`.
    """
    if y is None or (np.ndim(y) == 0 and np.isnan(y)):
        return step_missing(fs, model, exog, rng), StepAction.MISSING
    prev = fs.ensemble
    X_hat = np.asarray(model.sample_transition(prev.particles, exog, rng), dtype=np.float64)
    prev_w = prev.weights
    w_hat, rep = _reweight(prev_w, _likelihood(model, X_hat, y, exog), config)
    critical = rep.health is Health.CRITICAL and config.detect_outliers
    if w_hat is None and not config.detect_outliers:
        raise AllWeightsZero(f"all weights underflowed at n={fs.n + 1} with outlier removal disabled")
    used = prev_w if critical else w_hat
    n = fs.n + 1
    rec = StepRecord(n, _ACTION_FOR[rep.health], rep, prev_w @ X_hat, used @ X_hat,
                     _signal(model, X_hat, used, exog))
    X, w, action = _branch(model, X_hat, prev_w, w_hat, rep, config, rng, prev_w)
    rec = replace(rec, action=action)
    outliers = fs.outlier_log + ((n,) if action is StepAction.OUTLIER_SKIPPED else ())
    return FilterState(WeightedEnsemble(X, w), n, outliers, fs.degeneracy_log + (rec,)), action


def step_missing(fs: FilterState, model, exog, rng) -> FilterState:
    """Propagate without reweighting (prior proposal: f/q = 1)."""
    prev = fs.ensemble
    X = np.asarray(model.sample_transition(prev.particles, exog, rng), dtype=np.float64)
    n = fs.n + 1
    m = prev.weights @ X
    rec = StepRecord(n, StepAction.MISSING, None, m, m, _signal(model, X, prev.weights, exog))
    return FilterState(WeightedEnsemble(X, prev.weights), n, fs.outlier_log, fs.degeneracy_log + (rec,))


def predict(
    fs: FilterState,
    model,
    exog_future: Sequence,
    rng: np.random.Generator,
    level: float = 0.9,
    with_intervals: bool = True,
) -> list[ForecastRecord]:
    """Forecasts for horizons ``1..len(exog_future)`` from the current cloud.

    Particles are propagated through the transition without reweighting; the
    filter state itself is left untouched.
    """
    X = fs.ensemble.particles
    w = fs.ensemble.weights
    out = []
    for tau, exog in enumerate(exog_future, start=1):
        if exog is None:
            raise MissingExogenous(f"no exogenous inputs for horizon {tau}")
        X = np.asarray(model.sample_transition(X, exog, rng), dtype=np.float64)
        sig = model.observation_mean(X, exog)
        mean = float(w @ sig)
        if with_intervals:
            s_lo, s_hi = interval(sig, w, level)
            obs = model.observation_sample(X, exog, rng)
            o_lo, o_hi = interval(obs, w, level)
        else:
            s_lo = s_hi = o_lo = o_hi = float("nan")
        out.append(ForecastRecord(fs.n, tau, mean, s_lo, s_hi, o_lo, o_hi))
    return out


def run(model, ys, exogs, M, config: FilterConfig = FilterConfig(), rng=None) -> FilterState:
    """Filter a whole series from the prior (convenience for tests/oracles)."""
    fs = init(model, ys[0], exogs[0], M, config, rng)
    for y, ex in zip(ys[1:], exogs[1:]):
        fs, _ = step(fs, model, y, ex, rng, config)
    return fs
