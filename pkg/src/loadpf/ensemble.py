"""Weighted particle ensembles: normalisation, estimation and weighted quantiles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AllWeightsZero, EmptyEnsemble, NonFiniteResult, NonFiniteWeight

Array = np.ndarray


def normalize_weights(raw) -> Array:
    """Return ``raw / raw.sum()``.

    Raises
    ------
    NonFiniteWeight
        If any value is NaN/inf or negative.
    AllWeightsZero
        If the values sum to zero, e.g. after every likelihood underflowed.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise EmptyEnsemble("weights must be a non-empty 1-D array")
    if not np.all(np.isfinite(raw)):
        raise NonFiniteWeight("non-finite unnormalised weight")
    if np.any(raw < 0):
        raise NonFiniteWeight("negative unnormalised weight")
    with np.errstate(over="ignore"):
        total = raw.sum()
    if total <= 0.0:
        raise AllWeightsZero("all unnormalised weights are zero")
    if not np.isfinite(total):
        # overflow of the sum only; rescale before dividing
        raw = raw / raw.max()
        total = raw.sum()
    return raw / total


@dataclass(frozen=True)
class WeightedEnsemble:
    """M particles in R^{n_x} with self-normalised weights.

    ``particles`` has shape ``(M, n_x)``; ``weights`` has shape ``(M,)``.
    Instances are treated as immutable values: operations return new
    ensembles rather than mutating arrays in place.
    """

    particles: Array
    weights: Array

    def __post_init__(self):
        p = np.asarray(self.particles, dtype=np.float64)
        if p.ndim == 1:
            p = p[:, None]
        w = np.asarray(self.weights, dtype=np.float64)
        if p.shape[0] == 0:
            raise EmptyEnsemble("ensemble has no particles")
        if w.shape != (p.shape[0],):
            raise ValueError(f"weights shape {w.shape} does not match {p.shape[0]} particles")
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "weights", w)

    @property
    def M(self) -> int:
        return self.particles.shape[0]

    @property
    def n_x(self) -> int:
        return self.particles.shape[1]

    @classmethod
    def uniform(cls, particles) -> "WeightedEnsemble":
        particles = np.asarray(particles, dtype=np.float64)
        m = particles.shape[0]
        return cls(particles, np.full(m, 1.0 / m))

    def with_weights(self, weights) -> "WeightedEnsemble":
        return WeightedEnsemble(self.particles, weights)

    def mean(self) -> Array:
        return self.weights @ self.particles


def estimate(ens: WeightedEnsemble, h: Callable[[Array], Array] | None = None) -> float:
    """Self-normalised importance sampling estimate ``sum_j w_j h(x_j)``.

    ``h`` is applied to the whole ``(M, n_x)`` particle array and must return
    ``M`` values. With ``h=None`` the first coordinate is used.
    """
    vals = ens.particles[:, 0] if h is None else np.asarray(h(ens.particles), dtype=np.float64)
    if vals.shape != (ens.M,):
        raise ValueError("h must return one value per particle")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteResult("h is not finite on every particle")
    out = float(ens.weights @ vals)
    if not np.isfinite(out):
        raise NonFiniteResult("estimate is not finite")
    return out


def weighted_quantiles(values, weights, qs) -> Array:
    """Inverse of the right-continuous weighted empirical CDF.

    For each ``q`` returns the smallest value whose cumulative weight is
    ``>= q``. Weights need not be normalised.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.size == 0:
        raise EmptyEnsemble("no values")
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    qs = np.atleast_1d(np.asarray(qs, dtype=np.float64))
    idx = np.searchsorted(cw, qs, side="left")
    return v[np.minimum(idx, v.size - 1)]


def interval(values, weights, level: float) -> tuple[float, float]:
    """Symmetric ``level`` credible interval of weighted scalar values."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    lo, hi = weighted_quantiles(values, weights, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    return float(lo), float(hi)


def credible_interval(ens: WeightedEnsemble, coord: int, level: float) -> tuple[float, float]:
    return interval(ens.particles[:, coord], ens.weights, level)
