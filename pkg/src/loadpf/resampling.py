"""Multinomial and residual-multinomial resampling in O(M).

Multinomial draws avoid sorting: ordered uniforms are generated directly from
normalised exponential spacings and merged once against the cumulative
weights.
"""

from __future__ import annotations

import enum

import numba
import numpy as np

from .ensemble import WeightedEnsemble
from .errors import AllWeightsZero

Array = np.ndarray


class Method(str, enum.Enum):
    MULTINOMIAL = "Multinomial"
    RESIDUAL = "ResidualMultinomial"


@numba.njit(cache=True)
def _merge(cum_weights, sorted_u, out):
    # linear merge of ordered uniforms against the cumulative weights
    m = cum_weights.shape[0]
    j = 0
    for i in range(sorted_u.shape[0]):
        u = sorted_u[i]
        while j < m - 1 and cum_weights[j] < u:
            j += 1
        out[i] = j
    return out


def ordered_uniforms(n: int, rng: np.random.Generator) -> Array:
    """``n`` sorted U(0,1) variates in O(n) via exponential spacings."""
    e = rng.standard_exponential(n + 1)
    c = np.cumsum(e)
    return c[:-1] / c[-1]


def _cumulative(weights: Array) -> Array:
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if not total > 0.0:
        raise AllWeightsZero("cannot resample an all-zero weight vector")
    cw = np.cumsum(w / total)
    # zero-weight tail must never be selected
    last = np.flatnonzero(w > 0)[-1]
    cw[last:] = 1.0
    return cw


def multinomial_indices(weights, n_out: int | None, rng: np.random.Generator) -> Array:
    """``n_out`` i.i.d. categorical draws over ``range(len(weights))``, sorted."""
    weights = np.asarray(weights, dtype=np.float64)
    n_out = weights.size if n_out is None else int(n_out)
    out = np.empty(n_out, dtype=np.int64)
    if n_out == 0:
        return out
    cw = _cumulative(weights)
    u = ordered_uniforms(n_out, rng)
    # zero-weight particles have empty (cw[j-1], cw[j]] cells, so the merge
    # never lands on them; guard u == 0 by forcing the first non-empty cell
    first = np.flatnonzero(weights > 0)[0]
    _merge(cw, u, out)
    np.maximum(out, first, out=out)
    return out


def residual_indices(weights, n_out: int | None, rng: np.random.Generator) -> Array:
    """Deterministic ``floor(n_out * w_j)`` copies, remainder drawn multinomially.

    When every ``n_out * w_j`` is integral no random numbers are consumed.
    """
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if not total > 0.0:
        raise AllWeightsZero("cannot resample an all-zero weight vector")
    w = weights / total
    n_out = w.size if n_out is None else int(n_out)
    scaled = n_out * w
    copies = np.floor(scaled).astype(np.int64)
    # cast rounding can leave e.g. 0.3*10 = 3.0000000000000004 -> 3, fine;
    # 2.9999999999999996 -> 2 would push mass into the residual draw
    near = np.abs(scaled - np.rint(scaled)) < 1e-9 * n_out
    copies[near] = np.rint(scaled[near]).astype(np.int64)
    r = int(copies.sum())
    fixed = np.repeat(np.arange(w.size, dtype=np.int64), copies)
    if r >= n_out:
        return fixed[:n_out]
    resid = scaled - copies
    resid[resid < 0] = 0.0
    extra = multinomial_indices(resid / resid.sum(), n_out - r, rng)
    return np.concatenate([fixed, extra])


def _apply(ens: WeightedEnsemble, idx: Array) -> WeightedEnsemble:
    m = idx.size
    return WeightedEnsemble(ens.particles[idx], np.full(m, 1.0 / m))


def multinomial_resample(ens: WeightedEnsemble, rng: np.random.Generator) -> WeightedEnsemble:
    return _apply(ens, multinomial_indices(ens.weights, ens.M, rng))


def residual_resample(ens: WeightedEnsemble, rng: np.random.Generator) -> WeightedEnsemble:
    return _apply(ens, residual_indices(ens.weights, ens.M, rng))


def resample(ens: WeightedEnsemble, rng: np.random.Generator, method: Method = Method.RESIDUAL):
    if Method(method) is Method.MULTINOMIAL:
        return multinomial_resample(ens, rng)
    return residual_resample(ens, rng)
