"""Electricity-load state-space model for one half-hour instant.

Observation::

    y_n = s_n * kappa[daytype_n]
          + g_heat_n * (T_heat_n - u_heat) * 1{T_heat_n < u_heat}
          + g_cool * delta_cool_n
          + N(0, sigma^2)

Dynamics (truncated Gaussian random walks, two layers)::

    sigma_s_n ~ N(sigma_s_{n-1}, sigma_s^2, (0, inf))
    sigma_g_n ~ N(sigma_g_{n-1}, sigma_g^2, (0, inf))
    s_n       ~ N(s_{n-1}, sigma_s_n^2, (0, inf))
    g_heat_n  ~ N(g_heat_{n-1}, sigma_g_n^2, (-inf, 0))

The static block ``(sigma_s, sigma_g, g_cool, u_heat, sigma, kappa)`` rides
along in an 18-dimensional extended state and is copied unchanged by the
transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import truncnorm
from .errors import AllZero

Array = np.ndarray

N_DAYTYPE = 9

# extended-state column layout
S, G_HEAT, SIG_S_N, SIG_G_N, SIG_S, SIG_G, G_COOL, U_HEAT, SIGMA = range(9)
KAPPA = slice(9, 9 + N_DAYTYPE)
N_X = 9 + N_DAYTYPE
DYNAMIC = slice(0, 4)
_BLOCK = 1 << 14

STATE_NAMES = (
    "s", "g_heat", "sigma_s_n", "sigma_g_n",
    "sigma_s", "sigma_g", "g_cool", "u_heat", "sigma",
) + tuple(f"kappa_{j}" for j in range(N_DAYTYPE))

_POS = (0.0, np.inf)
_NEG = (-np.inf, 0.0)
_FREE = (-np.inf, np.inf)
BOUNDS = (_POS, _NEG, _POS, _POS, _POS, _POS, _POS, _FREE, _POS) + (_POS,) * N_DAYTYPE


@dataclass(frozen=True)
class ExogenousRecord:
    daytype: int
    t_heat: float
    delta_cool: float = 0.0

    def __post_init__(self):
        if not 0 <= int(self.daytype) < N_DAYTYPE:
            raise ValueError(f"daytype {self.daytype} outside [0, {N_DAYTYPE})")
        if self.delta_cool < 0:
            raise ValueError("cooling degrees must be non-negative")


@dataclass(frozen=True)
class LoadParams:
    sigma_s: float
    sigma_g: float
    g_cool: float
    u_heat: float
    sigma: float
    kappa: tuple = field(default=(1.0,) * N_DAYTYPE)

    def __post_init__(self):
        if min(self.sigma_s, self.sigma_g, self.sigma) <= 0 or self.g_cool < 0:
            raise ValueError("sigma_s, sigma_g, sigma must be > 0 and g_cool >= 0")
        k = np.asarray(self.kappa, dtype=float)
        if k.size != N_DAYTYPE or np.any(k < 0) or abs(k.mean() - 1.0) > 1e-10:
            raise ValueError("kappa must hold non-negative coefficients with mean 1")


@dataclass(frozen=True)
class LoadDynamicState:
    s: float
    g_heat: float
    sigma_s_n: float
    sigma_g_n: float

    def __post_init__(self):
        if not (self.s > 0 and self.g_heat < 0 and self.sigma_s_n > 0 and self.sigma_g_n > 0):
            raise ValueError("need s > 0, g_heat < 0, sigma_s_n > 0, sigma_g_n > 0")


@dataclass(frozen=True)
class ExtendedStatePoint:
    dynamic: LoadDynamicState
    static_params: LoadParams

    def to_vector(self) -> Array:
        d, p = self.dynamic, self.static_params
        head = [d.s, d.g_heat, d.sigma_s_n, d.sigma_g_n,
                p.sigma_s, p.sigma_g, p.g_cool, p.u_heat, p.sigma]
        return np.array(head + list(p.kappa), dtype=np.float64)

    @classmethod
    def from_vector(cls, z) -> "ExtendedStatePoint":
        z = np.asarray(z, dtype=np.float64)
        return cls(
            LoadDynamicState(*map(float, z[DYNAMIC])),
            LoadParams(float(z[SIG_S]), float(z[SIG_G]), float(z[G_COOL]), float(z[U_HEAT]),
                       float(z[SIGMA]), tuple(map(float, z[KAPPA]))),
        )


def enforce_kappa_constraint(kappa_raw) -> Array:
    """Rescale non-negative coefficients so their mean is exactly one.

    Works row-wise on ``(M, N_daytype)`` arrays.
    """
    k = np.asarray(kappa_raw, dtype=np.float64)
    total = k.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise AllZero("kappa coefficients sum to zero")
    return k * (k.shape[-1] / total)


def heating_part(g_heat, t_heat, u_heat):
    """``g_heat * (T - u) * 1{T < u}``; non-negative since ``g_heat < 0``."""
    diff = np.asarray(t_heat, dtype=np.float64) - u_heat
    return g_heat * np.where(diff < 0, diff, 0.0)


def signal(s, g_heat, g_cool, u_heat, kappa_d, t_heat, delta_cool):
    """Noise-free load. Shared by the particle filter and the MCMC initialiser."""
    return s * kappa_d + heating_part(g_heat, t_heat, u_heat) + g_cool * delta_cool


def gaussian_logpdf(y, mean, sd):
    z = (y - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * np.log(2.0 * np.pi)


def _as_2d(z):
    z = np.asarray(z, dtype=np.float64)
    return (z[None, :], True) if z.ndim == 1 else (z, False)


def _blockwise(Z, cols, fn):
    # gather columns one cache-sized block of rows at a time; strided column reads
    # over the whole row-major array each cost a full pass through memory
    out = np.empty(Z.shape[0])
    for lo in range(0, Z.shape[0], _BLOCK):
        out[lo:lo + _BLOCK] = fn(np.ascontiguousarray(Z[lo:lo + _BLOCK, cols].T))
    return out


def _mean_from(c, ex: ExogenousRecord):
    s, g, g_cool, u, kappa = c[0], c[1], c[2], c[3], c[4]
    return signal(s, g, g_cool, u, kappa, ex.t_heat, ex.delta_cool)


def observation_mean(z, ex: ExogenousRecord):
    """Noise-free load for one extended state (1-D) or a particle array (2-D)."""
    Z, single = _as_2d(z)
    out = _blockwise(Z, [S, G_HEAT, G_COOL, U_HEAT, 9 + int(ex.daytype)], lambda c: _mean_from(c, ex))
    return float(out[0]) if single else out


def observation_loglik(z, y, ex: ExogenousRecord):
    Z, single = _as_2d(z)
    out = _blockwise(Z, [S, G_HEAT, G_COOL, U_HEAT, 9 + int(ex.daytype), SIGMA],
                     lambda c: gaussian_logpdf(y, _mean_from(c, ex), c[5]))
    return float(out[0]) if single else out


def observation_likelihood(z, y, ex: ExogenousRecord):
    ll = observation_loglik(z, y, ex)
    return np.exp(ll)


def sample_truncated_normal(mu, sd, interval=(-np.inf, np.inf), rng=None):
    """Exact draw(s) from ``N(mu, sd^2)`` restricted to the open ``interval``."""
    lo, hi = interval
    return truncnorm.sample(mu, sd, lo, hi, rng)


def sample_transition(z, ex, rng):
    """One step of the two-layer truncated random walk; static block copied."""
    Z, single = _as_2d(z)
    out = Z.copy()
    # fixed-size blocks keep the sampler's temporaries in cache; the block size is
    # a constant so the random stream is consumed identically on every machine
    for lo in range(0, Z.shape[0], _BLOCK):
        blk = out[lo:lo + _BLOCK]
        s, g, ssn, sgn, sig_s, sig_g = blk[:, :SIG_G + 1].T.copy()
        ssn = truncnorm.sample(ssn, sig_s, 0.0, np.inf, rng)
        sgn = truncnorm.sample(sgn, sig_g, 0.0, np.inf, rng)
        s = truncnorm.sample(s, ssn, 0.0, np.inf, rng)
        g = truncnorm.sample(g, sgn, -np.inf, 0.0, rng)
        blk[:, DYNAMIC] = np.column_stack((s, g, ssn, sgn))
    return out[0] if single else out


def synthesize(params: LoadParams, initial_state: LoadDynamicState, exogenous_series, rng):
    """Forward-simulate dynamic states (n, 4) and observations (n,).

    ``initial_state`` is the state at index 0; transitions start at index 1.
    """
    z = ExtendedStatePoint(initial_state, params).to_vector()
    n = len(exogenous_series)
    states = np.empty((n, 4))
    ys = np.empty(n)
    for k, ex in enumerate(exogenous_series):
        if k > 0:
            z = sample_transition(z, ex, rng)
        states[k] = z[DYNAMIC]
        ys[k] = observation_mean(z, ex) + params.sigma * rng.standard_normal()
    return states, ys


class LoadModel:
    """Filter-facing wrapper of the load model over extended-state particle arrays.

    ``prior`` is any object with ``sample(M, rng) -> (M, 18)`` used by
    :func:`loadpf.filter.init`; defaults to the vague prior.
    """

    n_x = N_X
    bounds = BOUNDS
    state_names = STATE_NAMES

    def __init__(self, prior=None):
        self.prior = prior

    def sample_initial(self, M, rng):
        prior = self.prior
        if prior is None:
            from .init_mcmc import VaguePrior

            prior = VaguePrior()
        return prior.sample(M, rng)

    def sample_transition(self, X, ex, rng):
        return sample_transition(X, ex, rng)

    def observation_loglik(self, X, y, ex):
        return observation_loglik(X, y, ex)

    def observation_likelihood(self, X, y, ex):
        return observation_likelihood(X, y, ex)

    def observation_mean(self, X, ex):
        return observation_mean(X, ex)

    def observation_sample(self, X, ex, rng):
        return observation_mean(X, ex) + X[:, SIGMA] * rng.standard_normal(X.shape[0])

    def project(self, X):
        X = X.copy()
        X[:, KAPPA] = enforce_kappa_constraint(X[:, KAPPA])
        return X
