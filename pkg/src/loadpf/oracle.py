"""Exact Kalman recursions for the 1-D local-level model, used as a test oracle.

    x_0 ~ N(m0, p0),   x_n = x_{n-1} + N(0, q),   y_n = x_n + N(0, r)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class LocalLevel:
    """Local-level model usable both by the Kalman oracle and the particle filter."""

    q: float = 1.0
    r: float = 1.0
    m0: float = 0.0
    p0: float = 1.0

    n_x = 1
    bounds = ()

    def sample_initial(self, M, rng):
        return (self.m0 + np.sqrt(self.p0) * rng.standard_normal(M))[:, None]

    def sample_transition(self, X, exog, rng):
        return X + np.sqrt(self.q) * rng.standard_normal(X.shape)

    def observation_loglik(self, X, y, exog):
        d = y - X[:, 0]
        return -0.5 * d * d / self.r - 0.5 * np.log(2 * np.pi * self.r)

    def observation_likelihood(self, X, y, exog):
        return np.exp(self.observation_loglik(X, y, exog))

    def observation_mean(self, X, exog):
        return X[:, 0]

    def observation_sample(self, X, exog, rng):
        return X[:, 0] + np.sqrt(self.r) * rng.standard_normal(X.shape[0])

    def simulate(self, n: int, rng) -> tuple[Array, Array]:
        x = np.empty(n)
        x[0] = self.m0 + np.sqrt(self.p0) * rng.standard_normal()
        for k in range(1, n):
            x[k] = x[k - 1] + np.sqrt(self.q) * rng.standard_normal()
        y = x + np.sqrt(self.r) * rng.standard_normal(n)
        return x, y


@dataclass
class KalmanResult:
    """Filtered and one-step predictive moments; index ``n`` refers to time ``n``.

    ``pred_mean[n]``/``pred_var[n]`` describe ``x_n | y_{0:n-1}`` (prior at n=0).
    """

    filt_mean: Array
    filt_var: Array
    pred_mean: Array
    pred_var: Array


def kalman_filter(model: LocalLevel, y) -> KalmanResult:
    """Exact filter; ``NaN`` observations are treated as missing."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    fm, fv, pm, pv = (np.empty(n) for _ in range(4))
    m, p = model.m0, model.p0
    for k in range(n):
        if k > 0:
            p = p + model.q
        pm[k], pv[k] = m, p
        if np.isnan(y[k]):
            fm[k], fv[k] = m, p
            continue
        s = p + model.r
        gain = p / s if s > 0 else 1.0
        m = m + gain * (y[k] - m)
        p = (1.0 - gain) * p
        fm[k], fv[k] = m, p
    return KalmanResult(fm, fv, pm, pv)


def steady_state_variance(q: float, r: float) -> float:
    """Fixed point of the filtered-variance Riccati map ``p -> (p+q) r / (p+q+r)``."""
    return 0.5 * (-q + np.sqrt(q * q + 4.0 * q * r))
