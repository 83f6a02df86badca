"""Kernel regularisation (post-resampling jitter) of a particle cloud.

Each particle moves by ``h * Sigma^{1/2} * eps`` with a Gaussian product
kernel. Bounded coordinates are whitened diagonally and use a truncated 1-D
kernel so the move can never leave the state space; unbounded coordinates
share a full Cholesky root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import truncnorm
from .ensemble import WeightedEnsemble
from .errors import DegenerateCovariance

Array = np.ndarray

UNBOUNDED = (-np.inf, np.inf)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian product kernel with bandwidth ``h`` and per-coordinate bounds.

    ``bandwidth=None`` means "use the Silverman rule for the ensemble at hand".
    With ``shrink=True`` every particle is first pulled towards the cloud mean
    by ``sqrt(1 - h^2)`` so the move keeps the first two moments instead of
    inflating the variance by ``1 + h^2``.
    """

    bounds: tuple = ()
    bandwidth: float | None = None
    shrink: bool = False

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth >= 0:
            raise ValueError("bandwidth must be non-negative")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty coordinate bound ({lo}, {hi})")

    def bounds_for(self, n_x: int):
        if not self.bounds:
            return [UNBOUNDED] * n_x
        if len(self.bounds) != n_x:
            raise ValueError(f"kernel has {len(self.bounds)} bounds for a {n_x}-dim state")
        return list(self.bounds)


@dataclass(frozen=True)
class WhiteningTransform:
    covariance: Array
    root: Array
    jitter: float = 0.0
    raw_covariance: Array = field(default=None, repr=False)

    @property
    def sd(self) -> Array:
        """Per-coordinate standard deviations of the (unjittered) cloud."""
        c = self.covariance if self.raw_covariance is None else self.raw_covariance
        return np.sqrt(np.clip(np.diag(c), 0.0, None))


def _jittered_root(cov: Array):
    tr = float(np.trace(cov))
    if tr <= 0.0:
        raise DegenerateCovariance("covariance has zero trace")
    lam = 0.0
    if np.linalg.eigvalsh(cov)[0] < 1e-10 * tr:
        lam = 1e-8 * tr
        cov = cov + lam * np.eye(cov.shape[0])
    return cov, np.linalg.cholesky(cov), lam


def weighted_covariance(ens: WeightedEnsemble) -> WhiteningTransform:
    """Weighted empirical covariance of the cloud and its Cholesky root.

    If the smallest eigenvalue falls below ``1e-10 * trace`` the matrix is
    jittered by ``1e-8 * trace * I`` before factorisation.
    """
    if ens.M < 2:
        raise ValueError("need at least two particles")
    w = ens.weights
    x = ens.particles
    mu = w @ x
    d = x - mu
    raw = (d * w[:, None]).T @ d
    raw = 0.5 * (raw + raw.T)
    cov, root, lam = _jittered_root(raw)
    return WhiteningTransform(covariance=cov, root=root, jitter=lam, raw_covariance=raw)


def silverman_bandwidth(M: int, n_x: int) -> float:
    """AMISE-optimal Gaussian-kernel bandwidth ``(4 / (M (n_x + 2)))^(1/(n_x+4))``."""
    if M < 2 or n_x < 1:
        raise ValueError("need M >= 2 and n_x >= 1")
    return (4.0 / (M * (n_x + 2.0))) ** (1.0 / (n_x + 4.0))


def regularize_move(
    ens: WeightedEnsemble,
    spec: KernelSpec,
    wt: WhiteningTransform,
    rng: np.random.Generator,
) -> WeightedEnsemble:
    """Jitter every particle with the whitened, bandwidth-scaled kernel.

    Weights are returned unchanged.
    """
    n_x = ens.n_x
    h = silverman_bandwidth(ens.M, n_x) if spec.bandwidth is None else float(spec.bandwidth)
    if h == 0.0:
        return ens
    bounds = spec.bounds_for(n_x)
    x = ens.particles.copy()
    if spec.shrink:
        # convex combination with the mean, so bounded coordinates stay inside
        a = np.sqrt(max(1.0 - h * h, 0.0))
        mu = ens.weights @ x
        x = mu + a * (x - mu)
    free = [j for j, (lo, hi) in enumerate(bounds) if np.isneginf(lo) and np.isposinf(hi)]
    boxed = [j for j in range(n_x) if j not in free]
    if free:
        block = wt.raw_covariance if wt.raw_covariance is not None else wt.covariance
        sub = block[np.ix_(free, free)]
        if np.trace(sub) > 0:
            _, root, _ = _jittered_root(sub)
            eps = rng.standard_normal((ens.M, len(free)))
            x[:, free] += h * eps @ root.T
    sd = wt.sd
    for j in boxed:
        if sd[j] <= 0:
            continue
        lo, hi = bounds[j]
        x[:, j] = truncnorm.sample(x[:, j], h * sd[j], lo, hi, rng)
    return WeightedEnsemble(x, ens.weights)


def kernel_mixture_sample(
    ens: WeightedEnsemble,
    spec: KernelSpec,
    wt: WhiteningTransform,
    rng: np.random.Generator,
    n_out: int | None = None,
) -> WeightedEnsemble:
    """Sample directly from the weighted kernel mixture ``sum_k w_k K_h(x_k, .)``.

    Independent reference path for the resample-then-move combination: the
    component is picked with numpy's categorical sampler (not the O(M)
    resampler) and the kernel noise is added per draw.
    """
    n_out = ens.M if n_out is None else n_out
    comp = rng.choice(ens.M, size=n_out, p=ens.weights)
    picked = WeightedEnsemble(ens.particles[comp], np.full(n_out, 1.0 / n_out))
    if spec.bandwidth is None:
        spec = KernelSpec(bounds=spec.bounds, bandwidth=silverman_bandwidth(ens.M, ens.n_x), shrink=spec.shrink)
    return regularize_move(picked, spec, wt, rng)
