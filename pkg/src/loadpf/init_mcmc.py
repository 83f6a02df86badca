"""MCMC warm-up producing the particle filter's initial cloud.

The full load model does not mix well under MCMC, so the first ``n0`` days
are fitted with a *reduced* model in which the random-walk standard
deviations are constant (``sigma_s_n = sigma_s*``, ``sigma_g_n = sigma_g*``).
Its posterior at day ``n0 - 1`` is then completed with a truncated-normal
prior on the second-layer variances and handed to the filter.

The sampler is Metropolis-within-Gibbs:

* latent paths ``(s, g_heat)``: forward-filtering backward-sampling on the
  untruncated linear-Gaussian model, used as an independence proposal with a
  Metropolis correction for the truncated random walks;
* ``sigma^2``: conjugate inverse-gamma;
* ``sigma_s*^2``, ``sigma_g*^2``: conjugate inverse-gamma proposal corrected
  for the truncation normalisers;
* ``g_cool``: exact truncated-normal Gibbs draw;
* ``u_heat``: adaptive random-walk Metropolis plus an independence move
  from its prior, both with the path integrated out;
* ``kappa``: exact Gaussian conditional on the constraint plane, used as an
  independence proposal (rejects draws outside the positive orthant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import special

from . import loadmodel as lm
from . import truncnorm
from .ensemble import WeightedEnsemble
from .errors import InsufficientDraws, NotConverged

Array = np.ndarray

# floor on adaptive proposal scales, relative to the parameter's natural scale
_MIN_STEP = 1e-2

SCALARS = ("sigma2", "sigma2_s", "sigma2_g", "g_cool", "u_heat", "s_last", "g_last")


@dataclass(frozen=True)
class VaguePrior:
    s0_var: float = 1e8
    g_cool_var: float = 1e8
    g0_var: float = 1e8
    u_mean: float = 14.0
    u_var: float = 1.0
    dirichlet_alpha: float = 1.0
    ig_shape: float = 1e-2
    ig_scale: float = 1e-2

    def __post_init__(self):
        vals = (self.s0_var, self.g_cool_var, self.g0_var, self.u_var,
                self.dirichlet_alpha, self.ig_shape, self.ig_scale)
        if min(vals) <= 0:
            raise ValueError("vague prior hyperparameters must be positive")

    def inverse_gamma(self, size, rng):
        g = rng.gamma(self.ig_shape, 1.0 / self.ig_scale, size)
        # shape 1e-2 gammas underflow to 0 about once in a thousand draws
        return 1.0 / np.maximum(g, 1e-300)

    def sample(self, M: int, rng: np.random.Generator) -> Array:
        """``M`` extended states drawn from the vague prior (κ rescaled to mean 1)."""
        X = np.empty((M, lm.N_X))
        X[:, lm.S] = truncnorm.sample(np.zeros(M), math.sqrt(self.s0_var), 0.0, np.inf, rng)
        X[:, lm.G_HEAT] = truncnorm.sample(np.zeros(M), math.sqrt(self.g0_var), -np.inf, 0.0, rng)
        X[:, lm.SIG_S_N] = np.sqrt(self.inverse_gamma(M, rng))
        X[:, lm.SIG_G_N] = np.sqrt(self.inverse_gamma(M, rng))
        X[:, lm.SIG_S] = np.sqrt(self.inverse_gamma(M, rng))
        X[:, lm.SIG_G] = np.sqrt(self.inverse_gamma(M, rng))
        X[:, lm.G_COOL] = truncnorm.sample(np.zeros(M), math.sqrt(self.g_cool_var), 0.0, np.inf, rng)
        X[:, lm.U_HEAT] = self.u_mean + math.sqrt(self.u_var) * rng.standard_normal(M)
        X[:, lm.SIGMA] = np.sqrt(self.inverse_gamma(M, rng))
        kappa = rng.dirichlet(np.full(lm.N_DAYTYPE, self.dirichlet_alpha), M)
        X[:, lm.KAPPA] = lm.enforce_kappa_constraint(np.maximum(kappa, 1e-300))
        return X


@dataclass(frozen=True)
class CompletionPrior:
    """Truncated normals ``N(m, s^2, (0, inf))`` on the second-layer variances."""

    m_s: float
    m_g: float
    s2_s: float
    s2_g: float

    def __post_init__(self):
        if self.s2_s <= 0 or self.s2_g <= 0:
            raise ValueError("completion prior scales must be positive")

    def sample(self, M, rng):
        var_s = truncnorm.sample(np.full(M, self.m_s), math.sqrt(self.s2_s), 0.0, np.inf, rng)
        var_g = truncnorm.sample(np.full(M, self.m_g), math.sqrt(self.s2_g), 0.0, np.inf, rng)
        return var_s, var_g


@dataclass(frozen=True)
class MCMCConfig:
    chains: int = 4
    iterations: int | None = None  # per chain, burn-in included; None: bank M draws
    burn_in_fraction: float = 0.5
    rhat_threshold: float = 1.1
    check_convergence: bool = True
    u_step: float = 0.5
    completion_scale: float = 0.5  # s_bar = completion_scale * m_bar
    min_spread: float = 1e-6

    def iterations_for(self, M: int) -> int:
        if self.iterations is not None:
            return int(self.iterations)
        keep = 1.0 - self.burn_in_fraction
        return int(math.ceil(M / self.chains / keep))


@dataclass
class MCMCResult:
    """Pooled post-burn-in draws plus per-chain traces for diagnostics."""

    draws: dict
    chains: dict
    s_increment_mean: Array
    g_increment_mean: Array
    s_path_mean: Array
    g_path_mean: Array
    rhat: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return int(self.draws["sigma2"].size)


# ---------------------------------------------------------------------------
# forward filtering, backward sampling for the 2-D (s, g_heat) random walk


@numba.njit(cache=True)
def _ffbs(y, h1, h2, offset, observed, qs, qg, r, m0, p0, z):
    n = y.shape[0]
    fm = np.empty((n, 2))
    fp = np.empty((n, 3))  # p11, p12, p22
    m1, m2 = m0[0], m0[1]
    p11, p12, p22 = p0[0], 0.0, p0[1]
    loglik = 0.0
    for k in range(n):
        if k > 0:
            p11 += qs
            p22 += qg
        if observed[k]:
            a, b = h1[k], h2[k]
            # S = H P H' + r ; K = P H' / S
            ph1 = p11 * a + p12 * b
            ph2 = p12 * a + p22 * b
            s = a * ph1 + b * ph2 + r
            k1 = ph1 / s
            k2 = ph2 / s
            innov = y[k] - offset[k] - (a * m1 + b * m2)
            loglik -= 0.5 * (math.log(2.0 * math.pi * s) + innov * innov / s)
            m1 += k1 * innov
            m2 += k2 * innov
            p11 -= k1 * ph1
            p12 -= k1 * ph2
            p22 -= k2 * ph2
            if p11 < 0.0:
                p11 = 0.0
            if p22 < 0.0:
                p22 = 0.0
        fm[k, 0] = m1
        fm[k, 1] = m2
        fp[k, 0] = p11
        fp[k, 1] = p12
        fp[k, 2] = p22
    out = np.empty((n, 2))
    # draw x_{n-1}
    c11, c12, c22 = fp[n - 1, 0], fp[n - 1, 1], fp[n - 1, 2]
    mu1, mu2 = fm[n - 1, 0], fm[n - 1, 1]
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            p11, p12, p22 = fp[k, 0], fp[k, 1], fp[k, 2]
            # J = P (P + Q)^-1
            a11 = p11 + qs
            a12 = p12
            a22 = p22 + qg
            det = a11 * a22 - a12 * a12
            i11 = a22 / det
            i12 = -a12 / det
            i22 = a11 / det
            j11 = p11 * i11 + p12 * i12
            j12 = p11 * i12 + p12 * i22
            j21 = p12 * i11 + p22 * i12
            j22 = p12 * i12 + p22 * i22
            d1 = out[k + 1, 0] - fm[k, 0]
            d2 = out[k + 1, 1] - fm[k, 1]
            mu1 = fm[k, 0] + j11 * d1 + j12 * d2
            mu2 = fm[k, 1] + j21 * d1 + j22 * d2
            # C = P - J P
            c11 = p11 - (j11 * p11 + j12 * p12)
            c12 = p12 - (j11 * p12 + j12 * p22)
            c22 = p22 - (j21 * p12 + j22 * p22)
        l11 = math.sqrt(c11) if c11 > 0.0 else 0.0
        l21 = c12 / l11 if l11 > 0.0 else 0.0
        rest = c22 - l21 * l21
        l22 = math.sqrt(rest) if rest > 0.0 else 0.0
        out[k, 0] = mu1 + l11 * z[k, 0]
        out[k, 1] = mu2 + l21 * z[k, 0] + l22 * z[k, 1]
    return out, loglik


def ffbs(y, h1, h2, offset, qs, qg, r, m0, p0, rng):
    """Joint draw of the ``(s, g_heat)`` path under the untruncated model.

    Returns the ``(n, 2)`` path and the Gaussian marginal log-likelihood of ``y``.
    """
    y = np.asarray(y, dtype=np.float64)
    observed = ~np.isnan(y)
    z = rng.standard_normal((y.size, 2))
    return _ffbs(np.where(observed, y, 0.0), np.asarray(h1, float), np.asarray(h2, float),
                 np.asarray(offset, float), observed, float(qs), float(qg), float(r),
                 np.asarray(m0, float), np.asarray(p0, float), z)


# ---------------------------------------------------------------------------
# reduced-model pieces


def _heat_design(t_heat, u):
    d = t_heat - u
    return np.where(d < 0, d, 0.0)


def reduced_loglik(y, s, g, g_cool, u, kappa, sigma2, daytype, t_heat, delta_cool) -> float:
    """Observation log-likelihood of the reduced model (missing ``y`` skipped).

    Goes through :func:`loadpf.loadmodel.signal`, the same code path the
    particle filter uses.
    """
    mean = lm.signal(s, g, g_cool, u, np.asarray(kappa)[daytype], t_heat, delta_cool)
    ok = ~np.isnan(y)
    return float(lm.gaussian_logpdf(y[ok], mean[ok], math.sqrt(sigma2)).sum())


def _log_trunc_norm(prev, sd, upper_side):
    # sum of log Phi terms normalising the truncated increments
    if upper_side:
        return float(special.log_ndtr(prev / sd).sum())
    return float(special.log_ndtr(-prev / sd).sum())


def split_rhat(chains: Array) -> float:
    """Split-chain potential scale reduction factor for ``(n_chains, n_draws)``."""
    x = np.asarray(chains, dtype=np.float64)
    n = x.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([x[:, :n], x[:, n:2 * n]], axis=0)
    means = halves.mean(axis=1)
    within = halves.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else float("inf")
    var_plus = (n - 1) / n * within + between / n
    return float(math.sqrt(var_plus / within))


class _Chain:
    def __init__(self, y, daytype, t_heat, delta_cool, prior: VaguePrior, rng, u_step):
        self.y = y
        self.obs = ~np.isnan(y)
        self.daytype = daytype
        self.t_heat = t_heat
        self.delta_cool = delta_cool
        self.prior = prior
        self.rng = rng
        self.n = y.size
        self.u_step = u_step
        self.accept = {"path": 0, "sigma2_s": 0, "sigma2_g": 0, "u_heat": 0, "kappa": 0}
        self.tries = 0
        self._counts = np.bincount(daytype[self.obs], minlength=lm.N_DAYTYPE)
        self._start()

    # -- initial values, deliberately dispersed across chains
    def _start(self):
        rng, y = self.rng, self.y[self.obs]
        level = float(np.mean(y))
        spread = float(np.std(np.diff(y))) if y.size > 2 else level * 0.01
        self.kappa = np.ones(lm.N_DAYTYPE)
        self.u = self.prior.u_mean + 2.0 * math.sqrt(self.prior.u_var) * rng.standard_normal()
        self.g_cool = abs(rng.normal(0.0, 0.01 * level))
        self.sigma2 = (spread * rng.uniform(0.3, 3.0)) ** 2
        self.sigma2_s = (spread * rng.uniform(0.1, 1.0)) ** 2
        self.sigma2_g = (0.001 * level * rng.uniform(0.3, 3.0)) ** 2
        self.s = np.full(self.n, level * rng.uniform(0.8, 1.2))
        self.g = np.full(self.n, -0.02 * level * rng.uniform(0.3, 3.0))
        self.kappa_cov = np.eye(lm.N_DAYTYPE) * 1e-4
        self.kappa_scale = 1.0
        self.log_q_step = [0.5, 0.5]
        self._kappa_hist = []
        for _ in range(200):
            s, g = self._propose_path()[0]
            if np.all(s > 0) and np.all(g < 0):
                break
        # fallback keeps the path well inside the support
        self.s = np.maximum(s, 0.01 * level)
        self.g = np.minimum(g, -1e-4 * level)
        self.s_step = np.full(2, math.sqrt(self.sigma2_s))
        self.g_step = np.full(2, math.sqrt(self.sigma2_g))

    def _propose_path(self, kappa=None, u=None, q=None):
        kappa = self.kappa if kappa is None else kappa
        u = self.u if u is None else u
        qs, qg = (self.sigma2_s, self.sigma2_g) if q is None else q
        h2 = _heat_design(self.t_heat, u)
        offset = self.g_cool * self.delta_cool
        p = self.prior
        path, loglik = ffbs(self.y, kappa[self.daytype], h2, offset, qs, qg,
                            self.sigma2, (0.0, 0.0), (p.s0_var, p.g0_var), self.rng)
        return path.T, loglik

    def _joint_move(self, kappa, u, log_prior_ratio, q=None):
        """Propose new static values together with a fresh path (path integrated out)."""
        q_old = (self.sigma2_s, self.sigma2_g)
        q = q_old if q is None else q
        (s, g), ll_new = self._propose_path(kappa, u, q)
        t_new = self._log_trunc_weight(s, g, q)
        if t_new == -np.inf:
            return False
        _, ll_old = self._propose_path()
        log_ratio = ll_new + t_new - ll_old - self._log_trunc_weight(self.s, self.g) + log_prior_ratio
        if not self._mh(log_ratio):
            return False
        self.kappa, self.u, self.s, self.g = kappa, u, s, g
        self.sigma2_s, self.sigma2_g = q
        return True

    def _log_trunc_weight(self, s, g, q=None):
        if np.any(s <= 0) or np.any(g >= 0):
            return -np.inf
        qs, qg = (self.sigma2_s, self.sigma2_g) if q is None else q
        return -(_log_trunc_norm(s[:-1], math.sqrt(qs), True)
                 + _log_trunc_norm(g[:-1], math.sqrt(qg), False))

    def update_rw_variances_joint(self, adapt: bool, it: int):
        """Random walk on each log random-walk variance with the path integrated out."""
        p = self.prior
        for k in (0, 1):
            q = [self.sigma2_s, self.sigma2_g]
            step = self.log_q_step[k] * self.rng.standard_normal()
            new = q[k] * math.exp(step)
            # inverse-gamma prior on the variance, Jacobian of the log scale included
            prior_ratio = -p.ig_shape * step - p.ig_scale * (1.0 / new - 1.0 / q[k])
            q[k] = new
            ok = self._joint_move(self.kappa, self.u, prior_ratio, tuple(q))
            self.accept["rw_joint"] = self.accept.get("rw_joint", 0) + ok
            if adapt:
                self.log_q_step[k] = min(max(
                    self.log_q_step[k] * math.exp((float(ok) - 0.44) / math.sqrt(it + 1.0)), _MIN_STEP), 3.0)

    def _mh(self, log_ratio):
        return log_ratio >= 0 or math.log(self.rng.random()) < log_ratio

    def update_path(self):
        (s, g), _ = self._propose_path()
        new = self._log_trunc_weight(s, g)
        if new > -np.inf and self._mh(new - self._log_trunc_weight(self.s, self.g)):
            self.s, self.g = s, g
            self.accept["path"] += 1

    def _site_logpost(self, path, sd, upper_side, idx, local_ll, var0):
        # terms of the path's log-density that involve sites ``idx``
        n = path.size
        x = path[idx]
        out = local_ll.copy()
        has_prev = idx > 0
        prev = path[np.maximum(idx - 1, 0)]
        out += np.where(has_prev, -0.5 * ((x - prev) / sd) ** 2, -0.5 * x * x / var0)
        has_next = idx < n - 1
        nxt = path[np.minimum(idx + 1, n - 1)]
        sign = 1.0 if upper_side else -1.0
        out += np.where(has_next, -0.5 * ((nxt - x) / sd) ** 2 - special.log_ndtr(sign * x / sd), 0.0)
        return out

    def _site_ll(self, s, g, idx):
        mean = lm.signal(s[idx], g[idx], self.g_cool, self.u, self.kappa[self.daytype[idx]],
                         self.t_heat[idx], self.delta_cool[idx])
        ll = lm.gaussian_logpdf(self.y[idx], mean, math.sqrt(self.sigma2))
        return np.where(self.obs[idx], ll, 0.0)

    def update_sites(self, adapt: bool):
        """Single-site random-walk Metropolis on odd then even days, vectorised."""
        p = self.prior
        for parity in (0, 1):
            idx = np.arange(parity, self.n, 2)
            for which in ("s", "g"):
                upper = which == "s"
                path = self.s if upper else self.g
                sd = math.sqrt(self.sigma2_s if upper else self.sigma2_g)
                var0 = p.s0_var if upper else p.g0_var
                step = self.s_step if upper else self.g_step
                cur = self._site_logpost(path, sd, upper, idx, self._site_ll(self.s, self.g, idx), var0)
                prop_path = path.copy()
                prop_path[idx] += step[parity] * self.rng.standard_normal(idx.size)
                valid = prop_path[idx] > 0 if upper else prop_path[idx] < 0
                safe = np.where(valid, prop_path[idx], path[idx])
                prop_path[idx] = safe
                s_new, g_new = (prop_path, self.g) if upper else (self.s, prop_path)
                new = self._site_logpost(prop_path, sd, upper, idx, self._site_ll(s_new, g_new, idx), var0)
                ok = valid & (np.log(self.rng.random(idx.size)) < new - cur)
                path[idx] = np.where(ok, prop_path[idx], path[idx])
                if adapt:
                    step[parity] *= math.exp(float(ok.mean()) - 0.44)

    def _residual(self):
        mean = lm.signal(self.s, self.g, self.g_cool, self.u, self.kappa[self.daytype],
                         self.t_heat, self.delta_cool)
        return (self.y - mean)[self.obs]

    def update_sigma2(self):
        r = self._residual()
        p = self.prior
        shape = p.ig_shape + 0.5 * r.size
        scale = p.ig_scale + 0.5 * float(r @ r)
        self.sigma2 = scale / self.rng.gamma(shape)

    def _update_rw_variance(self, path, upper_side, current):
        p = self.prior
        d = np.diff(path)
        shape = p.ig_shape + 0.5 * d.size
        scale = p.ig_scale + 0.5 * float(d @ d)
        prop = scale / self.rng.gamma(shape)
        prev = path[:-1]
        log_ratio = (_log_trunc_norm(prev, math.sqrt(current), upper_side)
                     - _log_trunc_norm(prev, math.sqrt(prop), upper_side))
        return (prop, True) if self._mh(log_ratio) else (current, False)

    def update_rw_variances(self):
        self.sigma2_s, ok = self._update_rw_variance(self.s, True, self.sigma2_s)
        self.accept["sigma2_s"] += ok
        self.sigma2_g, ok = self._update_rw_variance(self.g, False, self.sigma2_g)
        self.accept["sigma2_g"] += ok

    def update_g_cool(self):
        heat = lm.heating_part(self.g, self.t_heat, self.u)
        r = (self.y - self.s * self.kappa[self.daytype] - heat)[self.obs]
        dc = self.delta_cool[self.obs]
        prec = float(dc @ dc) / self.sigma2 + 1.0 / self.prior.g_cool_var
        mean = float(dc @ r) / self.sigma2 / prec
        self.g_cool = float(truncnorm.sample(mean, 1.0 / math.sqrt(prec), 0.0, np.inf, self.rng))

    def update_u(self, adapt: bool, it: int):
        p = self.prior
        prop = self.u + self.u_step * self.rng.standard_normal()
        prior_ratio = -0.5 * ((prop - p.u_mean) ** 2 - (self.u - p.u_mean) ** 2) / p.u_var
        ok = self._joint_move(self.kappa, prop, prior_ratio)
        self.accept["u_heat"] += ok
        if adapt:
            # Robbins-Monro towards ~44% acceptance, kept within sensible bounds so an
            # unlucky run of rejections cannot freeze the chain
            sd = math.sqrt(p.u_var)
            self.u_step = min(max(self.u_step * math.exp((float(ok) - 0.44) / math.sqrt(it + 1.0)),
                                  _MIN_STEP * sd), 5.0 * sd)

    def update_u_from_prior(self):
        """Independence proposal from the u_heat prior (the prior cancels in the ratio).

        Lets the chain leave regions where small random-walk steps only yield
        fresh paths outside the support.
        """
        p = self.prior
        prop = p.u_mean + math.sqrt(p.u_var) * self.rng.standard_normal()
        ok = self._joint_move(self.kappa, prop, 0.0)
        self.accept["u_prior"] = self.accept.get("u_prior", 0) + ok

    def update_kappa_joint(self, adapt: bool, it: int):
        """Adaptive random walk on the constraint plane, path integrated out."""
        z = self.rng.multivariate_normal(np.zeros(lm.N_DAYTYPE), self.kappa_cov, method="cholesky")
        prop = self.kappa + self.kappa_scale * (z - z.mean())
        ok = bool(np.all(prop > 0)) and self._joint_move(prop, self.u, 0.0)
        self.accept["kappa_joint"] = self.accept.get("kappa_joint", 0) + ok
        if adapt:
            self.kappa_scale = min(max(
                self.kappa_scale * math.exp((float(ok) - 0.234) / math.sqrt(it + 1.0)), _MIN_STEP), 10.0)
            self._kappa_hist.append(self.kappa.copy())
            if it >= 100 and it % 50 == 0:
                h = np.asarray(self._kappa_hist[len(self._kappa_hist) // 2:])
                self.kappa_cov = np.cov(h.T) * 2.38**2 / (lm.N_DAYTYPE - 1) + 1e-12 * np.eye(lm.N_DAYTYPE)

    def update_kappa(self):
        heat = lm.heating_part(self.g, self.t_heat, self.u)
        r = self.y - heat - self.g_cool * self.delta_cool
        ok = self.obs
        d = self.daytype[ok]
        s = self.s[ok]
        a = np.bincount(d, weights=s * s, minlength=lm.N_DAYTYPE)
        b = np.bincount(d, weights=s * r[ok], minlength=lm.N_DAYTYPE)
        seen = self._counts > 0
        mean = np.ones(lm.N_DAYTYPE)
        var = np.ones(lm.N_DAYTYPE)  # pseudo-prior N(1, 1) for unseen daytypes
        mean[seen] = b[seen] / a[seen]
        var[seen] = self.sigma2 / a[seen]
        z = mean + np.sqrt(var) * self.rng.standard_normal(lm.N_DAYTYPE)
        prop = z - var * (z.sum() - lm.N_DAYTYPE) / var.sum()
        if np.any(prop <= 0):
            return
        unseen = ~seen
        log_ratio = 0.0
        if np.any(unseen):
            # remove the pseudo-prior: target is flat on the simplex
            log_ratio = 0.5 * float(((prop[unseen] - 1.0) ** 2).sum()
                                    - ((self.kappa[unseen] - 1.0) ** 2).sum())
        if self._mh(log_ratio):
            self.kappa = prop
            self.accept["kappa"] += 1

    def sweep(self, adapt: bool, it: int):
        self.tries += 1
        self.update_path()
        self.update_sites(adapt)
        self.update_sigma2()
        self.update_rw_variances()
        self.update_rw_variances_joint(adapt, it)
        self.update_g_cool()
        self.update_u(adapt, it)
        self.update_u_from_prior()
        self.update_kappa()
        self.update_kappa_joint(adapt, it)


def fit_reduced_model(y, daytype, t_heat, delta_cool, prior: VaguePrior = VaguePrior(),
                      config: MCMCConfig = MCMCConfig(), rng=None, M: int = 10_000) -> MCMCResult:
    """Metropolis-within-Gibbs fit of the reduced model on the warm-up window.

    Raises
    ------
    NotConverged
        If any scalar's split R-hat exceeds ``config.rhat_threshold`` (only when
        ``config.check_convergence``).
    """
    y = np.asarray(y, dtype=np.float64)
    daytype = np.asarray(daytype, dtype=np.int64)
    t_heat = np.asarray(t_heat, dtype=np.float64)
    delta_cool = np.asarray(delta_cool, dtype=np.float64)
    n = y.size
    if n < 30:
        raise ValueError("the warm-up window needs at least 30 observations")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    iters = config.iterations_for(M)
    burn = int(iters * config.burn_in_fraction)
    keep = iters - burn
    seeds = rng.bit_generator.seed_seq.spawn(config.chains) if hasattr(rng.bit_generator, "seed_seq") \
        else np.random.SeedSequence(int(rng.integers(2**63))).spawn(config.chains)
    names = SCALARS + tuple(f"kappa_{j}" for j in range(lm.N_DAYTYPE))
    traces = {k: np.empty((config.chains, keep)) for k in names}
    s_inc = np.zeros(n - 1)
    g_inc = np.zeros(n - 1)
    s_sum = np.zeros(n)
    g_sum = np.zeros(n)
    accept = {}
    for c, ss in enumerate(seeds):
        chain = _Chain(y, daytype, t_heat, delta_cool, prior, np.random.default_rng(ss), config.u_step)
        for it in range(iters):
            chain.sweep(adapt=it < burn, it=it)
            if it >= burn:
                i = it - burn
                traces["sigma2"][c, i] = chain.sigma2
                traces["sigma2_s"][c, i] = chain.sigma2_s
                traces["sigma2_g"][c, i] = chain.sigma2_g
                traces["g_cool"][c, i] = chain.g_cool
                traces["u_heat"][c, i] = chain.u
                traces["s_last"][c, i] = chain.s[-1]
                traces["g_last"][c, i] = chain.g[-1]
                for j in range(lm.N_DAYTYPE):
                    traces[f"kappa_{j}"][c, i] = chain.kappa[j]
                s_inc += np.diff(chain.s)
                g_inc += np.diff(chain.g)
                s_sum += chain.s
                g_sum += chain.g
        for k, v in chain.accept.items():
            accept.setdefault(k, []).append(v / max(chain.tries, 1))
    total = config.chains * keep
    rhat = {k: split_rhat(v) for k, v in traces.items()}
    result = MCMCResult(
        draws={k: v.reshape(-1) for k, v in traces.items()},
        chains=traces,
        s_increment_mean=s_inc / total,
        g_increment_mean=g_inc / total,
        s_path_mean=s_sum / total,
        g_path_mean=g_sum / total,
        rhat=rhat,
        acceptance={k: float(np.mean(v)) for k, v in accept.items()},
    )
    if config.check_convergence:
        # κ of an unseen daytype is only pinned by the simplex; skip it
        seen = np.bincount(daytype[~np.isnan(y)], minlength=lm.N_DAYTYPE) > 0
        checked = {k: v for k, v in rhat.items()
                   if not (k.startswith("kappa_") and not seen[int(k.split("_")[1])])}
        bad = {k: v for k, v in checked.items() if not v <= config.rhat_threshold}
        if bad:
            raise NotConverged(f"split R-hat above {config.rhat_threshold}: {bad}", rhat=rhat)
    return result


def derive_completion_prior(result: MCMCResult, scale: float = 0.5, floor: float = 1e-6) -> CompletionPrior:
    """Centre the second-layer variance priors on the spread of posterior-mean increments."""
    m_s = max(float(np.std(result.s_increment_mean)), floor)
    m_g = max(float(np.std(result.g_increment_mean)), floor)
    return CompletionPrior(m_s=m_s, m_g=m_g, s2_s=(scale * m_s) ** 2, s2_g=(scale * m_g) ** 2)


def compose_initial_ensemble(result: MCMCResult, completion: CompletionPrior, M: int, rng,
                             allow_bootstrap: bool = True) -> WeightedEnsemble:
    """Pair reduced-model posterior draws with completion-prior draws, uniform weights."""
    n = result.n_draws
    if n >= M:
        idx = rng.permutation(n)[:M]
    elif allow_bootstrap and n > 0:
        idx = rng.integers(0, n, M)
    else:
        raise InsufficientDraws(f"{n} MCMC draws for {M} particles")
    d = result.draws
    X = np.empty((M, lm.N_X))
    X[:, lm.S] = d["s_last"][idx]
    X[:, lm.G_HEAT] = d["g_last"][idx]
    X[:, lm.SIG_S_N] = np.sqrt(d["sigma2_s"][idx])
    X[:, lm.SIG_G_N] = np.sqrt(d["sigma2_g"][idx])
    var_s, var_g = completion.sample(M, rng)
    X[:, lm.SIG_S] = np.sqrt(var_s)
    X[:, lm.SIG_G] = np.sqrt(var_g)
    X[:, lm.G_COOL] = d["g_cool"][idx]
    X[:, lm.U_HEAT] = d["u_heat"][idx]
    X[:, lm.SIGMA] = np.sqrt(d["sigma2"][idx])
    X[:, lm.KAPPA] = lm.enforce_kappa_constraint(
        np.column_stack([d[f"kappa_{j}"][idx] for j in range(lm.N_DAYTYPE)]))
    return WeightedEnsemble.uniform(X)


def vague_direct_init(prior: VaguePrior, M: int, rng) -> WeightedEnsemble:
    """Initial cloud straight from the vague prior (small synthetic tests only)."""
    if M < 2:
        raise ValueError("need at least two particles")
    return WeightedEnsemble.uniform(prior.sample(M, rng))
