"""Run configuration: ``key = value`` text files, overridable from the CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .degeneracy import Thresholds
from .errors import ValidationError
from .filter import FilterConfig
from .init_mcmc import MCMCConfig
from .resampling import Method

INIT_METHODS = ("mcmc", "vague", "file")


@dataclass(frozen=True)
class RunConfig:
    particles: int = 100_000
    resample_threshold: float = 0.5
    critical_threshold: float = 0.001
    detect_outliers: bool = True
    regularize: bool = True
    bandwidth: float | None = None
    kernel_shrink: bool = True
    resample_method: str = "residual"
    n0: int = 365
    ci_level: float = 0.9
    tau_max: int = 5
    seed: int = 0
    workers: int = 1
    instants: tuple | None = None  # None: every instant in the data
    init_method: str = "mcmc"
    mcmc_chains: int = 4
    mcmc_iterations: int | None = None
    mcmc_burn_in: float = 0.5
    mcmc_rhat: float = 1.1
    mcmc_check: bool = True
    completion_scale: float = 0.5

    def __post_init__(self):
        if self.particles < 2:
            raise ValidationError("particles must be at least 2")
        if not 0 < self.critical_threshold < self.resample_threshold <= 1:
            raise ValidationError("need 0 < critical_threshold < resample_threshold <= 1")
        if not 0 < self.ci_level < 1:
            raise ValidationError("ci_level must lie in (0, 1)")
        if self.tau_max < 1 or self.workers < 1 or self.n0 < 1:
            raise ValidationError("tau_max, workers and n0 must be positive")
        if self.init_method not in INIT_METHODS:
            raise ValidationError(f"init_method must be one of {INIT_METHODS}")
        if self.init_method == "mcmc" and self.n0 < 30:
            raise ValidationError("MCMC initialisation needs n0 >= 30")
        if self.resample_method not in ("residual", "multinomial"):
            raise ValidationError("resample_method must be residual or multinomial")
        if not 0 <= self.mcmc_burn_in < 1:
            raise ValidationError("mcmc_burn_in must lie in [0, 1)")

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            thresholds=Thresholds(self.resample_threshold, self.critical_threshold),
            detect_outliers=self.detect_outliers,
            regularize=self.regularize,
            bandwidth=self.bandwidth,
            shrink=self.kernel_shrink,
            resample_method=Method.RESIDUAL if self.resample_method == "residual" else Method.MULTINOMIAL,
            ci_level=self.ci_level,
        )

    def mcmc_config(self) -> MCMCConfig:
        return MCMCConfig(chains=self.mcmc_chains, iterations=self.mcmc_iterations,
                          burn_in_fraction=self.mcmc_burn_in, rhat_threshold=self.mcmc_rhat,
                          check_convergence=self.mcmc_check, completion_scale=self.completion_scale)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(key: str, text: str):
    field = _FIELDS[key]
    kind = str(field.type)
    t = text.strip()
    if "None" in kind and t.lower() in ("", "none", "auto"):
        return None
    try:
        if kind.startswith("bool"):
            if t.lower() in ("1", "true", "yes", "on"):
                return True
            if t.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(t)
        if kind.startswith("int"):
            return int(float(t)) if "e" in t.lower() else int(t)
        if kind.startswith("float"):
            return float(t)
        if kind.startswith("tuple"):
            return tuple(int(v) for v in t.replace(",", " ").split())
        return t
    except ValueError:
        raise ValidationError(f"bad value for {key}: {text!r}") from None


def parse_pairs(pairs: dict) -> dict:
    out = {}
    for k, v in pairs.items():
        key = k.strip().replace("-", "_")
        if key not in _FIELDS:
            raise ValidationError(f"unknown config key {k!r}")
        out[key] = _convert(key, v) if isinstance(v, str) else v
    return out


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"line {line_no}: expected key = value")
            k, v = line.split("=", 1)
            pairs[k.strip()] = v.strip()
    return parse_pairs(pairs)


def load(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then ``overrides`` (values may be strings)."""
    values = read_config_file(path) if path is not None else {}
    values.update(parse_pairs({k: v for k, v in (overrides or {}).items() if v is not None}))
    return RunConfig(**values)


def dump(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(map(str, v))
        lines.append(f"{f.name} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"
