"""Weight degeneracy criteria (ESS, coefficient of variation, entropy)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Health(str, enum.Enum):
    HEALTHY = "Healthy"
    DEGENERATE = "Degenerate"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class Thresholds:
    """ESS fractions gating the composite filter.

    Resample+move when ``ESS < resample * M``; treat the observation as an
    outlier when ``ESS < critical * M``.
    """

    resample: float = 0.5
    critical: float = 0.001

    def __post_init__(self):
        if not 0.0 < self.critical < self.resample <= 1.0:
            raise ValueError("thresholds must satisfy 0 < critical < resample <= 1")


@dataclass(frozen=True)
class DegeneracyReport:
    ess: float
    cv: float
    entropy: float
    health: Health
    M: int

    @property
    def ess_ratio(self) -> float:
        return self.ess / self.M

    @property
    def relative_entropy(self) -> float:
        return self.entropy / np.log(self.M) if self.M > 1 else 0.0


def ess(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(1.0 / np.dot(w, w))


def cv(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    m = w.size
    d = m * w - 1.0
    return float(np.sqrt(np.dot(d, d) / m))


def entropy(weights) -> float:
    """Shannon entropy in nats with ``0 log 0 = 0``."""
    w = np.asarray(weights, dtype=np.float64)
    w = w[w > 0]
    return float(-np.dot(w, np.log(w)))


def classify(ess_value: float, M: int, th: Thresholds = Thresholds()) -> Health:
    # ties go to the healthier class
    if ess_value < th.critical * M:
        return Health.CRITICAL
    if ess_value < th.resample * M:
        return Health.DEGENERATE
    return Health.HEALTHY


def report(weights, th: Thresholds = Thresholds()) -> DegeneracyReport:
    w = np.asarray(weights, dtype=np.float64)
    e = ess(w)
    return DegeneracyReport(ess=e, cv=cv(w), entropy=entropy(w), health=classify(e, w.size, th), M=w.size)
