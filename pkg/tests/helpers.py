"""Shared test helpers."""

import numpy as np
from loadpf import loadmodel as lm
from loadpf import synth
from loadpf.ensemble import WeightedEnsemble


def truth_cloud(run: synth.SyntheticRun, instant: int, day: int, M: int, seed: int = 0) -> WeightedEnsemble:
    """Particles scattered around the generating state and parameters at ``day``."""
    rng = np.random.default_rng(seed)
    j = run.dataset.column(instant)
    params = run.params[instant]
    s, g, ssn, sgn = run.states[day, j]
    z = lm.ExtendedStatePoint(lm.LoadDynamicState(s, g, ssn, sgn), params).to_vector()
    X = np.tile(z, (M, 1))
    X[:, lm.S] *= np.exp(0.01 * rng.standard_normal(M))
    X[:, lm.G_HEAT] *= np.exp(0.05 * rng.standard_normal(M))
    X[:, lm.U_HEAT] += 0.2 * rng.standard_normal(M)
    X[:, lm.SIGMA] *= np.exp(0.1 * rng.standard_normal(M))
    X[:, lm.G_COOL] *= np.exp(0.1 * rng.standard_normal(M))
    return WeightedEnsemble.uniform(X)

