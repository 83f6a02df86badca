import pytest

from loadpf import synth


@pytest.fixture(scope="session")
def small_run():
    return synth.generate(n_days=100, instants=(0, 24), seed=3)
