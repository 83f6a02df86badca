import pytest

from loadpf import config
from loadpf.errors import ValidationError


def test_defaults_are_the_reference_constants():
    cfg = config.RunConfig()
    assert (cfg.particles, cfg.resample_threshold, cfg.critical_threshold) == (100_000, 0.5, 0.001)
    assert (cfg.n0, cfg.ci_level, cfg.tau_max) == (365, 0.9, 5)


def test_file_then_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nparticles = 500\ntau_max = 3  # trailing\ninstants = 0, 24\nbandwidth = none\n")
    cfg = config.load(p, {"particles": "300", "tau_max": None})
    assert cfg.particles == 300 and cfg.tau_max == 3 and cfg.instants == (0, 24) and cfg.bandwidth is None


def test_dump_round_trips(tmp_path):
    cfg = config.RunConfig(particles=1234, instants=(1, 2), detect_outliers=False, bandwidth=0.3)
    p = tmp_path / "c.cfg"
    p.write_text(config.dump(cfg))
    assert config.load(p) == cfg


@pytest.mark.parametrize("pairs", [{"particles": "many"}, {"nope": "1"}, {"ci_level": "1.5"},
                                   {"critical_threshold": "0.6"}, {"init_method": "magic"},
                                   {"detect_outliers": "perhaps"}, {"n0": "10"}])
def test_invalid_values(pairs):
    with pytest.raises(ValidationError):
        config.load(None, pairs)


def test_malformed_line(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("particles 5\n")
    with pytest.raises(ValidationError):
        config.load(p)


def test_filter_and_mcmc_views():
    cfg = config.RunConfig(resample_method="multinomial", kernel_shrink=False, mcmc_chains=3)
    fc = cfg.filter_config()
    assert fc.resample_method.name == "MULTINOMIAL" and fc.shrink is False
    assert cfg.mcmc_config().chains == 3
