import numpy as np
import pytest

from ofspi import oracle
from ofspi.config import demo_config
from ofspi.excitation import build_regression, collect
from ofspi.learner import run_spi
from ofspi.plant import POWER_SYSTEM, IOPlant
from ofspi.reconstruction import FilterBank


@pytest.fixture(scope="session")
def power():
    return POWER_SYSTEM


@pytest.fixture(scope="session")
def demo_fb():
    return FilterBank.from_roots([-0.1, -0.2, -0.3], 1, 1)


@pytest.fixture(scope="session")
def mbar(power, demo_fb):
    return oracle.construct_mbar(power, demo_fb)


def _experiment(x0, delta=0.7):
    cfg = demo_config()
    cfg.delta = delta
    sys = cfg.system()
    fb = FilterBank(cfg.M_r(sys.n), sys.m, sys.p)
    k0 = cfg.start(sys.n)
    log = collect(IOPlant(sys, x0), fb, cfg.excitation_spec(sys.m, fb.n_r), k0, k0 + cfg.samples)
    reg = build_regression(log)
    return cfg, log, reg


@pytest.fixture(scope="session")
def demo_data():
    """Demo collection from x(0) = [5, 5, 5]."""
    return _experiment([5.0, 5.0, 5.0])


@pytest.fixture(scope="session")
def zero_ic_data():
    return _experiment(None)


@pytest.fixture(scope="session")
def demo_run(demo_data):
    cfg, log, reg = demo_data
    return run_spi(cfg.spi_config(1, 1), log, reg)


@pytest.fixture(scope="session")
def delta_runs():
    out = {}
    for delta in (0.1, 0.4, 0.7, 0.9):
        cfg, log, reg = _experiment([5.0, 5.0, 5.0], delta)
        out[delta] = run_spi(cfg.spi_config(1, 1), log, reg)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
