import numpy as np
import pytest

from filippov3d import models
from filippov3d.integrate import EventIntegratorConfig, ReturnMapHandle


@pytest.fixture(scope="session")
def cfg():
    return EventIntegratorConfig()


@pytest.fixture(scope="session")
def z1():
    return models.model_system("Z1")


@pytest.fixture(scope="session")
def z2():
    return models.model_system("Z2")


@pytest.fixture(scope="session")
def h1(z1, cfg):
    return ReturnMapHandle(z1, order="upper_first", cfg=cfg,
                           check_crossing=False)


@pytest.fixture(scope="session")
def h2(z2, cfg):
    return ReturnMapHandle(z2, order="upper_first", cfg=cfg,
                           check_crossing=False)


@pytest.fixture(scope="session")
def rep1(z1, h1, cfg):
    from filippov3d.tsing import analyze_t_singularity
    return analyze_t_singularity(z1, np.zeros(3), h1, cfg)


@pytest.fixture(scope="session")
def rep2(z2, h2, cfg):
    from filippov3d.tsing import analyze_t_singularity
    return analyze_t_singularity(z2, np.array([2.0, 2.0, 0.0]), h2, cfg)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
