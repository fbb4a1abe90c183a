from __future__ import annotations

import numpy as np
import pytest

from diffthrust.airframe import golden_plant
from diffthrust.config import load_config
from diffthrust.synthesis import loop_shaping_design


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def plant():
    return golden_plant()


@pytest.fixture(scope="session")
def design(plant):
    return loop_shaping_design(plant)


@pytest.fixture(scope="session")
def mapping(cfg):
    return cfg.mapping


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
