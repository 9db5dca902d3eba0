# pylint: disable=redefined-outer-name
"""Global fixtures for wsnloc tests."""

import logging

import numpy as np
import pytest

from wsnloc.channel import ChannelParams, ObservationModel
from wsnloc.mds_core import Scenario
from wsnloc.utils.logger import _LOGGER

from . import uniform_scenario


@pytest.fixture(autouse=True)
def package_logging():
    """Let caplog see the package logger even after the CLI detached it."""
    propagate = _LOGGER.propagate
    handlers = list(_LOGGER.handlers)
    _LOGGER.propagate = True
    _LOGGER.setLevel(logging.DEBUG)
    yield
    _LOGGER.propagate = propagate
    _LOGGER.handlers[:] = handlers


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def noiseless() -> ChannelParams:
    """Channel without shadowing."""
    return ChannelParams(pl0=-61.71, eta=2.44, sigma2=0.0, t_samples=1)


@pytest.fixture
def testbed() -> ChannelParams:
    """Channel with the testbed constants."""
    return ChannelParams(pl0=-61.71, eta=2.44, sigma2=28.16, t_samples=1)


@pytest.fixture
def triangle() -> Scenario:
    """Equilateral triangle with unit sides."""
    return Scenario(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]]))


@pytest.fixture
def scenario20() -> Scenario:
    """Random 20-node scenario in a 5 × 9 m room."""
    return uniform_scenario(20, seed=7)


@pytest.fixture
def full_observation(scenario20) -> ObservationModel:
    """Every link observed at every tick."""
    return ObservationModel.uniform(scenario20.n, 1.0)
