import numpy as np
import pytest

from fwmpairs.dispersion import FibreSpec
from fwmpairs.phasematch import PumpPulse, solve_phase_matching


@pytest.fixture(scope="session")
def fibre():
    return FibreSpec()


@pytest.fixture(scope="session")
def pump():
    return PumpPulse(wavelength=708.4e-9, average_power=0.96e-3)


@pytest.fixture(scope="session")
def solution(fibre, pump):
    return solve_phase_matching(fibre, pump)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
