import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pairtrap import ramps

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cal():
    return ramps.reference_calibration()


@pytest.fixture(scope="session")
def ref_pulse_profile(cal):
    return ramps.build_pulse(ramps.reference_pulse(), cal)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
