import math

import numpy as np
import pytest
from hypothesis import settings

from slipnav.geo import Euler, GeoPosition, euler_to_dcm
from slipnav.mechanization import NavState

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def nav_state():
    """A generic moving, tilted state away from the equator."""
    C = euler_to_dcm(Euler(0.1, -0.2, 0.7))
    return NavState(C, np.array([3.0, -2.0, 0.5]), GeoPosition(0.6, 0.3, 200.0), 0.0)


@pytest.fixture
def level_nav():
    return NavState(np.eye(3), np.zeros(3), GeoPosition(math.radians(39.74), math.radians(-79.9), 300.0), 0.0)
