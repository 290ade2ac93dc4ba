import numpy as np
import pytest

from dtactive.control import Gains
from dtactive.harness import HarnessConfig
from dtactive.shapes import build_object_library, get_object
from dtactive.world import WorldConfig


@pytest.fixture
def world_cfg():
    """Noise-free quarter-scale world for identity tests."""
    return WorldConfig(noise_sigma=0.0)


@pytest.fixture
def gains():
    return Gains()


@pytest.fixture
def library():
    return build_object_library()


@pytest.fixture
def circle_a1():
    return get_object("A1")


@pytest.fixture
def circle_a3():
    return get_object("A3")


@pytest.fixture
def square_b1():
    return get_object("B1")
