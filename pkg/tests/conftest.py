import numpy as np
import pytest

from ncorbifold.algebra import ActionGroupoid
from ncorbifold.geometry import DiscreteOrbifold, refine_circle
from ncorbifold.groups import cycle_reflection, cycle_rotation


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def c6():
    return refine_circle(6, 6.0)


@pytest.fixture
def refl_orb(c6):
    return DiscreteOrbifold(c6, cycle_reflection(6))


@pytest.fixture
def rot_orb(c6):
    return DiscreteOrbifold(c6, cycle_rotation(6, 2))


@pytest.fixture
def refl_gpd():
    return ActionGroupoid(cycle_reflection(6))
