import numpy as np
import pytest

from p2lab.assembly import WeightField, assemble
from p2lab.linear_spectrum import compute_nu1
from p2lab.mesh import build_interval_mesh


@pytest.fixture(scope="session")
def a_one():
    return WeightField.constant(1.0, "domain")


@pytest.fixture(scope="session")
def a_zero():
    return WeightField.constant(0.0, "domain")


@pytest.fixture(scope="session")
def b_one():
    return WeightField.constant(1.0, "boundary")


@pytest.fixture(scope="session")
def b_zero():
    return WeightField.constant(0.0, "boundary")


@pytest.fixture(scope="session")
def interval64():
    return build_interval_mesh(64, 1.0)


@pytest.fixture(scope="session")
def neumann_p3(interval64, a_one, b_zero):
    """Interval problem with the domain weight only, p = 3."""
    return assemble(interval64, a_one, b_zero, 3.0)


@pytest.fixture(scope="session")
def neumann_p15(interval64, a_one, b_zero):
    return assemble(interval64, a_one, b_zero, 1.5)


@pytest.fixture(scope="session")
def neumann_p3_threshold(neumann_p3):
    return compute_nu1(neumann_p3)


@pytest.fixture(scope="session")
def neumann_p15_threshold(neumann_p15):
    return compute_nu1(neumann_p15)


@pytest.fixture()
def rng():
    return np.random.default_rng(991)
