import numpy as np
import pytest

from cavityghz import model


@pytest.fixture(scope="session")
def params3():
    return model.SystemParams()


@pytest.fixture(scope="session")
def space3(params3):
    return model.build_space(params3)


@pytest.fixture(scope="session")
def open_space3(params3):
    return model.build_space(params3, open_system=True)


@pytest.fixture(scope="session")
def params5():
    return model.SystemParams(n_atoms=5)


@pytest.fixture(scope="session")
def space5(params5):
    return model.build_space(params5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
