import pytest

from hemoswarm.circuit import build_circuit, load_dataset
from hemoswarm.params import PhysiologyParams


@pytest.fixture(scope="session")
def phys():
    return PhysiologyParams()


@pytest.fixture(scope="session")
def dataset():
    return load_dataset()


@pytest.fixture(scope="session")
def circuit(dataset, phys):
    return build_circuit(dataset, phys)
