import pytest
from hypothesis import HealthCheck, settings

from gridledger.fixtures import load_fixture
from gridledger.opf import solve_dcopf

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def three_bus():
    return load_fixture("three_bus")


@pytest.fixture(scope="session")
def three_bus_solution(three_bus):
    return solve_dcopf(three_bus)


@pytest.fixture(scope="session")
def responsiveness_before():
    return load_fixture("responsiveness_before")


@pytest.fixture(scope="session")
def responsiveness_after():
    return load_fixture("responsiveness_after")


@pytest.fixture(scope="session")
def storage_two_period():
    return load_fixture("storage_two_period")


@pytest.fixture(scope="session")
def single_bus_clean():
    return load_fixture("single_bus_clean")


@pytest.fixture(scope="session")
def synth_ercot20():
    return load_fixture("synth_ercot20")
