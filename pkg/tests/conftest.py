import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roadharvest import Platoon, Poisson, build_scenario

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def base():
    return build_scenario()


@pytest.fixture
def platoon50():
    return build_scenario(traffic=Platoon(50.0))


@pytest.fixture
def poisson50():
    return build_scenario(traffic=Poisson(1 / 50))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
