import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qdsqueeze.phonons import bath_model
from qdsqueeze.units import PhononBathParams

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def bath():
    return PhononBathParams()


@pytest.fixture(scope="session")
def model4(bath):
    return bath_model(bath, 4.0)


@pytest.fixture(scope="session")
def model10(bath):
    return bath_model(bath, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
