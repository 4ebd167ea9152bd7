import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quiver_adhm.diagram import build_affine_diagram

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def a1():
    return build_affine_diagram("A", 1)


@pytest.fixture(scope="session")
def a2():
    return build_affine_diagram("A", 2)


@pytest.fixture(scope="session")
def d4():
    return build_affine_diagram("D", 4)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
