import math
import sys

import pytest
from hypothesis import HealthCheck, settings

from confsphere.sphere import product_sphere_sampling, qmc_sphere_sampling

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

OMEGA3 = 2 * math.pi ** 2

@pytest.fixture(scope="session")
def product3():
    return product_sphere_sampling(3, 64, rotation_seed=0)


@pytest.fixture(scope="session")
def product3_coarse():
    return product_sphere_sampling(3, 32, rotation_seed=0)


@pytest.fixture(scope="session")
def qmc3():
    return qmc_sphere_sampling(3, 1 << 15, seed=7)


def pytest_terminal_summary(terminalreporter):
    # lines recorded by test_acceptance.py, one per criterion
    mod = next((m for name, m in list(sys.modules.items())
                if name.rsplit(".", 1)[-1] == "test_acceptance"), None)
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
