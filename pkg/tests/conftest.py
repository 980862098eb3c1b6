import math

import pytest
from hypothesis import HealthCheck, settings

from mirrorqed.params import DimensionlessSpec, build_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LOW_Z = 1 / math.sqrt(2)

# filled by test_acceptance; printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def node_params(gamma0_t: float, order: int = 5, imp_ratio: float = LOW_Z):
    """Circuit at node ``order`` with the capacitance ratio solved for ``gamma0_t``."""
    return build_params(DimensionlessSpec(1.0, None, imp_ratio, roundtrips=order, gamma0_t=gamma0_t))


def ratio_params(r: float, z: float, roundtrips: float | None = None):
    return build_params(DimensionlessSpec(1.0, r, z, roundtrips=roundtrips))


@pytest.fixture
def low_z_node():
    return node_params(0.2 * math.pi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
