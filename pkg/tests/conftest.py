import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aniso_levels.potential import PotentialField, spec_from_dict

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def harmonic(omega, **extra):
    return spec_from_dict({"dimension": len(omega), "family": "anisotropic_harmonic",
                           "parameters": {"omega": list(omega)}, **extra})


def gaussian(wells, dimension=3, **extra):
    return spec_from_dict({"dimension": dimension, "family": "gaussian_well_sum",
                           "parameters": {"wells": wells}, **extra})


@pytest.fixture(scope="session")
def ho112_field():
    return PotentialField(harmonic((1.0, 1.0, 2.0)), table_r_max=30.0, table_points=6001)


@pytest.fixture(scope="session")
def ho_iso_field():
    return PotentialField(harmonic((1.0, 1.0, 1.0)), table_r_max=30.0, table_points=6001)


@pytest.fixture(scope="session")
def ho12_field():
    return PotentialField(harmonic((1.0, 2.0)), table_r_max=20.0, table_points=4001)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
