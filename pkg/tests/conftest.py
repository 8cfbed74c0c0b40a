
import numpy as np
import pytest

from dceprobe.dynamics import DriveProfile, PropagatorConfig, generate_dce_field

ACCEPTANCE_LINES = []

ONE_MCS = 1000.0  # omega0_per_mcs with omega0 = 1


@pytest.fixture(scope="session")
def dce_field():
    """Cavity field after 1 mcs of resonant modulation with the default parameters."""
    return generate_dce_field(ONE_MCS, DriveProfile(), PropagatorConfig(), dim=40)


@pytest.fixture(scope="session")
def dce_state(dce_field):
    return dce_field.state


@pytest.fixture
def rng():
    return np.random.default_rng(20151016)


def random_pure_state(rng, dim, n_levels=None):
    n_levels = n_levels or dim
    psi = np.zeros(dim, dtype=complex)
    psi[:n_levels] = rng.normal(size=n_levels) + 1j * rng.normal(size=n_levels)
    return psi / np.linalg.norm(psi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
