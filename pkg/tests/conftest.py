import pytest

from solitonlab.soliton_identities import curvature_fields
from solitonlab.warped_soliton import integrate_profile, tip_series


@pytest.fixture(scope="session")
def expansion():
    return tip_series()


@pytest.fixture(scope="session")
def profile(expansion):
    return integrate_profile(expansion, tolerance=1e-10)


@pytest.fixture(scope="session")
def report(profile):
    return curvature_fields(profile)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
