import warnings

import pytest

from mchwave.wave_profile import construct_profile, validate_parameters

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return validate_parameters(1.0, 0.4)


@pytest.fixture(scope="session")
def profile(params):
    """Default-resolution profile at (1, 0.4): dx = 0.01, L = max(30, 30/kappa)."""
    return construct_profile(params)


@pytest.fixture(scope="session")
def profile_fine(params):
    return construct_profile(params, dx=0.005, L=40.0)


@pytest.fixture(scope="session")
def profile_40(params):
    return construct_profile(params, dx=0.01, L=40.0)


@pytest.fixture(scope="session")
def wave(params):
    from mchwave.evolution import wrapped_wave
    return wrapped_wave(params)


@pytest.fixture
def no_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
