import pytest
from hypothesis import HealthCheck, settings

from balancelab.field import CANTOR_INVERSE, CANTOR_PARAM, CUBIC_ROOT, NON_DIFF, build_field

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cantor_param_field():
    return build_field(CANTOR_PARAM, 3)


@pytest.fixture(scope="session")
def nondiff_field():
    return build_field(NON_DIFF, 4)


@pytest.fixture(scope="session")
def cantor_inverse_field():
    return build_field(CANTOR_INVERSE)


@pytest.fixture(scope="session")
def cubic_field():
    return build_field(CUBIC_ROOT)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
