import pytest
from hypothesis import HealthCheck, settings

from hetnet.scenario import Scenario

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def default_scenario():
    return Scenario()


@pytest.fixture
def acceptance():
    """Record one verdict per acceptance criterion; printed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title} :: {detail}")
