import pytest

from qtrunc.system import builtin_oscillator, builtin_rotor

# acceptance outcomes, printed once at the end of the session
ACCEPTANCE = {}


@pytest.fixture
def rotor():
    return builtin_rotor()


@pytest.fixture
def oscillator():
    return builtin_oscillator()


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
