import pytest

from fairsched.corpus import named
from fairsched.sched import run

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE: dict = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def example1():
    return named("example1")


@pytest.fixture(scope="session")
def example8():
    return named("example8")


@pytest.fixture(scope="session")
def example1_run(example1):
    return run(example1, 500)


@pytest.fixture(scope="session")
def example8_run(example8):
    return run(example8, 10_000)
