import pytest

from ghostspec.oracles import example_problem


@pytest.fixture(scope="session")
def examples():
    return {e: example_problem(e) for e in ("exa1", "exa2", "exa3", "exa4")}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
