import warnings

import pytest

# lines recorded by the acceptance tests, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.acceptance_lines = ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_endpoint_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="d = 1 is the closed endpoint")
        yield
