import warnings

import pytest
from hypothesis import settings

from wkam.action import VelocityCapWarning

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_cap_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VelocityCapWarning)
        yield


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Criterion lines collected by the acceptance tests, echoed in the terminal summary."""
    lines = []
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
