import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def gauss():
    from swarmseek.field import SignalField

    return SignalField("gaussian", amplitude=1.0, scale=10.0)


@pytest.fixture
def cross():
    return np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@pytest.fixture
def acceptance_log(request):
    """Print a criterion line and keep it for the end-of-run summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def log(line):
        lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
