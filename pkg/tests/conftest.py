import numpy as np
import pytest

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Record one acceptance line ``criterion N PASS|FAIL title: measured``."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, title, passed, measured):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {measured}"
        store[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
