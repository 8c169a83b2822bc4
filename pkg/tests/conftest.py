import numpy as np
import pytest

from fairguard.metrics import Dataset


@pytest.fixture
def four():
    # groups [1,1,2,2], labels [1,0,0,1]
    return Dataset(np.zeros((4, 1)), [1, 0, 0, 1], [1, 1, 2, 2], 2)


@pytest.fixture
def preds4():
    return np.array([1, 0, 1, 1])


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
