import re

import numpy as np
import pytest

from mrcner.spans import TagSet


@pytest.fixture
def tags():
    return TagSet.from_names(["PER", "ORG", "LOC"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance report ------------------------------------------------------------

_acceptance: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance result; the terminal summary prints one line per criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        _acceptance[number] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    ran = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m:
                ran[int(m.group(1))] = key
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ran):
        passed, detail = _acceptance.get(k, (False, f"{ran[k]} before reporting a result"))
        terminalreporter.write_line(f"{'PASS' if passed and ran[k] == 'passed' else 'FAIL'} criterion {k}: {detail}")
