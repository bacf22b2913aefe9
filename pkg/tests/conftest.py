import itertools

import numpy as np
import pytest

from orthoselmer.quadspace import build_standard_split, isometry_check


def brute_isometries(m, n):
    """All isometries of the standard split form by scanning every matrix."""
    sp = build_standard_split(m, n)
    k = 2 * m
    out = []
    for entries in itertools.product(range(n), repeat=k * k):
        g = np.array(entries, dtype=np.int64).reshape(k, k)
        if isometry_check(sp, g):
            out.append(g)
    return out


@pytest.fixture(scope="session")
def o2_mod3():
    return brute_isometries(1, 3)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
