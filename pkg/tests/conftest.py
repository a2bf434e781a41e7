from fractions import Fraction

import numpy as np
import pytest

CRITERIA: dict = {}


def basis(i, exact=True):
    if exact:
        return np.array([Fraction(int(j == i)) for j in range(1, 8)], dtype=object)
    return np.eye(7)[i - 1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, title, detail = CRITERIA[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
