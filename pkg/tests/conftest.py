import re

import numpy as np
import pytest

from lrw.model import ProbRow, WalkSpec, validate

_AC_RESULTS: dict[int, tuple[str, str]] = {}
_AC_NAME = re.compile(r"test_ac(\d+)_(\w+)")


def random_row(rng: np.random.Generator, L: int, min_drift: float = 0.05) -> ProbRow:
    """A row with tail drift above ``min_drift`` (rejection sampled)."""
    while True:
        w = rng.dirichlet(np.ones(L + 1))
        row = ProbRow(float(w[0]), tuple(float(x) for x in w[1:]))
        if row.drift > min_drift and row.p > 0.05:
            return row


def random_model(rng: np.random.Generator, L: int, K: int = 5, min_drift: float = 0.05):
    tail = random_row(rng, L, min_drift)
    rows = []
    for _ in range(K):
        w = rng.dirichlet(np.ones(L + 1))
        w[0] = max(w[0], 0.05)
        w /= w.sum()
        rows.append(ProbRow(float(w[0]), tuple(float(x) for x in w[1:])))
    return validate(WalkSpec(L=L, rows=rows, tail=tail))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    m = _AC_NAME.search(report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _AC_RESULTS[k] = ("PASS" if report.outcome == "passed" else "FAIL", m.group(2))


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_AC_RESULTS):
        status, name = _AC_RESULTS[k]
        terminalreporter.write_line(f"AC{k:<2} {status}  {name.replace('_', ' ')}")
