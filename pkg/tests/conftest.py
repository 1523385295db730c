import numpy as np
import pytest
from hypothesis import strategies as st

_acceptance: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance.append((name, report.outcome.upper(), ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, _ in _acceptance:
        mark = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pmf_vectors(min_size=2, max_size=8, allow_zero=True):
    """Hypothesis strategy for normalised probability vectors."""
    lo = 0.0 if allow_zero else 1e-3
    return (
        st.lists(st.floats(lo, 1.0, allow_nan=False), min_size=min_size, max_size=max_size)
        .filter(lambda xs: sum(xs) > 1e-6)
        .map(lambda xs: np.array(xs) / sum(xs))
    )


def joint_arrays(allow_zero=True):
    return pmf_vectors(4, 4, allow_zero).map(lambda v: v.reshape(2, 2))
