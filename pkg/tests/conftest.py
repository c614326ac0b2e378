import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
unit = st.floats(0.0, 1.0)
alpha = st.floats(1e-4, 1.0, exclude_min=False)


def grids(shape=st.sampled_from([(1,), (3,), (2, 3), (2, 2, 2)])):
    return shape.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def grid_pairs():
    return st.sampled_from([(3,), (2, 3)]).flatmap(
        lambda s: st.tuples(arrays(np.float64, s, elements=finite), arrays(np.float64, s, elements=finite)))


@pytest.fixture
def tmp(tmp_path):
    return tmp_path


CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary prints them all."""
    def record(number: int, passed: bool, detail: str) -> bool:
        CRITERIA.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        print(CRITERIA[-1])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
