import numpy as np
import pytest

from pdmd.benchmarks import ToySpec, generate_toy
from pdmd.snapshots import ParametricSnapshotSet, TimeAxis


@pytest.fixture(scope="session")
def toy_spec():
    return ToySpec()


@pytest.fixture(scope="session")
def toy_set(toy_spec):
    return generate_toy(toy_spec)


@pytest.fixture
def small_set():
    rng = np.random.default_rng(7)
    axis = TimeAxis(0.0, 0.5, 6, label_origin=1)
    mats = [rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6)) for _ in range(3)]
    return ParametricSnapshotSet.from_arrays(axis, [(0.1,), (0.2,), (0.3,)], mats, "small")


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one summary line per acceptance criterion."""
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
