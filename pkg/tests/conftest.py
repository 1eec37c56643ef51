import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest

from bnensemble.dataset import Dataset

# One line per acceptance criterion, printed after the run (uncaptured).
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def chain_data():
    """n = 10000 samples of the chain A -> B -> C with strong coefficients."""
    rng = np.random.default_rng(101)
    n = 10_000
    a = rng.normal(size=n)
    b = 1.5 * a + rng.normal(scale=0.5, size=n)
    c = -1.2 * b + rng.normal(scale=0.5, size=n)
    return Dataset(("A", "B", "C"), np.column_stack([a, b, c]))


@pytest.fixture
def collider_data():
    """n = 10000 samples of the collider A -> C <- B."""
    rng = np.random.default_rng(202)
    n = 10_000
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    c = a + b + rng.normal(scale=0.5, size=n)
    return Dataset(("A", "B", "C"), np.column_stack([a, b, c]))
