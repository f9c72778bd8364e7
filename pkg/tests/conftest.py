import numpy as np
import pytest

from cenntrack.core import CellGrid, gray_to_cell
from cenntrack.synthetic import SyntheticSpec, generate
from cenntrack.trainer import train

# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def square_sequence():
    frames, boxes = generate(SyntheticSpec(n_frames=12))
    return [gray_to_cell(f) for f in frames], boxes


@pytest.fixture(scope="session")
def square_model(square_sequence):
    cells, boxes = square_sequence
    return train(CellGrid(cells[0]), boxes[0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
