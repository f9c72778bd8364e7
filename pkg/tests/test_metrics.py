import numpy as np
import pytest
from hypothesis import given, strategies as st

from cenntrack.metrics import auc, overlap, success_curve

coord = st.integers(-20, 20)
side = st.integers(1, 15)
boxes = st.tuples(coord, coord, side, side)


@given(boxes, boxes)
def test_overlap_symmetric_and_bounded(a, b):
    s = overlap(a, b)
    assert s == overlap(b, a) and 0.0 <= s <= 1.0


@given(boxes)
def test_overlap_identity(a):
    assert overlap(a, a) == 1.0


def test_overlap_third():
    # two 2x1 boxes sharing one cell: 1 / (2 + 2 - 1)
    assert overlap((0, 0, 2, 1), (1, 0, 2, 1)) == 1 / 3


def test_overlap_disjoint_and_invalid():
    assert overlap((0, 0, 2, 2), (5, 5, 2, 2)) == 0.0
    with pytest.raises(ValueError):
        overlap((0, 0, 0, 1), (0, 0, 1, 1))


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_success_curve_monotone(s):
    c = success_curve(s)
    assert len(c.thresholds) == 101 and c.success_rate[0] == 1.0
    assert np.all(np.diff(c.success_rate) <= 0)
    assert 0.0 <= auc(c) <= 1.0


def test_perfect_tracker():
    c = success_curve([1.0] * 17)
    assert np.all(c.success_rate == 1.0) and auc(c) == 1.0


def test_failed_tracker():
    c = success_curve([0.0] * 5)
    assert auc(c) == pytest.approx(0.005, abs=1e-15)


def test_half_overlaps():
    c = success_curve([0.5, 0.5])
    assert c.success_rate[50] == 1.0 and c.success_rate[51] == 0.0
    assert auc(c) == pytest.approx(0.505, abs=1e-15)


def test_mixed_rate():
    c = success_curve([0.2, 0.5, 0.7, 1.0])
    assert c.success_rate[50] == 0.75


def test_curve_csv():
    text = success_curve([1.0]).to_csv()
    lines = text.splitlines()
    assert lines[0] == "threshold,success_rate" and len(lines) == 102
    assert lines[8] == "0.07,1.000000"


def test_empty_overlaps():
    with pytest.raises(ValueError):
        success_curve([])
