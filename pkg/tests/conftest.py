import pytest

from delipy.geometry import SegmentLike


def collinear_segments(count, gap=0.5, length=1.0):
    "Unit segments on the x axis, `gap` apart."
    step = length + gap
    return [SegmentLike.segment((step * i, 0.0), (step * i + length, 0.0)) for i in range(count)]


@pytest.fixture
def unit_segment():
    return SegmentLike.segment((0.0, 0.0), (1.0, 0.0))


@pytest.fixture
def collinear_triple():
    return collinear_segments(3)


@pytest.fixture
def chain_of_ten():
    return collinear_segments(10)
