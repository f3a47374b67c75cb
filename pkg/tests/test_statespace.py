import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpmdp.statespace import (
    GridShape,
    SizingError,
    coordinate_table,
    index_dtype,
    iter_states,
    linear_index,
    multi_index,
    num_states,
    step,
)


def enumerate_position(coords, dims):
    """Oracle: position of ``coords`` in the lexicographic listing of all cells."""
    for pos, c in enumerate(itertools.product(*(range(n) for n in dims))):
        if c == tuple(coords):
            return pos
    raise AssertionError("not found")


@pytest.mark.parametrize("dims, expected", [([70, 70], 4_900), ([1], 1), ([20, 20, 20], 8_000)])
def test_num_states(dims, expected):
    assert num_states(dims) == expected


def test_num_states_overflow():
    with pytest.raises(SizingError):
        num_states([2**40, 2**40])


@pytest.mark.parametrize("dims", [[], [0, 3], [3, -1]])
def test_invalid_shapes(dims):
    with pytest.raises(ValueError):
        GridShape(dims)


@pytest.mark.parametrize("coords, expected", [([0, 0], 0), ([2, 3], 11), ([1, 2], 6)])
def test_linear_index(coords, expected):
    assert linear_index(coords, [3, 4]) == expected
    assert enumerate_position(coords, [3, 4]) == expected


@pytest.mark.parametrize("state, expected", [(0, (0, 0)), (11, (2, 3)), (6, (1, 2))])
def test_multi_index(state, expected):
    assert multi_index(state, [3, 4]) == expected


@pytest.mark.parametrize("coords", [[3, 0], [0, 4], [-1, 0], [0]])
def test_linear_index_bounds(coords):
    with pytest.raises(IndexError):
        linear_index(coords, [3, 4])


@pytest.mark.parametrize("state", [-1, 12])
def test_multi_index_bounds(state):
    with pytest.raises(IndexError):
        multi_index(state, [3, 4])


@pytest.mark.parametrize(
    "coords, axis, direction, expected",
    [
        ([0, 0], 0, -1, ((0, 0), False)),
        ([1, 2], 1, 1, ((1, 3), True)),
        ([2, 3], 1, 1, ((2, 3), False)),
    ],
)
def test_step(coords, axis, direction, expected):
    assert step(coords, axis, direction, [3, 4]) == expected


def test_step_bad_axis():
    with pytest.raises(IndexError):
        step([0, 0], 2, 1, [3, 4])


@pytest.mark.parametrize("dims", [[1], [7], [3, 4], [2, 3, 4], [2, 2, 2, 2, 3]])
def test_round_trip_exhaustive(dims):
    listed = list(iter_states(dims))
    assert len(listed) == num_states(dims)
    for s, coords in enumerate(listed):
        assert multi_index(s, dims) == coords
        assert linear_index(coords, dims) == s
    assert coordinate_table(dims).tolist() == [list(c) for c in listed]


def test_round_trip_large_grid():
    dims = [100, 100, 10]
    table = coordinate_table(dims)
    for s in range(0, num_states(dims), 997):
        assert linear_index(table[s], dims) == s


shapes = st.lists(st.integers(1, 6), min_size=1, max_size=5)


@given(shapes, st.data())
def test_round_trip_property(dims, data):
    s = data.draw(st.integers(0, num_states(dims) - 1))
    assert linear_index(multi_index(s, dims), dims) == s


@given(shapes, st.data())
def test_ordering_is_lexicographic(dims, data):
    n = num_states(dims)
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1))
    assert (multi_index(a, dims) < multi_index(b, dims)) == (a < b)


@given(shapes, st.data())
def test_step_changes_at_most_one_coordinate(dims, data):
    coords = tuple(data.draw(st.integers(0, n - 1)) for n in dims)
    axis = data.draw(st.integers(0, len(dims) - 1))
    direction = data.draw(st.sampled_from([-1, 1]))
    moved, ok = step(coords, axis, direction, dims)
    diff = [abs(x - y) for x, y in zip(coords, moved)]
    assert sum(diff) == (1 if ok else 0)
    assert max(diff) <= 1


def test_index_dtype():
    assert index_dtype(1).itemsize == 1
    assert index_dtype(256).itemsize == 1
    assert index_dtype(257).itemsize == 2
    assert index_dtype(70_000).itemsize == 4
