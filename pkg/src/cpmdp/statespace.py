"""Composite grid states and their flat row-major identifiers.

A grid of shape ``(n_1, ..., n_D)`` has ``prod(n_k)`` states.  States are
addressed by a flat integer id everywhere except at construction and display
boundaries, where the per-axis coordinate tuple is used.  The last axis varies
fastest.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Sequence

import numpy as np

# Largest state count addressable with the int64 index arrays used downstream.
MAX_STATES = np.iinfo(np.int64).max


class SizingError(ValueError):
    """A grid, model or dense matrix is too large to represent."""


class GridShape(tuple):
    """Immutable tuple of per-axis sizes."""

    def __new__(cls, dims: Sequence[int]):
        dims = tuple(int(d) for d in dims)
        if len(dims) == 0:
            raise ValueError("a grid needs at least one dimension")
        if any(d < 1 for d in dims):
            raise ValueError(f"dimension sizes must be >= 1, got {dims}")
        return super().__new__(cls, dims)

    @property
    def ndim(self) -> int:
        return len(self)

    @property
    def strides(self) -> tuple[int, ...]:
        out = [1] * len(self)
        for k in range(len(self) - 2, -1, -1):
            out[k] = out[k + 1] * self[k + 1]
        return tuple(out)

    def __repr__(self):
        return f"GridShape({list(self)})"


def as_shape(dims) -> GridShape:
    return dims if isinstance(dims, GridShape) else GridShape(dims)


def num_states(shape) -> int:
    shape = as_shape(shape)
    n = math.prod(shape)
    if n > MAX_STATES:
        raise SizingError(f"grid {list(shape)} has {n} states, more than {MAX_STATES}")
    return n


def _check_coords(coords, shape: GridShape) -> tuple[int, ...]:
    coords = tuple(int(c) for c in coords)
    if len(coords) != len(shape):
        raise IndexError(f"expected {len(shape)} coordinates, got {len(coords)}")
    for k, (c, n) in enumerate(zip(coords, shape)):
        if not 0 <= c < n:
            raise IndexError(f"coordinate {c} out of range [0, {n}) on axis {k}")
    return coords


def linear_index(coords: Sequence[int], shape) -> int:
    """Row-major flat id of ``coords``."""
    shape = as_shape(shape)
    coords = _check_coords(coords, shape)
    index = 0
    for c, n in zip(coords, shape):
        index = index * n + c
    return index


def multi_index(state: int, shape) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    shape = as_shape(shape)
    state = int(state)
    total = num_states(shape)
    if not 0 <= state < total:
        raise IndexError(f"state {state} out of range [0, {total})")
    coords = []
    for n in reversed(shape):
        state, c = divmod(state, n)
        coords.append(c)
    return tuple(reversed(coords))


def step(coords: Sequence[int], axis: int, direction: int, shape) -> tuple[tuple[int, ...], bool]:
    """Unit move along ``axis``; off-grid moves leave ``coords`` unchanged."""
    shape = as_shape(shape)
    coords = _check_coords(coords, shape)
    if not 0 <= axis < len(shape):
        raise IndexError(f"axis {axis} out of range for a {len(shape)}-d grid")
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction}")
    target = coords[axis] + direction
    if not 0 <= target < shape[axis]:
        return coords, False
    moved = list(coords)
    moved[axis] = target
    return tuple(moved), True


def iter_states(shape) -> Iterator[tuple[int, ...]]:
    """All coordinate tuples in flat-id order."""
    return itertools.product(*(range(n) for n in as_shape(shape)))


def coordinate_table(shape) -> np.ndarray:
    """``(S, D)`` array whose row ``s`` holds the coordinates of state ``s``."""
    shape = as_shape(shape)
    grids = np.indices(shape, dtype=np.int64)
    return grids.reshape(len(shape), -1).T.copy()


def index_dtype(n: int) -> np.dtype:
    """Smallest unsigned integer dtype that can hold values in ``[0, n)``."""
    for dt in (np.uint8, np.uint16, np.uint32, np.uint64):
        if n - 1 <= np.iinfo(dt).max:
            return np.dtype(dt)
    raise SizingError(f"no integer type covers {n} values")
