"""Transition models: sparse tensor components and the dense tabular baseline.

The component model stores, for every action ``a`` and accessible state ``s``,
the triples ``(s, s', P(s'|s,a))`` with positive probability.  Triples live in
flat arrays grouped by row ``a * S + s`` with an offsets array, so a Bellman
backup is a short contiguous dot product per state and action.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import numpy as np

from cpmdp import kernels
from cpmdp.gridworld import GridSpec, action_axis, move_set
from cpmdp.statespace import GridShape, SizingError, coordinate_table, index_dtype

PROB_BYTES = 8
OFFSET_BYTES = 8
DEFAULT_DENSE_CAP = 2 * 1024**3


def dense_cap() -> int:
    """Byte budget for dense transition matrices (``CPMDP_DENSE_CAP`` overrides)."""
    return int(float(os.environ.get("CPMDP_DENSE_CAP", DEFAULT_DENSE_CAP)))


class MultiplyCounter:
    """Thread-safe running count of probability-times-value multiplies."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    def add(self, n: int) -> None:
        with self._lock:
            self._value += int(n)

    @property
    def value(self) -> int:
        return self._value

    def reset(self) -> None:
        with self._lock:
            self._value = 0


@dataclass(frozen=True)
class TensorComponent:
    s: int
    s_next: int
    p: float


class ComponentModel:
    def __init__(self, shape, n_actions, indptr, src, succ, prob, active_states):
        self.shape = GridShape(shape)
        self.n_actions = int(n_actions)
        self.n_states = int(np.prod(self.shape))
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        dt = index_dtype(self.n_states)
        self.src = np.ascontiguousarray(src, dtype=dt)
        self.succ = np.ascontiguousarray(succ, dtype=dt)
        self.prob = np.ascontiguousarray(prob, dtype=np.float64)
        self.active_states = np.ascontiguousarray(active_states, dtype=np.int64)
        self.counter = MultiplyCounter()
        if len(self.indptr) != self.n_actions * self.n_states + 1:
            raise ValueError("offsets array has the wrong length")

    @property
    def n_components(self) -> int:
        return len(self.prob)

    @property
    def index_width(self) -> int:
        return self.succ.dtype.itemsize

    def row(self, state: int, action: int) -> slice:
        r = action * self.n_states + state
        return slice(int(self.indptr[r]), int(self.indptr[r + 1]))

    def components(self, state: int, action: int) -> list[TensorComponent]:
        sl = self.row(state, action)
        return [
            TensorComponent(int(state), int(j), float(p)) for j, p in zip(self.succ[sl], self.prob[sl])
        ]

    def counts(self) -> np.ndarray:
        """``(S, A)`` number of components per state and action."""
        return np.diff(self.indptr).reshape(self.n_actions, self.n_states).T

    def state_counts(self) -> np.ndarray:
        """Components per state summed over actions."""
        return self.counts().sum(axis=1)

    def plan(self, states=None) -> kernels.SweepPlan:
        rows = self.active_states if states is None else states
        return kernels.SweepPlan(
            self.indptr, self.src, self.succ, self.prob, self.n_states, self.n_actions, rows
        )


@dataclass
class RewardModel:
    r: np.ndarray
    terminal_mask: np.ndarray
    obstacle_mask: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.r)):
            raise ValueError("rewards must be finite")
        if np.any(self.terminal_mask & self.obstacle_mask):
            raise ValueError("terminal and obstacle masks overlap")

    @property
    def n_states(self) -> int:
        return len(self.r)

    @property
    def plain_states(self) -> np.ndarray:
        return np.flatnonzero(~(self.terminal_mask | self.obstacle_mask))

    @property
    def terminal_states(self) -> np.ndarray:
        return np.flatnonzero(self.terminal_mask)


@dataclass
class TabularModel:
    P: np.ndarray  # (A, S, S)

    @property
    def n_actions(self) -> int:
        return self.P.shape[0]

    @property
    def n_states(self) -> int:
        return self.P.shape[1]


def _successors(coords, strides, shape, blocked, action):
    """Successor of every state under a single unit move, bouncing off walls and obstacles."""
    n = len(coords)
    base = np.arange(n, dtype=np.int64)
    if action < 0:
        return base
    axis, direction = action_axis(action)
    target = coords[:, axis] + direction
    inside = (target >= 0) & (target < shape[axis])
    out = base.copy()
    out[inside] += direction * strides[axis]
    out[blocked[out]] = base[blocked[out]]
    return out


def build_models(spec: GridSpec) -> tuple[ComponentModel, RewardModel]:
    """Exact component model and reward vector of a gridworld.

    Per ``(s, a)`` the successors and probabilities equal
    :func:`cpmdp.gridworld.transition_distribution`, including how merged
    masses are rounded.
    """
    shape = spec.shape
    n = spec.n_states
    n_actions = spec.n_actions
    obstacles = spec.obstacle_mask()
    terminals = spec.terminal_mask()
    active = np.flatnonzero(~obstacles)
    moving = np.flatnonzero(~obstacles & ~terminals)
    coords = coordinate_table(shape)
    strides = np.array(shape.strides, dtype=np.int64)

    indptr = [np.zeros(1, dtype=np.int64)]
    srcs, succs, probs = [], [], []
    total = 0
    for a in range(n_actions):
        moves = [(b, p) for b, p in move_set(spec, a) if p > 0.0]
        # state-major, move-minor so stable sorting keeps move order within a successor
        src = np.repeat(moving, len(moves))
        nxt = np.stack([_successors(coords, strides, shape, obstacles, b)[moving] for b, _ in moves], axis=1)
        nxt = nxt.reshape(-1)
        p = np.tile(np.array([q for _, q in moves]), len(moving))
        src = np.concatenate([src, np.flatnonzero(terminals)])
        nxt = np.concatenate([nxt, np.flatnonzero(terminals)])
        p = np.concatenate([p, np.ones(int(terminals.sum()))])

        order = np.lexsort((nxt, src))
        src, nxt, p = src[order], nxt[order], p[order]
        new_group = np.ones(len(src), dtype=bool)
        new_group[1:] = (src[1:] != src[:-1]) | (nxt[1:] != nxt[:-1])
        group = np.cumsum(new_group) - 1
        merged = np.bincount(group, weights=p)
        src, nxt = src[new_group], nxt[new_group]

        per_state = np.bincount(src, minlength=n)
        indptr.append(total + np.cumsum(per_state))
        total += len(src)
        srcs.append(src)
        succs.append(nxt)
        probs.append(merged)

    cm = ComponentModel(
        shape,
        n_actions,
        np.concatenate(indptr),
        np.concatenate(srcs),
        np.concatenate(succs),
        np.concatenate(probs),
        active,
    )
    r = np.full(n, float(spec.step_reward))
    r[obstacles] = 0.0
    for s, value in spec.terminals.items():
        r[s] = value
    return cm, RewardModel(r, terminals, obstacles)


def dense_bytes(n_states: int, n_actions: int) -> int:
    return n_actions * n_states * n_states * PROB_BYTES


def to_tabular(cm: ComponentModel, cap_bytes: int | None = None) -> TabularModel:
    cap = dense_cap() if cap_bytes is None else cap_bytes
    need = dense_bytes(cm.n_states, cm.n_actions)
    if need > cap:
        raise SizingError(
            f"dense model needs {need} bytes for {cm.n_states} states x {cm.n_actions} actions, cap is {cap}"
        )
    S = cm.n_states
    P = np.zeros((cm.n_actions, S, S))
    rows = np.repeat(np.arange(cm.n_actions * S), np.diff(cm.indptr))
    P.reshape(-1, S)[rows, cm.succ.astype(np.int64)] = cm.prob
    inactive = np.setdiff1d(np.arange(S), cm.active_states)
    P[:, inactive, inactive] = 1.0
    return TabularModel(P)


def expected_values(cm: ComponentModel, action: int, V, states=None, threads: int = 1) -> np.ndarray:
    """``out[s] = sum_j p_j V[s'_j]`` over the components of ``(s, action)``.

    ``states`` defaults to every accessible state; other entries are 0.
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    if len(V) != cm.n_states:
        raise ValueError(f"value vector has length {len(V)}, expected {cm.n_states}")
    if not 0 <= action < cm.n_actions:
        raise IndexError(f"action {action} out of range [0, {cm.n_actions})")
    plan = cm.plan(states)
    out = np.zeros(cm.n_states)
    kernels.expected(plan, action, V, out, threads=threads)
    cm.counter.add(int(plan.counts[:, action].sum()))
    return out


def storage_entries(cm: ComponentModel) -> tuple[int, int]:
    """``(components, bytes)`` under the declared index/probability widths."""
    n = cm.n_components
    per_component = 2 * cm.index_width + PROB_BYTES
    return n, n * per_component + len(cm.indptr) * OFFSET_BYTES


def dump_components(cm: ComponentModel, f) -> None:
    """Write ``s s_next p`` lines, one section per action."""
    for a in range(cm.n_actions):
        f.write(f"# action {a}\n")
        lo, hi = cm.indptr[a * cm.n_states], cm.indptr[(a + 1) * cm.n_states]
        for s, j, p in zip(cm.src[lo:hi], cm.succ[lo:hi], cm.prob[lo:hi]):
            f.write(f"{s} {j} {float(p)!r}\n")
