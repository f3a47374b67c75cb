"""n-dimensional stochastic gridworld: problem description and exact dynamics.

Action ``2k`` moves one cell down axis ``k`` and action ``2k + 1`` one cell up
it.  The intended move happens with probability ``noise``; the rest of the mass
is split evenly over the ``2(D - 1)`` moves along the other axes (in a 1-d grid
it stays put).  Moves that leave the grid or hit an obstacle bounce back.
Terminal states are absorbing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from cpmdp.statespace import GridShape, as_shape, linear_index, multi_index, num_states, step

STEP_REWARD = -3.0
TERMINAL_REWARDS = (100.0, -100.0)
DEFAULT_NOISE = 0.8


class CapacityError(ValueError):
    """Requested placements do not fit in the grid."""


class InvalidStateError(ValueError):
    """A query was made for a state the agent cannot occupy."""


@dataclass(frozen=True)
class GridSpec:
    shape: GridShape
    obstacles: frozenset = field(default_factory=frozenset)
    terminals: dict = field(default_factory=dict)
    step_reward: float = STEP_REWARD
    noise: float = DEFAULT_NOISE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", as_shape(self.shape))
        object.__setattr__(self, "obstacles", frozenset(int(s) for s in self.obstacles))
        terminals = {int(s): float(r) for s, r in sorted(self.terminals.items())}
        object.__setattr__(self, "terminals", terminals)
        n = num_states(self.shape)
        for s in self.obstacles | terminals.keys():
            if not 0 <= s < n:
                raise ValueError(f"state {s} out of range [0, {n})")
        if self.obstacles & terminals.keys():
            raise ValueError("a state cannot be both an obstacle and a terminal")
        if len(self.obstacles) >= n:
            raise ValueError("grid has no accessible state")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise must lie in [0, 1], got {self.noise}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_states(self) -> int:
        return num_states(self.shape)

    @property
    def n_actions(self) -> int:
        return action_count(self)

    def obstacle_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.obstacles)] = True
        return mask

    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.terminals)] = True
        return mask

    def plain_states(self) -> np.ndarray:
        """Sorted ids of states that are neither obstacles nor terminals."""
        return np.flatnonzero(~(self.obstacle_mask() | self.terminal_mask()))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dims": list(self.shape),
            "obstacles": [list(multi_index(s, self.shape)) for s in sorted(self.obstacles)],
            "terminals": [
                {"cell": list(multi_index(s, self.shape)), "reward": r} for s, r in self.terminals.items()
            ],
            "step_reward": self.step_reward,
            "noise": self.noise,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        shape = GridShape(data["dims"])
        obstacles = {linear_index(c, shape) for c in data.get("obstacles", [])}
        terminals = {}
        for t in data.get("terminals", []):
            s = linear_index(t["cell"], shape)
            if s in terminals:
                raise ValueError(f"duplicate terminal cell {t['cell']}")
            terminals[s] = float(t["reward"])
        return cls(
            shape=shape,
            obstacles=obstacles,
            terminals=terminals,
            step_reward=float(data.get("step_reward", STEP_REWARD)),
            noise=float(data.get("noise", DEFAULT_NOISE)),
            seed=int(data.get("seed", 0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GridSpec":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GridSpec":
        with open(path, encoding="utf-8") as f:
            return cls.loads(f.read())


def action_count(spec_or_shape) -> int:
    shape = spec_or_shape.shape if isinstance(spec_or_shape, GridSpec) else as_shape(spec_or_shape)
    return 2 * len(shape)


def action_axis(action: int) -> tuple[int, int]:
    """``(axis, direction)`` of an action id."""
    axis, up = divmod(int(action), 2)
    return axis, (1 if up else -1)


def action_name(action: int, ndim: int) -> str:
    axis, direction = action_axis(action)
    if ndim == 2:
        return ("north", "south", "west", "east")[action]
    return f"{'-' if direction < 0 else '+'}x{axis}"


def generate_random_spec(
    shape,
    n_obstacles: int,
    n_terminals: int,
    seed: int,
    noise: float = DEFAULT_NOISE,
    step_reward: float = STEP_REWARD,
) -> GridSpec:
    """Random obstacle and terminal placement, reproducible from ``seed``.

    Terminal rewards alternate +100, -100, ... in draw order.
    """
    shape = as_shape(shape)
    n = num_states(shape)
    if n_obstacles < 0 or n_terminals < 0:
        raise CapacityError("counts must be non-negative")
    if n_obstacles + n_terminals >= n:
        raise CapacityError(
            f"{n_obstacles} obstacles + {n_terminals} terminals do not fit in {n} states "
            "(at least one plain state is required)"
        )
    rng = np.random.default_rng(int(seed))
    picks = rng.choice(n, size=n_obstacles + n_terminals, replace=False)
    obstacles = picks[:n_obstacles].tolist()
    terminals = {int(s): TERMINAL_REWARDS[i % 2] for i, s in enumerate(picks[n_obstacles:])}
    return GridSpec(shape, obstacles, terminals, step_reward=step_reward, noise=noise, seed=int(seed))


def intended_successor(spec: GridSpec, state: int, action: int) -> int:
    if state in spec.obstacles:
        raise InvalidStateError(f"state {state} is an obstacle")
    if not 0 <= action < spec.n_actions:
        raise IndexError(f"action {action} out of range [0, {spec.n_actions})")
    axis, direction = action_axis(action)
    coords, moved = step(multi_index(state, spec.shape), axis, direction, spec.shape)
    if not moved:
        return state
    target = linear_index(coords, spec.shape)
    return state if target in spec.obstacles else target


def move_set(spec: GridSpec, action: int) -> list[tuple[int, float]]:
    """``(action, probability)`` for the intended move followed by the slips.

    Slips are listed in increasing action id.  ``-1`` stands for staying put.
    """
    axis, _ = action_axis(action)
    slip_actions = [b for b in range(spec.n_actions) if action_axis(b)[0] != axis]
    moves = [(action, spec.noise)]
    if slip_actions:
        share = (1.0 - spec.noise) / len(slip_actions)
        moves += [(b, share) for b in slip_actions]
    else:
        moves.append((-1, 1.0 - spec.noise))
    return moves


def transition_distribution(spec: GridSpec, state: int, action: int) -> list[tuple[int, float]]:
    """Successor distribution of ``(state, action)``, sorted by successor id."""
    if state in spec.obstacles:
        raise InvalidStateError(f"state {state} is an obstacle")
    if not 0 <= action < spec.n_actions:
        raise IndexError(f"action {action} out of range [0, {spec.n_actions})")
    if state in spec.terminals:
        return [(state, 1.0)]
    mass: dict[int, float] = {}
    for move, p in move_set(spec, action):
        if p <= 0.0:
            continue
        target = state if move < 0 else intended_successor(spec, state, move)
        mass[target] = mass.get(target, 0.0) + p
    return sorted(mass.items())
