"""Sparse tensor-component MDP solvers for n-dimensional gridworlds."""

from cpmdp.gridworld import GridSpec, generate_random_spec, transition_distribution
from cpmdp.solvers import (
    SolverConfig,
    SolveResult,
    policy_iteration,
    tabular_policy_iteration,
    tabular_value_iteration,
    value_iteration,
)
from cpmdp.statespace import GridShape, linear_index, multi_index, num_states
from cpmdp.transition import build_models, expected_values, storage_entries, to_tabular

__all__ = [
    "GridShape",
    "GridSpec",
    "SolveResult",
    "SolverConfig",
    "build_models",
    "expected_values",
    "generate_random_spec",
    "linear_index",
    "multi_index",
    "num_states",
    "policy_iteration",
    "storage_entries",
    "tabular_policy_iteration",
    "tabular_value_iteration",
    "to_tabular",
    "transition_distribution",
    "value_iteration",
]
