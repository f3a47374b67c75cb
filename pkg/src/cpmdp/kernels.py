"""Backend selection and thread fan-out for the Bellman kernels.

The compiled Cython kernels are used when the extension imports; otherwise (or
with ``CPMDP_PURE_PYTHON=1``) the numpy implementation in ``_kernels_py`` runs.
Both produce bit-identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from cpmdp import _kernels_py

try:
    from cpmdp import _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None

# Actions whose discounted expected values are within this relative distance of
# the best are treated as tied; the lowest id wins.
TIE_RTOL = 1e-12

_backend = "python" if _kernels_cy is None or os.environ.get("CPMDP_PURE_PYTHON") else "cython"


def available_backends() -> list[str]:
    return ["python"] if _kernels_cy is None else ["cython", "python"]


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _backend = name


def default_threads() -> int:
    return max(1, int(os.environ.get("CPMDP_THREADS", "1")))


class SweepPlan:
    """The part of a component model a solver sweeps: one action block per action, ``rows`` as states."""

    def __init__(self, indptr, src, succ, prob, n_states, n_actions, rows):
        self.indptr = indptr
        self.src = src
        self.succ = succ
        self.prob = prob
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.rows = np.ascontiguousarray(rows, dtype=np.int64)
        self.n_rows = len(self.rows)
        lengths = np.diff(indptr).reshape(self.n_actions, self.n_states)
        # components per (row, action); drives the multiply accounting
        self.counts = np.ascontiguousarray(lengths[:, self.rows].T)
        self.components_per_sweep = int(self.counts.sum())
        self._local = {}

    def local_components(self, action):
        """Components of ``action`` restricted to ``rows``, with row positions instead of state ids."""
        if action not in self._local:
            lo = self.indptr[action * self.n_states]
            hi = self.indptr[(action + 1) * self.n_states]
            pos = np.full(self.n_states, -1, dtype=np.int64)
            pos[self.rows] = np.arange(self.n_rows)
            local = pos[self.src[lo:hi]]
            keep = local >= 0
            self._local[action] = (local[keep], self.succ[lo:hi][keep], self.prob[lo:hi][keep])
        return self._local[action]

    def policy_components(self, policy) -> int:
        return int(self.counts[np.arange(self.n_rows), policy].sum())


def _chunks(n, threads):
    threads = max(1, min(threads, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(threads)]


def _fan_out(fn, n, threads):
    parts = _chunks(n, threads)
    if len(parts) == 1:
        fn(*parts[0])
        return
    with ThreadPoolExecutor(len(parts)) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in parts]:
            fut.result()


def expected(plan: SweepPlan, action: int, V, out, threads: int = 1):
    if _backend == "python":
        return _kernels_py.expected(plan, action, V, out)
    _fan_out(
        lambda lo, hi: _kernels_cy.expected(
            plan.indptr, plan.succ, plan.prob, plan.n_states, action, plan.rows, V, out, lo, hi
        ),
        plan.n_rows,
        threads,
    )


def q_values(plan: SweepPlan, V, threads: int = 1) -> np.ndarray:
    q = np.empty((plan.n_rows, plan.n_actions))
    if _backend == "python":
        _kernels_py.q_values(plan, V, q)
        return q
    _fan_out(
        lambda lo, hi: _kernels_cy.q_values(
            plan.indptr, plan.succ, plan.prob, plan.n_states, plan.n_actions, plan.rows, V, q, lo, hi
        ),
        plan.n_rows,
        threads,
    )
    return q


def backup(plan: SweepPlan, V, r, gamma: float, V_out, threads: int = 1):
    """Fill ``V_out[rows]`` with one Bellman backup of ``V``; return ``(policy, q)`` over rows."""
    pi = np.zeros(plan.n_rows, dtype=np.int64)
    q = np.empty((plan.n_rows, plan.n_actions))
    if _backend == "python":
        _kernels_py.backup(plan, V, r, gamma, TIE_RTOL, V_out, pi, q)
        return pi, q
    _fan_out(
        lambda lo, hi: _kernels_cy.backup(
            plan.indptr, plan.succ, plan.prob, plan.n_states, plan.n_actions, plan.rows,
            V, r, gamma, TIE_RTOL, V_out, pi, q, lo, hi,
        ),
        plan.n_rows,
        threads,
    )
    return pi, q


def policy_sweep(plan: SweepPlan, policy, V, r, gamma: float, V_out, threads: int = 1):
    policy = np.ascontiguousarray(policy, dtype=np.int64)
    if _backend == "python":
        return _kernels_py.policy_sweep(plan, policy, V, r, gamma, V_out)
    _fan_out(
        lambda lo, hi: _kernels_cy.policy_sweep(
            plan.indptr, plan.succ, plan.prob, plan.n_states, plan.rows, policy, V, r, gamma, V_out, lo, hi
        ),
        plan.n_rows,
        threads,
    )


def greedy(ev: np.ndarray, gamma: float) -> np.ndarray:
    """Lowest action id among the tied maxima of ``gamma * ev`` in each row.

    ``ev`` holds expected next-state values; values within ``TIE_RTOL`` of the
    row maximum count as tied.
    """
    scaled = gamma * ev
    best = gamma * ev.max(axis=1)
    floor = best - TIE_RTOL * np.maximum(np.abs(best), 1.0)
    return np.argmax(scaled >= floor[:, None], axis=1).astype(np.int64)
