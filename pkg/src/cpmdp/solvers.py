"""Value and policy iteration on component models, plus the dense baselines.

All four solvers share one set of conventions so their outputs can be compared
directly:

* ``V`` starts at the reward vector; terminal values stay pinned at their
  reward and obstacles at 0.  Only plain states are backed up.
* Backups are synchronous (every update in a sweep reads the previous sweep).
* VI stops when ``max |V_{k+1} - V_k| < epsilon * (1 - gamma) / gamma``.
* Greedy choices take the lowest action id among tied maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cpmdp import kernels
from cpmdp.transition import ComponentModel, RewardModel, TabularModel

NO_ACTION = -1
SOLVERS = ("cp-vi", "cp-pi", "tab-vi", "tab-pi")


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 0.9
    epsilon: float = 1e-4
    max_iter: int = 1000
    eval_epsilon: float = 1e-7
    eval_max_iter: int = 10_000
    threads: int = 1

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.epsilon <= 0 or self.eval_epsilon <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.eval_max_iter < 1:
            raise ValueError("iteration limits must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def threshold(self) -> float:
        return stopping_threshold(self.epsilon, self.gamma)

    @property
    def eval_threshold(self) -> float:
        return stopping_threshold(self.eval_epsilon, self.gamma)


def stopping_threshold(epsilon: float, gamma: float) -> float:
    """Residual below which the iterate is within ``epsilon`` of the fixed point."""
    return math.inf if gamma == 0 else epsilon * (1.0 - gamma) / gamma


@dataclass
class Evaluation:
    value: np.ndarray
    sweeps: int
    residual_trace: list
    converged: bool
    multiplies: int


@dataclass
class SolveResult:
    solver: str
    value: np.ndarray
    policy: np.ndarray
    iterations: int
    residual_trace: list
    multiplies: int
    converged: bool
    phase_multiplies: dict = field(default_factory=dict)
    # policy iteration only: one entry per outer round
    eval_sweeps: list = field(default_factory=list)
    eval_traces: list = field(default_factory=list)
    policy_history: list = field(default_factory=list)
    value_history: list = field(default_factory=list)


def initial_values(rm: RewardModel) -> np.ndarray:
    V = rm.r.astype(np.float64, copy=True)
    V[rm.obstacle_mask] = 0.0
    return V


def _full_policy(rm: RewardModel, plain, pi_plain) -> np.ndarray:
    policy = np.full(rm.n_states, NO_ACTION, dtype=np.int64)
    policy[plain] = pi_plain
    return policy


def _sup(x) -> float:
    return float(np.max(np.abs(x))) if len(x) else 0.0


# -- component-model solvers ---------------------------------------------------


def bellman_backup(cm: ComponentModel, rm: RewardModel, V, cfg: SolverConfig):
    """One synchronous Bellman backup; returns ``(V', greedy policy of V)``."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    plain = rm.plain_states
    plan = cm.plan(plain)
    out = V.copy()
    pi, _ = kernels.backup(plan, V, rm.r, cfg.gamma, out, threads=cfg.threads)
    cm.counter.add(plan.components_per_sweep)
    return out, _full_policy(rm, plain, pi)


def q_values(cm: ComponentModel, rm: RewardModel, V, cfg: SolverConfig) -> np.ndarray:
    """``(S, A)`` action values ``r + gamma * E[V]``; rows of non-plain states are NaN."""
    plain = rm.plain_states
    plan = cm.plan(plain)
    ev = kernels.q_values(plan, np.ascontiguousarray(V, dtype=np.float64), threads=cfg.threads)
    cm.counter.add(plan.components_per_sweep)
    q = np.full((rm.n_states, cm.n_actions), np.nan)
    q[plain] = rm.r[plain, None] + cfg.gamma * ev
    return q


def policy_improvement(cm: ComponentModel, rm: RewardModel, V, cfg: SolverConfig) -> np.ndarray:
    plain = rm.plain_states
    plan = cm.plan(plain)
    ev = kernels.q_values(plan, np.ascontiguousarray(V, dtype=np.float64), threads=cfg.threads)
    cm.counter.add(plan.components_per_sweep)
    return _full_policy(rm, plain, kernels.greedy(ev, cfg.gamma))


def value_iteration(cm: ComponentModel, rm: RewardModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    plain = rm.plain_states
    plan = cm.plan(plain)
    V = initial_values(rm)
    trace = []
    converged = False
    for _ in range(cfg.max_iter):
        V_next = V.copy()
        kernels.backup(plan, V, rm.r, cfg.gamma, V_next, threads=cfg.threads)
        trace.append(_sup(V_next[plain] - V[plain]))
        V = V_next
        if trace[-1] < cfg.threshold:
            converged = True
            break
    backups = len(trace) * plan.components_per_sweep
    pi = kernels.greedy(kernels.q_values(plan, V, threads=cfg.threads), cfg.gamma)
    extract = plan.components_per_sweep
    cm.counter.add(backups + extract)
    return SolveResult(
        "cp-vi", V, _full_policy(rm, plain, pi), len(trace), trace, backups + extract, converged,
        phase_multiplies={"backup": backups, "extract": extract},
    )


def _evaluate(plan, rm, pi_plain, V0, cfg) -> Evaluation:
    V = np.array(V0, dtype=np.float64)
    rows = plan.rows
    trace = []
    converged = False
    for _ in range(cfg.eval_max_iter):
        V_next = V.copy()
        kernels.policy_sweep(plan, pi_plain, V, rm.r, cfg.gamma, V_next, threads=cfg.threads)
        trace.append(_sup(V_next[rows] - V[rows]))
        V = V_next
        if trace[-1] < cfg.eval_threshold:
            converged = True
            break
    return Evaluation(V, len(trace), trace, converged, len(trace) * plan.policy_components(pi_plain))


def policy_evaluation_iterative(
    cm: ComponentModel, rm: RewardModel, policy, cfg: SolverConfig = SolverConfig(), V0=None
) -> Evaluation:
    """Fixed-policy synchronous sweeps until the residual drops below the eval threshold."""
    plain = rm.plain_states
    plan = cm.plan(plain)
    pi_plain = np.asarray(policy, dtype=np.int64)[plain]
    if np.any((pi_plain < 0) | (pi_plain >= cm.n_actions)):
        raise ValueError("policy has out-of-range actions at plain states")
    ev = _evaluate(plan, rm, pi_plain, initial_values(rm) if V0 is None else V0, cfg)
    cm.counter.add(ev.multiplies)
    return ev


def policy_iteration(
    cm: ComponentModel, rm: RewardModel, cfg: SolverConfig = SolverConfig(), keep_history: bool = False
) -> SolveResult:
    plain = rm.plain_states
    plan = cm.plan(plain)
    pi = np.zeros(len(plain), dtype=np.int64)
    V = initial_values(rm)
    result = SolveResult("cp-pi", V, None, 0, [], 0, False)
    eval_mult = improve_mult = 0
    for _ in range(cfg.max_iter):
        ev = _evaluate(plan, rm, pi, V, cfg)
        V = ev.value
        eval_mult += ev.multiplies
        result.eval_sweeps.append(ev.sweeps)
        result.eval_traces.append(ev.residual_trace)
        if keep_history:
            result.policy_history.append(_full_policy(rm, plain, pi))
            result.value_history.append(V.copy())

        ev_q = kernels.q_values(plan, V, threads=cfg.threads)
        improve_mult += plan.components_per_sweep
        new_pi = kernels.greedy(ev_q, cfg.gamma)
        best = ev_q.max(axis=1) if len(plain) else np.zeros(0)
        result.residual_trace.append(_sup(rm.r[plain] + cfg.gamma * best - V[plain]))
        if np.array_equal(new_pi, pi):
            result.converged = True
            break
        pi = new_pi

    result.value = V
    result.policy = _full_policy(rm, plain, pi)
    result.iterations = len(result.residual_trace)
    result.multiplies = eval_mult + improve_mult
    result.phase_multiplies = {"evaluation": eval_mult, "improvement": improve_mult}
    cm.counter.add(result.multiplies)
    return result


# -- dense baselines -------------------------------------------------------------


def _dense_expected(tm: TabularModel, V, plain) -> np.ndarray:
    """``(len(plain), A)`` expected next values via dense mat-vec products."""
    out = np.empty((len(plain), tm.n_actions))
    for a in range(tm.n_actions):
        out[:, a] = (tm.P[a] @ V)[plain]
    return out


def tabular_value_iteration(tm: TabularModel, rm: RewardModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    plain = rm.plain_states
    per_sweep = len(plain) * tm.n_states * tm.n_actions
    V = initial_values(rm)
    trace = []
    converged = False
    for _ in range(cfg.max_iter):
        V_next = V.copy()
        ev = _dense_expected(tm, V, plain)
        if len(plain):
            V_next[plain] = rm.r[plain] + cfg.gamma * ev.max(axis=1)
        trace.append(_sup(V_next[plain] - V[plain]))
        V = V_next
        if trace[-1] < cfg.threshold:
            converged = True
            break
    pi = kernels.greedy(_dense_expected(tm, V, plain), cfg.gamma)
    backups = len(trace) * per_sweep
    return SolveResult(
        "tab-vi", V, _full_policy(rm, plain, pi), len(trace), trace, backups + per_sweep, converged,
        phase_multiplies={"backup": backups, "extract": per_sweep},
    )


def tabular_policy_iteration(tm: TabularModel, rm: RewardModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    plain = rm.plain_states
    S = tm.n_states
    pi = np.zeros(len(plain), dtype=np.int64)
    V = initial_values(rm)
    result = SolveResult("tab-pi", V, None, 0, [], 0, False)
    eval_mult = improve_mult = 0
    for _ in range(cfg.max_iter):
        P_pi = tm.P[pi, plain, :]
        trace = []
        for _ in range(cfg.eval_max_iter):
            V_next = V.copy()
            V_next[plain] = rm.r[plain] + cfg.gamma * (P_pi @ V)
            trace.append(_sup(V_next[plain] - V[plain]))
            V = V_next
            if trace[-1] < cfg.eval_threshold:
                break
        eval_mult += len(trace) * len(plain) * S
        result.eval_sweeps.append(len(trace))
        result.eval_traces.append(trace)

        ev = _dense_expected(tm, V, plain)
        improve_mult += len(plain) * S * tm.n_actions
        new_pi = kernels.greedy(ev, cfg.gamma)
        best = ev.max(axis=1) if len(plain) else np.zeros(0)
        result.residual_trace.append(_sup(rm.r[plain] + cfg.gamma * best - V[plain]))
        if np.array_equal(new_pi, pi):
            result.converged = True
            break
        pi = new_pi

    result.value = V
    result.policy = _full_policy(rm, plain, pi)
    result.iterations = len(result.residual_trace)
    result.multiplies = eval_mult + improve_mult
    result.phase_multiplies = {"evaluation": eval_mult, "improvement": improve_mult}
    return result


def policy_evaluation_exact(tm: TabularModel, rm: RewardModel, policy, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Direct solve of ``(I - gamma P_pi) V = r`` on plain states, terminals as boundary values."""
    plain = rm.plain_states
    terminals = rm.terminal_states
    policy = np.asarray(policy, dtype=np.int64)
    V = initial_values(rm)
    if not len(plain):
        return V
    P_pi = tm.P[policy[plain], plain, :]
    A = np.eye(len(plain)) - cfg.gamma * P_pi[:, plain]
    b = rm.r[plain] + cfg.gamma * P_pi[:, terminals] @ V[terminals]
    try:
        V[plain] = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("policy evaluation system is singular") from exc
    return V


def q_gap(q: np.ndarray) -> np.ndarray:
    """Best minus second-best action value per row (inf with a single action, NaN rows stay NaN)."""
    if q.shape[1] < 2:
        return np.full(q.shape[0], np.inf)
    top = np.sort(q, axis=1)
    return top[:, -1] - top[:, -2]
