"""Pure numpy versions of the Bellman kernels.

Each per-state sum is accumulated with ``np.bincount``, which adds weights in
input order; components are stored sorted by successor, so the sums are
rounded exactly like the compiled loops.
"""

import numpy as np


def _action_arrays(plan, action):
    return plan.local_components(action)


def expected(plan, action, V, out):
    local, succ, prob = _action_arrays(plan, action)
    out[plan.rows] = np.bincount(local, weights=prob * V[succ], minlength=plan.n_rows)


def q_values(plan, V, q_out):
    for a in range(plan.n_actions):
        local, succ, prob = _action_arrays(plan, a)
        q_out[:, a] = np.bincount(local, weights=prob * V[succ], minlength=plan.n_rows)


def backup(plan, V, r, gamma, tie_rtol, V_out, pi_out, q_out):
    q_values(plan, V, q_out)
    best = q_out.max(axis=1)
    scaled = gamma * best
    floor = scaled - tie_rtol * np.maximum(np.abs(scaled), 1.0)
    pi_out[:] = np.argmax(gamma * q_out >= floor[:, None], axis=1)
    V_out[plan.rows] = r[plan.rows] + gamma * best


def policy_sweep(plan, policy, V, r, gamma, V_out):
    acc = np.zeros(plan.n_rows)
    for a in range(plan.n_actions):
        local, succ, prob = _action_arrays(plan, a)
        keep = policy[local] == a
        if keep.any():
            acc += np.bincount(local[keep], weights=prob[keep] * V[succ[keep]], minlength=plan.n_rows)
    V_out[plan.rows] = r[plan.rows] + gamma * acc
