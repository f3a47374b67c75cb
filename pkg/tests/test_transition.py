import io

import numpy as np
import pytest

from cpmdp.gridworld import GridSpec, generate_random_spec, transition_distribution
from cpmdp.statespace import SizingError
from cpmdp.transition import (
    build_models,
    dense_bytes,
    dump_components,
    expected_values,
    storage_entries,
    to_tabular,
)


def brute_force_count(spec):
    """Oracle: count (s, a, s') with positive probability by enumerating the dynamics."""
    total = 0
    for s in range(spec.n_states):
        if s in spec.obstacles:
            continue
        for a in range(spec.n_actions):
            total += sum(1 for _, p in transition_distribution(spec, s, a) if p > 0)
    return total


def test_three_by_three_deterministic_count():
    spec = GridSpec([3, 3], noise=1.0)
    cm, _ = build_models(spec)
    assert brute_force_count(spec) == 36
    assert cm.n_components == 36
    assert storage_entries(cm)[0] == 36


def test_chain_components(chain):
    cm, rm = build_models(chain)
    assert cm.n_actions == 2
    for a in range(2):
        assert len(cm.components(0, a)) == 1
        assert [(c.s_next, c.p) for c in cm.components(1, a)] == [(1, 1.0)]
    assert rm.r.tolist() == [-3.0, 100.0]


@pytest.mark.parametrize(
    "dims, n_obs, n_term, noise",
    [([7], 1, 2, 0.8), ([6, 5], 4, 3, 0.8), ([4, 3, 4], 6, 2, 0.6), ([3, 2, 2, 3], 3, 2, 0.9), ([3, 3], 0, 1, 0.0)],
)
def test_components_equal_distribution_exactly(dims, n_obs, n_term, noise):
    spec = generate_random_spec(dims, n_obs, n_term, seed=5, noise=noise)
    cm, rm = build_models(spec)
    assert cm.active_states.tolist() == sorted(set(range(spec.n_states)) - spec.obstacles)
    for s in range(spec.n_states):
        for a in range(spec.n_actions):
            got = [(c.s_next, c.p) for c in cm.components(s, a)]
            if s in spec.obstacles:
                assert got == []
            else:
                assert got == transition_distribution(spec, s, a)
                assert len(got) <= max(2 * spec.ndim - 1, 2)
    assert cm.n_components == brute_force_count(spec)
    assert np.all(rm.r[rm.obstacle_mask] == 0)
    assert np.all(rm.r[rm.plain_states] == -3.0)


def test_row_stochastic_large_grid():
    spec = generate_random_spec([100, 100, 10], 500, 20, seed=2)
    cm, _ = build_models(spec)
    rows = np.repeat(np.arange(cm.n_actions * cm.n_states), np.diff(cm.indptr))
    sums = np.bincount(rows, weights=cm.prob, minlength=cm.n_actions * cm.n_states).reshape(cm.n_actions, -1)
    assert np.all(np.abs(sums[:, cm.active_states] - 1.0) <= 1e-12)
    assert np.all(sums[:, sorted(spec.obstacles)] == 0)
    obstacle = spec.obstacle_mask()
    assert not obstacle[cm.succ].any() and not obstacle[cm.src].any()
    assert cm.counts()[cm.active_states].max() <= 5


def test_to_tabular_single_state():
    cm, _ = build_models(GridSpec([1]))
    tm = to_tabular(cm)
    assert tm.P.shape == (2, 1, 1)
    assert np.all(tm.P == 1.0)


def test_to_tabular_chain(chain):
    cm, _ = build_models(chain)
    P = to_tabular(cm).P
    assert P[1].tolist() == [[0.0, 1.0], [0.0, 1.0]]
    assert P[0].tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_to_tabular_rows_stochastic():
    spec = generate_random_spec([4, 4], 2, 2, seed=4)
    cm, _ = build_models(spec)
    P = to_tabular(cm).P
    assert np.all(np.abs(P.sum(axis=2) - 1.0) <= 1e-12)
    for s in spec.obstacles:
        assert np.all(P[:, s, s] == 1.0)


def test_to_tabular_cap():
    cm, _ = build_models(GridSpec([30, 30]))
    with pytest.raises(SizingError):
        to_tabular(cm, cap_bytes=dense_bytes(900, 4) - 1)
    assert to_tabular(cm, cap_bytes=dense_bytes(900, 4)).P.shape == (4, 900, 900)


def test_expected_values_zero_and_constant(backend):
    spec = generate_random_spec([5, 6], 4, 2, seed=8)
    cm, _ = build_models(spec)
    for a in range(cm.n_actions):
        assert np.all(expected_values(cm, a, np.zeros(30)) == 0)
        out = expected_values(cm, a, np.full(30, 7.5))
        assert np.allclose(out[cm.active_states], 7.5, atol=1e-12, rtol=0)
        assert np.all(out[sorted(spec.obstacles)] == 0)


def test_expected_values_match_dense_oracle(backend):
    rng = np.random.default_rng(0)
    for seed in range(5):
        spec = generate_random_spec([4, 4], 2, 2, seed=seed, noise=0.7)
        cm, _ = build_models(spec)
        P = to_tabular(cm).P
        for _ in range(100):
            V = rng.normal(scale=100, size=16)
            for a in range(cm.n_actions):
                dense = P[a] @ V
                got = expected_values(cm, a, V)
                assert np.max(np.abs(got[cm.active_states] - dense[cm.active_states])) <= 1e-12


def test_expected_values_oracle_mid_sized():
    rng = np.random.default_rng(1)
    spec = generate_random_spec([20, 25], 30, 5, seed=3)
    cm, _ = build_models(spec)
    P = to_tabular(cm).P
    for _ in range(100):
        V = rng.normal(scale=100, size=500)
        for a in range(4):
            diff = expected_values(cm, a, V) - P[a] @ V
            assert np.max(np.abs(diff[cm.active_states])) <= 1e-12


def test_multiply_counter_exact(backend):
    spec = generate_random_spec([6, 7], 5, 3, seed=9)
    cm, _ = build_models(spec)
    counts = cm.counts()
    V = np.ones(spec.n_states)
    for a in range(cm.n_actions):
        before = cm.counter.value
        expected_values(cm, a, V)
        assert cm.counter.value - before == counts[cm.active_states, a].sum()
    plain = spec.plain_states()
    before = cm.counter.value
    expected_values(cm, 1, V, states=plain)
    assert cm.counter.value - before == counts[plain, 1].sum()


def test_storage_seventy_by_seventy():
    spec = generate_random_spec([70, 70], 50, 6, seed=1)
    cm, _ = build_models(spec)
    comps, nbytes = storage_entries(cm)
    assert comps <= 4_900 * 4 * 3
    assert 4_900**2 * 4 == 96_040_000
    assert 1 - comps / 96_040_000 > 0.999
    # two 16-bit indices plus one 64-bit probability per component, 64-bit offsets
    assert nbytes == comps * (2 * 2 + 8) + (4 * 4_900 + 1) * 8
    assert storage_entries(cm) == (comps, nbytes)


def test_storage_single_state():
    cm, _ = build_models(GridSpec([1, 1, 1]))
    assert storage_entries(cm)[0] == 6


@pytest.mark.parametrize("ndim", [1, 2, 3])
def test_compression_ratio_bound_and_decreasing(ndim):
    ratios = []
    for side in (4, 6, 9, 12):
        if ndim == 3 and side > 9:
            continue
        spec = GridSpec([side] * ndim, noise=0.8)
        cm, _ = build_models(spec)
        S, A = spec.n_states, spec.n_actions
        ratio = cm.n_components / (S * S * A)
        assert ratio <= max(2 * ndim - 1, 2) / S
        ratios.append(ratio)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_dump_components(chain):
    cm, _ = build_models(chain)
    buf = io.StringIO()
    dump_components(cm, buf)
    assert buf.getvalue() == "# action 0\n0 0 1.0\n1 1 1.0\n# action 1\n0 1 1.0\n1 1 1.0\n"
