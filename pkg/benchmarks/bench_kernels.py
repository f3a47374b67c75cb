"""Compiled vs numpy Bellman kernels.

    python benchmarks/bench_kernels.py --sides 50,100,200 --repeats 5

Times a single synchronous backup sweep and a full value iteration on 2-d
grids for each available backend and checks that both return identical bits.
"""

import argparse
import time

import numpy as np

from cpmdp import kernels
from cpmdp.gridworld import generate_random_spec
from cpmdp.solvers import SolverConfig, initial_values, value_iteration
from cpmdp.transition import build_models


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--sides", default="50,100,200,300")
    parser.add_argument("--ndim", type=int, default=2)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'S':>9} {'comps':>9} " + " ".join(f"{b + ' sweep':>14} {b + ' VI':>12}" for b in backends) + "  speedup")
    cfg = SolverConfig(threads=args.threads)
    for side in (int(s) for s in args.sides.split(",")):
        spec = generate_random_spec([side] * args.ndim, side, 6, seed=1)
        cm, rm = build_models(spec)
        plan = cm.plan(rm.plain_states)
        V = initial_values(rm)
        row, sweeps, results = [], {}, {}
        for name in backends:
            kernels.set_backend(name)
            out = V.copy()
            t_sweep, _ = best_of(lambda: kernels.backup(plan, V, rm.r, 0.9, out, threads=args.threads), args.repeats)
            t_vi, res = best_of(lambda: value_iteration(cm, rm, cfg), max(1, args.repeats // 2))
            sweeps[name], results[name] = t_sweep, res
            row.append(f"{t_sweep * 1e3:>12.3f}ms {t_vi:>11.3f}s")
        if len(backends) == 2:
            a, b = results["cython"], results["python"]
            assert np.array_equal(a.value, b.value) and np.array_equal(a.policy, b.policy)
            speedup = f"{sweeps['python'] / sweeps['cython']:.1f}x"
        else:
            speedup = "-"
        print(f"{spec.n_states:>9} {cm.n_components:>9} " + " ".join(row) + f"  {speedup}")
    kernels.set_backend(backends[0])


if __name__ == "__main__":
    main()
