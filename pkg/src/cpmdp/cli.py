"""Command-line interface: ``cpmdp {gen-spec,solve,compare,bench,show-policy}``.

Exit codes: 0 success, 1 usage error, 2 infeasible/capacity, 3 I/O error,
4 comparison found a real disagreement.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from cpmdp import bench, kernels
from cpmdp.gridworld import DEFAULT_NOISE, CapacityError, GridSpec, action_name, generate_random_spec
from cpmdp.solvers import (
    SOLVERS,
    SolverConfig,
    policy_iteration,
    q_gap,
    q_values,
    tabular_policy_iteration,
    tabular_value_iteration,
    value_iteration,
)
from cpmdp.statespace import SizingError, multi_index
from cpmdp.transition import build_models, dense_bytes, dense_cap, dump_components, storage_entries, to_tabular

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_IO, EXIT_MISMATCH = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _solver_list(text):
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [n for n in names if n not in SOLVERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"solvers must be among {', '.join(SOLVERS)}")
    return names


def _load_spec(path):
    try:
        return GridSpec.load(path)
    except OSError as exc:
        raise CliError(f"cannot read spec {path}: {exc}", EXIT_IO)
    except (ValueError, KeyError, IndexError) as exc:
        raise CliError(f"invalid spec {path}: {exc}", EXIT_USAGE)


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(
            gamma=args.gamma,
            epsilon=args.epsilon,
            max_iter=args.max_iter,
            eval_epsilon=args.eval_epsilon,
            eval_max_iter=args.eval_max_iter,
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)


def run_solver(spec: GridSpec, solver: str, cfg: SolverConfig, cap=None):
    """Build models and solve; returns ``(result, cm, rm)``."""
    cm, rm = build_models(spec)
    if solver.startswith("tab"):
        try:
            tm = to_tabular(cm, cap_bytes=cap)
        except SizingError as exc:
            raise CliError(str(exc), EXIT_CAPACITY)
        fn = tabular_value_iteration if solver == "tab-vi" else tabular_policy_iteration
        return fn(tm, rm, cfg), cm, rm
    fn = value_iteration if solver == "cp-vi" else policy_iteration
    return fn(cm, rm, cfg), cm, rm


def _stats_line(spec, solver, res, cm, wall):
    S, A = spec.n_states, spec.n_actions
    if solver.startswith("tab"):
        comps, nbytes = S * S * A, dense_bytes(S, A)
    else:
        comps, nbytes = storage_entries(cm)
    rec = bench.RunRecord(
        solver, tuple(spec.shape), spec.ndim, S, A, len(spec.obstacles), len(spec.terminals), spec.seed,
        spec.noise, res.iterations, res.converged, wall, res.multiplies, comps, nbytes,
        2 * S * bench.VALUE_BYTES + S * bench.POLICY_BYTES, False,
    )
    return ",".join(f"{c}={bench._fmt(getattr(rec, c))}" for c in bench.CSV_COLUMNS)


# -- subcommands -------------------------------------------------------------------


def cmd_gen_spec(args):
    try:
        spec = generate_random_spec(args.dims, args.obstacles, args.terminals, args.seed, noise=args.noise)
    except CapacityError as exc:
        raise CliError(str(exc), EXIT_CAPACITY)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    text = spec.dumps()
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    else:
        sys.stdout.write(text)
    out = sys.stderr if not args.out else sys.stdout
    print(
        f"S={spec.n_states} A={spec.n_actions} D={spec.ndim} dims={'x'.join(map(str, spec.shape))} "
        f"obstacles={len(spec.obstacles)} terminals={len(spec.terminals)} "
        f"plain={spec.n_states - len(spec.obstacles) - len(spec.terminals)} seed={spec.seed}",
        file=out,
    )


def cmd_solve(args):
    import time

    spec = _load_spec(args.spec)
    cfg = _config(args)
    t0 = time.perf_counter()
    res, cm, rm = run_solver(spec, args.solver, cfg)
    wall = time.perf_counter() - t0
    prefix = args.out or os.path.splitext(args.spec)[0]
    try:
        with open(f"{prefix}.values", "w", encoding="utf-8") as f:
            for s, v in enumerate(res.value):
                f.write(f"{s} {float(v):.12f}\n")
        with open(f"{prefix}.policy", "w", encoding="utf-8") as f:
            for s in rm.plain_states:
                f.write(f"{s} {int(res.policy[s])}\n")
        if args.dump_model:
            with open(f"{prefix}.components", "w", encoding="utf-8") as f:
                dump_components(cm, f)
    except OSError as exc:
        raise CliError(f"cannot write output for prefix {prefix}: {exc}", EXIT_IO)
    print(_stats_line(spec, args.solver, res, cm, wall))


def compare_solutions(res_a, res_b, cm, rm, cfg, tolerance):
    plain = rm.plain_states
    gap = q_gap(q_values(cm, rm, res_a.value, cfg))[plain]
    value_gap = float(np.max(np.abs(res_a.value - res_b.value))) if len(res_a.value) else 0.0
    differ = res_a.policy[plain] != res_b.policy[plain]
    return {
        "value_gap": value_gap,
        "policy_disagreements": int(differ.sum()),
        "true_disagreements": int((differ & (gap > tolerance)).sum()),
    }


def cmd_compare(args):
    spec = _load_spec(args.spec)
    # solve tightly enough that solver error cannot exceed the comparison tolerance
    eps = args.epsilon if args.epsilon is not None else args.tolerance / 10
    eval_eps = args.eval_epsilon if args.eval_epsilon is not None else args.tolerance / 10
    args.epsilon, args.eval_epsilon = eps, eval_eps
    cfg = _config(args)
    res_a, cm, rm = run_solver(spec, args.solver_a, cfg)
    res_b, _, _ = run_solver(spec, args.solver_b, cfg)
    report = compare_solutions(res_a, res_b, cm, rm, cfg, args.tolerance)
    print(f"solvers: {args.solver_a} vs {args.solver_b}")
    print(f"value sup-norm difference: {report['value_gap']:.6e}")
    print(f"policy disagreements: {report['policy_disagreements']}")
    print(f"disagreements with Q-gap > {args.tolerance:g}: {report['true_disagreements']}")
    ok = report["true_disagreements"] == 0 and report["value_gap"] <= args.tolerance
    print("result: " + ("match" if ok else "MISMATCH"))
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_bench(args):
    cfg = _config(args)
    try:
        suite = bench.experiment_suite(
            args.scale, solvers=args.solvers, repeats=args.repeats, dims_filter=args.D, rows=args.rows,
            base_seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)

    def progress(rec):
        status = "infeasible" if rec.infeasible else f"{rec.wall_time_s:.3f}s it={rec.iterations}"
        print(f"{rec.solver:6s} D={rec.D} S={rec.S} seed={rec.seed} {status}", file=sys.stderr)

    records = bench.run_suite(suite, cfg, solve_only=args.solve_only, progress=None if args.quiet else progress)
    try:
        bench.emit_csv(records, args.out)
        if args.summary:
            bench.emit_summary_csv(bench.aggregate(records), args.summary)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO)
    print(f"wrote {len(records)} records to {args.out}")


_GLYPHS = {0: "^", 1: "v", 2: "<", 3: ">"}


def render_policy(spec: GridSpec, policy) -> str:
    """2-d character map of a policy; other dimensionalities list one state per line."""
    if spec.ndim == 2:
        rows, cols = spec.shape
        lines = []
        for i in range(rows):
            line = []
            for j in range(cols):
                s = i * cols + j
                if s in spec.obstacles:
                    line.append("#")
                elif s in spec.terminals:
                    line.append("+" if spec.terminals[s] > 0 else "-")
                else:
                    line.append(_GLYPHS[int(policy[s])])
            lines.append("".join(line))
        return "\n".join(lines)
    lines = []
    for s in range(spec.n_states):
        coords = multi_index(s, spec.shape)
        if s in spec.obstacles:
            label = "obstacle"
        elif s in spec.terminals:
            label = f"terminal {spec.terminals[s]:g}"
        else:
            label = action_name(int(policy[s]), spec.ndim)
        lines.append(f"{s} {list(coords)} {label}")
    return "\n".join(lines)


def cmd_show_policy(args):
    spec = _load_spec(args.spec)
    if args.policy:
        policy = np.full(spec.n_states, -1, dtype=np.int64)
        try:
            with open(args.policy, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        s, a = line.split()
                        policy[int(s)] = int(a)
        except OSError as exc:
            raise CliError(f"cannot read policy {args.policy}: {exc}", EXIT_IO)
    else:
        res, _, _ = run_solver(spec, args.solver, _config(args))
        policy = res.policy
    print(render_policy(spec, policy))


# -- parser ---------------------------------------------------------------------------


def _add_solver_options(p, gamma=True):
    p.add_argument("--gamma", type=float, default=0.9, help="discount factor (default 0.9)")
    p.add_argument("--epsilon", type=float, default=1e-4, help="value tolerance (default 1e-4)")
    p.add_argument("--max-iter", type=int, default=1000, help="iteration cap (default 1000)")
    p.add_argument("--eval-epsilon", type=float, default=1e-7, help="policy-evaluation tolerance")
    p.add_argument("--eval-max-iter", type=int, default=10_000, help="policy-evaluation sweep cap")
    p.add_argument(
        "--threads", type=int, default=kernels.default_threads(),
        help="worker threads for compiled sweeps (default 1, env CPMDP_THREADS)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmdp",
        description="Solve n-dimensional gridworld MDPs on sparse tensor components.",
        epilog=f"Dense-matrix cap: {dense_cap()} bytes (env CPMDP_DENSE_CAP).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-spec", help="generate a random gridworld spec file")
    p.add_argument("--dims", type=_int_list, required=True, help="axis sizes, e.g. 70,70")
    p.add_argument("--obstacles", type=int, default=0)
    p.add_argument("--terminals", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--noise", type=float, default=DEFAULT_NOISE,
        help="probability of the intended move (default 0.8; a convention, not from the experiments)",
    )
    p.add_argument("--out", "-o", help="output path (default stdout)")
    p.set_defaults(func=cmd_gen_spec)

    p = sub.add_parser("solve", help="solve a spec and write .values/.policy files")
    p.add_argument("spec")
    p.add_argument("--solver", choices=SOLVERS, default="cp-vi")
    p.add_argument("--out", "-o", help="output prefix (default: spec path without extension)")
    p.add_argument("--dump-model", action="store_true", help="also write <prefix>.components")
    _add_solver_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="compare two solvers on one spec")
    p.add_argument("spec")
    p.add_argument("solver_a", choices=SOLVERS)
    p.add_argument("solver_b", choices=SOLVERS)
    p.add_argument("--tolerance", type=float, default=1e-6)
    _add_solver_options(p)
    p.set_defaults(func=cmd_compare, epsilon=None, eval_epsilon=None)

    p = sub.add_parser("bench", help="run the scaled experiment grid and write CSV")
    p.add_argument("--scale", type=float, default=0.01, help="state-count scale in (0, 1]")
    p.add_argument("--solvers", type=_solver_list, default=list(SOLVERS))
    p.add_argument("--repeats", type=int, default=bench.DEFAULT_REPEATS, help="seeds per cell")
    p.add_argument("--D", type=_int_list, help="dimension counts to include (default all)")
    p.add_argument("--rows", type=_int_list, help="1-based table rows to include (default all)")
    p.add_argument("--seed", type=int, default=1, help="first seed")
    p.add_argument("--out", "-o", default="bench.csv")
    p.add_argument("--summary", help="also write per-cell mean/std CSV here")
    p.add_argument("--solve-only", action="store_true", help="exclude model construction from wall time")
    p.add_argument("--quiet", "-q", action="store_true")
    _add_solver_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("show-policy", help="print a policy as a grid map or state list")
    p.add_argument("spec")
    p.add_argument("--policy", help="a .policy file (default: solve the spec)")
    p.add_argument("--solver", choices=SOLVERS, default="cp-vi")
    _add_solver_options(p)
    p.set_defaults(func=cmd_show_policy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        code = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
