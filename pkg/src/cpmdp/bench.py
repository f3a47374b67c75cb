"""Benchmark harness for the grid families of the original experiments.

Runs solvers over scaled grid configurations, records wall time, multiply
counts and deterministic byte accounting, and writes CSV.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from cpmdp.gridworld import generate_random_spec
from cpmdp.solvers import (
    SOLVERS,
    SolverConfig,
    policy_iteration,
    tabular_policy_iteration,
    tabular_value_iteration,
    value_iteration,
)
from cpmdp.statespace import SizingError
from cpmdp.transition import build_models, dense_bytes, dense_cap, storage_entries, to_tabular

# dimension count -> state counts per row; rows share (terminals, obstacles)
EXPERIMENT_DIMS = (2, 3, 5, 7, 9)
EXPERIMENT_ROWS = [
    (6, 50, (4_900, 4_000, 3_125, 2_048, 3_888)),
    (8, 100, (10_000, 8_000, 7_000, 5_184, 5_832)),
    (10, 200, (14_400, 12_500, 10_000, 9_216, 8_748)),
    (12, 300, (19_600, 18_750, 12_500, 10_368, 9_216)),
    (14, 400, (22_500, 24_000, 19_200, 18_432, 17_496)),
    (16, 500, (90_000, 60_000, 100_000, 78_125, 82_944)),
    (18, 600, (250_000, 125_000, 200_000, 233_280, 196_008)),
    (20, 700, (640_000, 512_000, 600_000, 605_052, 491_520)),
    (22, 800, (1_000_000, 1_000_000, 1_200_000, 823_543, 1_000_000)),
]
DEFAULT_REPEATS = 6
VALUE_BYTES = 8
POLICY_BYTES = 8

CSV_COLUMNS = [
    "solver", "D", "S", "A", "obstacles", "terminals", "seed", "noise", "iterations", "converged",
    "wall_time_s", "multiplies", "model_components", "model_bytes", "value_bytes", "infeasible",
]


@dataclass
class RunRecord:
    solver: str
    dims: tuple
    D: int
    S: int
    A: int
    obstacles: int
    terminals: int
    seed: int
    noise: float
    iterations: int = 0
    converged: bool = False
    wall_time_s: float = 0.0
    multiplies: int = 0
    model_components: int = 0
    model_bytes: int = 0
    value_bytes: int = 0
    infeasible: bool = False


@dataclass
class SuiteCell:
    dims: tuple
    n_obstacles: int
    n_terminals: int
    seeds: tuple
    solvers: tuple
    row: int = 0


@dataclass
class SuiteSpec:
    cells: list = field(default_factory=list)
    repeats: int = DEFAULT_REPEATS

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def _factorizations(n, parts, largest):
    """Non-increasing factor lists of length ``parts`` with product ``n``, all ``<= largest``."""
    if parts == 1:
        if 1 <= n <= largest:
            yield [n]
        return
    lo = math.ceil(round(n ** (1.0 / parts), 9))
    for f in range(min(n, largest), lo - 1, -1):
        if n % f == 0:
            for rest in _factorizations(n // f, parts - 1, f):
                yield [f] + rest


def near_equal_dims(target: int, ndim: int) -> tuple[int, ...]:
    """Axis sizes with product close to ``target`` and sizes as equal as possible.

    An exact factorization is used when one exists with largest/smallest axis
    ratio at most 2; otherwise the closest product of ``b`` and ``b + 1`` sized
    axes is taken.
    """
    target = max(1, int(target))
    best = None
    for dims in _factorizations(target, ndim, target):
        ratio = dims[0] / dims[-1]
        if best is None or ratio < best[0]:
            best = (ratio, dims)
    if best is not None and best[0] <= 2.0:
        return tuple(best[1])
    b = max(1, int(target ** (1.0 / ndim)))
    candidates = []
    for base in (b, b + 1):
        for k in range(ndim + 1):
            prod = (base + 1) ** k * base ** (ndim - k)
            candidates.append((abs(prod - target), prod, tuple([base + 1] * k + [base] * (ndim - k))))
    return min(candidates)[2]


def experiment_suite(
    scale: float = 1.0,
    solvers=("cp-vi", "cp-pi", "tab-vi", "tab-pi"),
    repeats: int = DEFAULT_REPEATS,
    dims_filter=None,
    rows=None,
    base_seed: int = 1,
) -> SuiteSpec:
    """Grid families of the experiment table with state, obstacle and terminal counts scaled by ``scale``.

    ``rows`` are 1-based table rows; ``dims_filter`` restricts the dimension
    counts.  Every cell keeps at least one terminal and one plain state.
    """
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    unknown = set(solvers) - set(SOLVERS)
    if unknown:
        raise ValueError(f"unknown solvers {sorted(unknown)}")
    cells = []
    for row_no, (n_term, n_obs, counts) in enumerate(EXPERIMENT_ROWS, start=1):
        if rows is not None and row_no not in rows:
            continue
        for ndim, count in zip(EXPERIMENT_DIMS, counts):
            if dims_filter is not None and ndim not in dims_filter:
                continue
            terminals = max(1, round(n_term * scale))
            obstacles = round(n_obs * scale)
            dims = near_equal_dims(max(round(count * scale), obstacles + terminals + 1, 2), ndim)
            states = math.prod(dims)
            if states <= obstacles + terminals:
                obstacles = max(0, states - terminals - 1)
                terminals = min(terminals, states - obstacles - 1)
            seeds = tuple(base_seed + i for i in range(repeats))
            cells.append(SuiteCell(dims, obstacles, terminals, seeds, tuple(solvers), row_no))
    return SuiteSpec(cells, repeats)


def measure_run(spec, solver: str, cfg: SolverConfig = SolverConfig(), cap_bytes=None, solve_only=False) -> RunRecord:
    """Build the model for ``spec`` and run ``solver``, timing build + solve.

    Tabular solvers whose dense model exceeds the cap produce a record flagged
    ``infeasible`` instead of raising.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    S, A = spec.n_states, spec.n_actions
    rec = RunRecord(
        solver, tuple(spec.shape), spec.ndim, S, A, len(spec.obstacles), len(spec.terminals), spec.seed, spec.noise
    )
    cap = dense_cap() if cap_bytes is None else cap_bytes
    tabular = solver.startswith("tab")
    if tabular and dense_bytes(S, A) > cap:
        rec.infeasible = True
        rec.model_bytes = dense_bytes(S, A)
        rec.model_components = S * S * A
        return rec

    t0 = time.perf_counter()
    cm, rm = build_models(spec)
    if tabular:
        tm = to_tabular(cm, cap_bytes=cap)
    t_build = time.perf_counter()
    if solver == "cp-vi":
        res = value_iteration(cm, rm, cfg)
    elif solver == "cp-pi":
        res = policy_iteration(cm, rm, cfg)
    elif solver == "tab-vi":
        res = tabular_value_iteration(tm, rm, cfg)
    else:
        res = tabular_policy_iteration(tm, rm, cfg)
    t_end = time.perf_counter()

    rec.iterations = res.iterations
    rec.converged = res.converged
    rec.wall_time_s = t_end - (t_build if solve_only else t0)
    rec.multiplies = res.multiplies
    if tabular:
        rec.model_components = S * S * A
        rec.model_bytes = dense_bytes(S, A)
    else:
        rec.model_components, rec.model_bytes = storage_entries(cm)
    # two value buffers and the policy; PI keeps the previous policy as well
    n_policies = 2 if solver.endswith("pi") else 1
    rec.value_bytes = 2 * S * VALUE_BYTES + n_policies * S * POLICY_BYTES
    return rec


def run_suite(suite: SuiteSpec, cfg: SolverConfig = SolverConfig(), cap_bytes=None, solve_only=False, progress=None):
    records = []
    for cell in suite.cells:
        for seed in cell.seeds:
            spec = generate_random_spec(cell.dims, cell.n_obstacles, cell.n_terminals, seed)
            for solver in cell.solvers:
                rec = measure_run(spec, solver, cfg, cap_bytes=cap_bytes, solve_only=solve_only)
                records.append(rec)
                if progress:
                    progress(rec)
    return records


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_csv(records, path) -> None:
    """Header plus one row per record, columns in ``CSV_COLUMNS`` order."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                row = asdict(rec)
                writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def aggregate(records) -> list[dict]:
    """Mean and sample standard deviation of time, iterations and multiplies per (cell, solver)."""
    groups: dict = {}
    for rec in records:
        key = (rec.solver, rec.dims, rec.obstacles, rec.terminals)
        groups.setdefault(key, []).append(rec)
    out = []
    for (solver, dims, obstacles, terminals), recs in groups.items():
        done = [r for r in recs if not r.infeasible]
        row = {
            "solver": solver,
            "dims": "x".join(map(str, dims)),
            "S": recs[0].S,
            "obstacles": obstacles,
            "terminals": terminals,
            "runs": len(recs),
            "infeasible": len(recs) - len(done),
        }
        for name in ("wall_time_s", "iterations", "multiplies"):
            values = [float(getattr(r, name)) for r in done]
            row[f"{name}_mean"] = statistics.fmean(values) if values else math.nan
            row[f"{name}_std"] = statistics.stdev(values) if len(values) > 1 else 0.0
        row["model_bytes"] = recs[0].model_bytes
        out.append(row)
    return out


def emit_summary_csv(rows, path) -> None:
    if not rows:
        columns = ["solver", "dims", "S"]
    else:
        columns = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
