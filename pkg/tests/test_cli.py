import csv
import subprocess
import sys

import pytest

from cpmdp.cli import EXIT_CAPACITY, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from cpmdp.gridworld import GridSpec, generate_random_spec


@pytest.fixture
def chain_file(tmp_path, chain):
    path = tmp_path / "chain.json"
    chain.save(path)
    return path


@pytest.fixture
def grid_file(tmp_path):
    path = tmp_path / "grid.json"
    generate_random_spec([10, 10], 8, 4, seed=7).save(path)
    return path


def test_gen_spec_table_row(tmp_path, capsys):
    out = tmp_path / "g.json"
    code = main(["gen-spec", "--dims", "70,70", "--obstacles", "50", "--terminals", "6", "--seed", "1", "--out", str(out)])
    assert code == EXIT_OK
    assert "S=4900" in capsys.readouterr().out
    spec = GridSpec.load(out)
    assert spec.n_states == 4_900 and len(spec.obstacles) == 50 and len(spec.terminals) == 6


def test_gen_spec_chain_and_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["gen-spec", "--dims", "2", "--terminals", "1", "--obstacles", "0", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert GridSpec.load(a).n_states == 2


def test_gen_spec_infeasible(tmp_path, capsys):
    code = main(["gen-spec", "--dims", "2,2", "--obstacles", "3", "--terminals", "1", "--out", str(tmp_path / "x")])
    assert code == EXIT_CAPACITY
    assert "error" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["solve"]) == EXIT_USAGE
    assert main(["gen-spec", "--dims", "a,b"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_solve_chain(chain_file, tmp_path, capsys):
    prefix = tmp_path / "out"
    assert main(["solve", str(chain_file), "--solver", "cp-vi", "--out", str(prefix)]) == 0
    assert (tmp_path / "out.values").read_text() == "0 87.000000000000\n1 100.000000000000\n"
    assert (tmp_path / "out.policy").read_text() == "0 1\n"
    stats = capsys.readouterr().out.strip()
    assert stats.startswith("solver=cp-vi,D=1,S=2,A=2")
    assert "converged=true" in stats


def test_solve_gamma_zero_gives_rewards(grid_file, tmp_path):
    prefix = tmp_path / "g0"
    assert main(["solve", str(grid_file), "--gamma", "0", "--out", str(prefix)]) == 0
    spec = GridSpec.load(grid_file)
    values = [float(line.split()[1]) for line in (tmp_path / "g0.values").read_text().splitlines()]
    for s, v in enumerate(values):
        expected = 0.0 if s in spec.obstacles else spec.terminals.get(s, -3.0)
        assert v == expected


def test_solve_cp_and_tab_same_policy_file(grid_file, tmp_path):
    for solver in ("cp-vi", "tab-vi"):
        assert main(["solve", str(grid_file), "--solver", solver, "--out", str(tmp_path / solver)]) == 0
    assert (tmp_path / "cp-vi.policy").read_bytes() == (tmp_path / "tab-vi.policy").read_bytes()


def test_solve_dense_cap_exit_code(grid_file, tmp_path, monkeypatch):
    monkeypatch.setenv("CPMDP_DENSE_CAP", "1000")
    assert main(["solve", str(grid_file), "--solver", "tab-vi", "--out", str(tmp_path / "x")]) == EXIT_CAPACITY


def test_solve_io_errors(grid_file, tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_IO
    assert main(["solve", str(grid_file), "--out", str(tmp_path / "no" / "dir" / "x")]) == EXIT_IO


def test_solve_dump_model(chain_file, tmp_path):
    assert main(["solve", str(chain_file), "--dump-model", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c.components").read_text().startswith("# action 0\n0 0 1.0\n")


@pytest.mark.parametrize("pair", [("cp-vi", "tab-vi"), ("cp-vi", "cp-pi"), ("cp-pi", "tab-pi"), ("cp-vi", "cp-vi")])
def test_compare_exit_zero(grid_file, capsys, pair):
    assert main(["compare", str(grid_file), *pair, "--tolerance", "1e-6"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "disagreements with Q-gap > 1e-06: 0" in out
    if pair[0] == pair[1]:
        assert "value sup-norm difference: 0.000000e+00" in out
        assert "policy disagreements: 0" in out


def test_compare_detects_mismatch(grid_file, capsys):
    # two PI rounds stop well short of the optimum
    assert main(["compare", str(grid_file), "cp-vi", "cp-pi", "--max-iter", "2"]) == 4
    assert "MISMATCH" in capsys.readouterr().out


def test_compare_infeasible(grid_file, monkeypatch):
    monkeypatch.setenv("CPMDP_DENSE_CAP", "10")
    assert main(["compare", str(grid_file), "cp-vi", "tab-vi"]) == EXIT_CAPACITY


def test_bench_plumbing(tmp_path):
    out = tmp_path / "b.csv"
    summary = tmp_path / "s.csv"
    args = ["bench", "--scale", "0.01", "--solvers", "cp-vi,tab-vi", "--repeats", "2", "--D", "2,3", "--rows", "1,2",
            "--out", str(out), "--summary", str(summary), "-q"]
    assert main(args) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 * 2 * 2
    assert {r["solver"] for r in rows} == {"cp-vi", "tab-vi"}
    first = [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    assert main(args) == 0
    again = [{k: v for k, v in r.items() if k != "wall_time_s"} for r in csv.DictReader(out.open())]
    assert first == again
    assert summary.exists()


def test_bench_infeasible_cells_still_exit_zero(tmp_path, monkeypatch):
    monkeypatch.setenv("CPMDP_DENSE_CAP", "1")
    out = tmp_path / "b.csv"
    assert main(["bench", "--scale", "0.01", "--solvers", "tab-vi", "--repeats", "1", "--rows", "1", "--out", str(out), "-q"]) == 0
    assert all(r["infeasible"] == "true" for r in csv.DictReader(out.open()))


def test_bench_default_repeats():
    from cpmdp.cli import build_parser

    args = build_parser().parse_args(["bench", "--scale", "1", "--solvers", "cp-vi", "--D", "2", "--rows", "1"])
    assert args.repeats == 6


def test_show_policy_grid(grid_file, capsys):
    assert main(["show-policy", str(grid_file)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 10 and all(len(line) == 10 for line in lines)
    spec = GridSpec.load(grid_file)
    text = "".join(lines)
    assert text.count("#") == len(spec.obstacles)
    assert text.count("+") + text.count("-") == len(spec.terminals)


def test_show_policy_from_file(chain_file, tmp_path, capsys):
    main(["solve", str(chain_file), "--out", str(tmp_path / "c")])
    capsys.readouterr()
    assert main(["show-policy", str(chain_file), "--policy", str(tmp_path / "c.policy")]) == 0
    assert capsys.readouterr().out == "0 [0] +x0\n1 [1] terminal 100\n"


def test_module_entry_point(chain_file):
    proc = subprocess.run([sys.executable, "-m", "cpmdp", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-spec" in proc.stdout
