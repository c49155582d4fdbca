"""Command-line driver: end-to-end runs, output artifacts, exit codes."""

import json

import pytest

from quboforge import bench
from quboforge.cli import EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_PARSE, EXIT_SOLVER, main
from quboforge.model import serialize_model

PNG_MAGIC = b"\x89PNG"


@pytest.fixture
def knapsack_file(tmp_path):
    path = tmp_path / "knap.json"
    path.write_text(serialize_model(bench.generate("knapsack", 5, seed=3)))
    return path


@pytest.fixture
def cflp_file(tmp_path):
    model = bench.cflp_to_milp(bench.make_cflp_instance(3, 4, seed=11))
    path = tmp_path / "cflp.json"
    path.write_text(serialize_model(model))
    return path


def test_compile_solve_pipeline(tmp_path, knapsack_file):
    out = tmp_path / "out"
    assert main(["compile", str(knapsack_file), "--out", str(out)]) == 0
    artifact = next(out.glob("*.qubo"))
    summary = json.loads((out / "plan_summary.json").read_text())
    assert summary["total_bits"] >= summary["non_slack_bits"] >= 5
    assert (out / "manifest.json").exists()

    sol_dir = tmp_path / "sol"
    assert main(["solve", str(artifact), "--method", "exhaustive",
                 "--out", str(sol_dir)]) == 0
    text = (sol_dir / "solution.txt").read_text()
    assert "proven_optimal True" in text

    sa_dir = tmp_path / "sa"
    assert main(["solve", str(artifact), "--method", "sa", "--seed", "1",
                 "--out", str(sa_dir)]) == 0
    assert (sa_dir / "trace.csv").read_text().startswith("sweep,")
    assert (sa_dir / "trace.png").read_bytes()[:4] == PNG_MAGIC


def test_benders_command_renders_report(tmp_path, cflp_file):
    out = tmp_path / "bd"
    assert main(["benders", str(cflp_file), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "converged"
    assert report["lower_bound"] <= report["objective"]
    assert (out / "convergence.csv").read_text().startswith("iter,")
    assert (out / "convergence.png").read_bytes()[:4] == PNG_MAGIC


def test_bench_command_over_directory(tmp_path):
    inst_dir = tmp_path / "instances"
    inst_dir.mkdir()
    inst = bench.make_cflp_instance(2, 2, seed=0)
    (inst_dir / "tiny.cap").write_text(bench.write_orlib_cap(inst))
    (inst_dir / "knap.json").write_text(
        serialize_model(bench.generate("knapsack", 4, seed=0)))
    out = tmp_path / "suite"
    code = main(["bench", str(inst_dir), "--sweeps", "100", "--max-iter", "10",
                 "--out", str(out)])
    assert code == 0
    lines = (out / "suite.csv").read_text().splitlines()
    assert lines[0].startswith("instance,method")
    assert len(lines) == 1 + 2 * 3  # two instances x three methods
    assert (out / "suite.png").read_bytes()[:4] == PNG_MAGIC
    # per-run figures accompany the delimited outputs
    assert list(out.glob("*_trace.png")) and list(out.glob("*_convergence.png"))


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["compile", str(bad), "--out", str(tmp_path / "o")]) == EXIT_PARSE
    assert main(["compile", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_PARSE


def test_budget_error_exit_code(tmp_path, knapsack_file):
    assert main(["compile", str(knapsack_file), "--budget", "2",
                 "--out", str(tmp_path / "o")]) == EXIT_BUDGET


def test_infeasible_exit_code(tmp_path):
    model = bench.cflp_to_milp(bench.parse_orlib_cap("1 1  2 10  5 1"))
    path = tmp_path / "infeasible.json"
    path.write_text(serialize_model(model))
    assert main(["benders", str(path), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_solver_error_exit_code(tmp_path, knapsack_file):
    # a pure-binary model has no subproblem for the decomposition
    assert main(["benders", str(knapsack_file),
                 "--out", str(tmp_path / "o")]) == EXIT_SOLVER


def test_bad_penalty_flag(tmp_path, knapsack_file):
    assert main(["compile", str(knapsack_file), "--penalty", "cheap",
                 "--out", str(tmp_path / "o")]) == EXIT_PARSE
