"""Benchmark support: cap-format parsing, instance generators, oracles, suite."""

from fractions import Fraction

import pytest

from quboforge import bench
from quboforge.bench import (
    BenchError,
    cflp_to_milp,
    generate,
    grid_oracle,
    knapsack_dp,
    make_cflp_instance,
    oracle_cflp,
    oracle_direct,
    parse_orlib_cap,
    run_suite,
    size_law_bits,
    suite_csv,
    write_orlib_cap,
)
from quboforge.binarize import plan_model
from quboforge.model import constraint_holds, evaluate


CAP_FIXTURE = "2 2  10 100  10 100  5 1 2  5 2 1"


def test_parse_cap_fixture_fields():
    inst = parse_orlib_cap(CAP_FIXTURE)
    assert inst.m == 2 and inst.n == 2
    assert inst.capacities == [10, 10]
    assert inst.fixed_costs == [100, 100]
    assert inst.demands == [5, 5]
    assert inst.assign_costs == [[1, 2], [2, 1]]


def test_parse_cap_errors_carry_positions():
    with pytest.raises(BenchError, match="unexpected end"):
        parse_orlib_cap("2 2 10 100")
    with pytest.raises(BenchError, match="not a number"):
        parse_orlib_cap("2 2 10 banana 10 100 5 1 2 5 2 1")
    with pytest.raises(BenchError, match="trailing"):
        parse_orlib_cap(CAP_FIXTURE + " 99")
    with pytest.raises(BenchError, match="capacity"):
        parse_orlib_cap("1 1 0 5 3 1")


def test_cap_roundtrip():
    inst = make_cflp_instance(3, 4, seed=9)
    again = parse_orlib_cap(write_orlib_cap(inst), name=inst.name)
    assert again.capacities == inst.capacities
    assert again.fixed_costs == inst.fixed_costs
    assert again.demands == inst.demands
    assert again.assign_costs == inst.assign_costs


def test_cflp_milp_shape():
    inst = parse_orlib_cap(CAP_FIXTURE)
    model = cflp_to_milp(inst)
    assert len(model.binary_names) == 2
    assert len(model.continuous_names) == 4
    # n serve rows + m capacity rows + m*n linking rows
    assert len(model.constraints) == 2 + 2 + 4


def test_generators_produce_valid_models():
    cases = [("knapsack", 6), ("max_clique", 6), ("mis", 6), ("cflp", 2), ("tsp_mtz", 4)]
    for problem, size in cases:
        a = generate(problem, size, seed=1)
        b = generate(problem, size, seed=1)
        assert a.name == b.name and a.constraints == b.constraints  # deterministic
        assert generate(problem, size, seed=2).constraints != () or not a.constraints
    with pytest.raises(BenchError, match="unsupported"):
        generate("sudoku", 3, seed=0)


def test_tsp_mtz_has_integer_order_variables():
    model = generate("tsp_mtz", 5, seed=0)
    kinds = {v.kind for v in model.variables}
    assert "integer" in kinds and "binary" in kinds


def test_knapsack_oracle_agreement():
    for seed in range(5):
        model = generate("knapsack", 7, seed=seed)
        val, assign = oracle_direct(model)
        values = [int(-model.objective.coef(v.name)) for v in model.variables]
        weights = [int(model.constraints[0].lhs.coef(v.name)) for v in model.variables]
        cap = int(model.constraints[0].rhs)
        assert -val == knapsack_dp(values, weights, cap)


def test_grid_oracle_on_small_cflp():
    inst = parse_orlib_cap(CAP_FIXTURE)
    model = cflp_to_milp(inst)
    plan = plan_model(model, continuous_bits=2)
    val, assign = grid_oracle(model, plan)
    assert val is not None
    assert all(constraint_holds(con, assign) for con in model.constraints)
    assert evaluate(model.objective, assign) == val


def test_oracle_cflp_matches_oracle_direct():
    inst = make_cflp_instance(3, 4, seed=11)
    opt, open_idx = oracle_cflp(inst)
    val, assign = oracle_direct(cflp_to_milp(inst))
    assert opt == val
    assert {i for i in range(inst.m) if assign[f"y{i}"] == 1} == set(open_idx)


def test_oracle_direct_reports_infeasibility():
    text = "1 1  2 10  5 1"  # capacity 2 cannot serve demand 5
    model = cflp_to_milp(parse_orlib_cap(text))
    with pytest.raises(BenchError, match="feasible"):
        oracle_direct(model)


def test_size_law():
    assert size_law_bits(4, 12, 3) == 4 + 36


def test_run_suite_captures_errors_and_serializes():
    instances = [
        ("tiny", cflp_to_milp(make_cflp_instance(2, 2, seed=0))),
        ("nolp", generate("knapsack", 4, seed=0)),  # hybrid method fails on this
    ]
    reports = run_suite(instances, config={"sweeps": 100, "max_iter": 10})
    assert {r.instance for r in reports} == {"tiny", "nolp"}
    hybrid_nolp = [r for r in reports if r.instance == "nolp" and r.method == "hybrid-benders"]
    assert hybrid_nolp and hybrid_nolp[0].error
    tiny = {r.method: r for r in reports if r.instance == "tiny"}
    assert tiny["direct-oracle"].objective is not None
    assert tiny["hybrid-benders"].objective == tiny["direct-oracle"].objective
    text = suite_csv(reports)
    assert text.splitlines()[0] == "instance,method,objective,oracle,gap,wall_s,total_bits,master_bits,iters"
    assert len(text.splitlines()) == len(reports) + 1
