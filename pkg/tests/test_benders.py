"""Hybrid decomposition: partitioning, subproblem duals, cut validity, driver."""

import random
from fractions import Fraction
from itertools import product

import pytest

from quboforge import bench
from quboforge.benders import (
    _CUT_GRID,
    _snap_cut,
    BendersError,
    build_master,
    BendersState,
    convergence_csv,
    feasibility_cut,
    optimality_cut,
    partition,
    run,
    solve_sub,
)
from quboforge.model import LinExpr, Variable, canonicalize
from quboforge.simplex import LpProblem, check_certificates, solve_lp


def cflp(m, n, seed):
    inst = bench.make_cflp_instance(m, n, seed=seed)
    return inst, bench.cflp_to_milp(inst)


def all_y(part):
    for bits in product((0, 1), repeat=len(part.master_vars)):
        yield dict(zip(part.master_vars, map(Fraction, bits)))


def test_partition_splits_cflp():
    inst, model = cflp(2, 3, seed=0)
    part = partition(model)
    assert part.master_vars == [f"y{i}" for i in range(2)]
    assert len(part.sub_vars) == 6
    # every sub row touches x; facility bound rows are appended per sub var
    ub_rows = [r for r in part.sub_rows if r.name.startswith("__ub::")]
    assert len(ub_rows) == 6
    assert not part.master_only


def test_partition_requires_continuous_vars():
    model = bench.generate("knapsack", 4, seed=0)
    with pytest.raises(BendersError, match="monolithic"):
        partition(model)


def test_partition_rejects_continuous_master_hint():
    variables = [
        Variable("y", "binary", Fraction(0), Fraction(1)),
        Variable("x", "continuous", Fraction(0), Fraction(1), partition_hint="master"),
    ]
    model = canonicalize("m", "min", variables, LinExpr.build([("x", 1)]), [])
    with pytest.raises(BendersError, match="master"):
        partition(model)


def test_partition_binarizes_integer_masters():
    variables = [
        Variable("u", "integer", Fraction(0), Fraction(5)),
        Variable("x", "continuous", Fraction(0), Fraction(10)),
    ]
    model = canonicalize("m", "min", variables, LinExpr.build([("u", 1), ("x", 1)]), [])
    part = partition(model)
    assert "u" in part.int_expansions
    assert part.master_vars == ["u__bit0", "u__bit1", "u__bit2"]


def sub_lp(part, y):
    """The subproblem as an explicit LpProblem, bypassing the presolve."""
    names = part.sub_vars
    pos = {n: k for k, n in enumerate(names)}
    rows = []
    for r in part.sub_rows:
        coeffs = [Fraction(0)] * len(names)
        for v, a in r.ax.items():
            coeffs[pos[v]] = a
        rhs = r.rhs0 - sum((c * y[n] for n, c in r.by.items()), Fraction(0))
        rows.append((r.name, coeffs, r.sense, rhs))
    return LpProblem(n=len(names), c=[part.c_sub[v] for v in names], rows=rows)


def test_solve_sub_matches_direct_lp_with_certificates():
    inst, model = cflp(3, 4, seed=11)
    part = partition(model)
    for y in all_y(part):
        sol = solve_sub(part, y, force_exact=True)
        direct = solve_lp(sub_lp(part, y))
        assert sol.status == direct.status
        if sol.status == "optimal":
            assert sol.objective == direct.objective
        # presolve-recovered duals/rays must certify on the full row set
        assert check_certificates(sub_lp(part, y), sol)


def test_cuts_are_valid_bounds():
    inst, model = cflp(3, 4, seed=11)
    part = partition(model)
    costs = {}
    for y in all_y(part):
        sol = solve_sub(part, y, force_exact=True)
        key = tuple(int(y[n]) for n in part.master_vars)
        costs[key] = sol.objective if sol.status == "optimal" else None

    for y in all_y(part):
        sol = solve_sub(part, y, force_exact=True)
        if sol.status == "optimal":
            cut = optimality_cut(part, sol.duals, 0)
            for y2 in all_y(part):
                key = tuple(int(y2[n]) for n in part.master_vars)
                if costs[key] is not None:
                    # eta >= cut.value(y2) never overestimates the true cost
                    assert cut.value(y2) <= costs[key]
        else:
            cut = feasibility_cut(part, sol.ray, 0)
            assert cut is not None
            assert cut.value(y) > 0  # cuts off the infeasible point...
            for y2 in all_y(part):
                key = tuple(int(y2[n]) for n in part.master_vars)
                if costs[key] is not None:
                    assert cut.value(y2) <= 0  # ...but never a feasible one


def test_snap_cut_weakens_but_stays_valid():
    rng = random.Random(5)
    names = [f"y{i}" for i in range(8)]
    for _ in range(50):
        coeffs = {
            n: Fraction(rng.randint(-10**12, 10**12), rng.randint(10**11, 10**12))
            for n in names
        }
        constant = Fraction(rng.randint(-10**12, 10**12), rng.randint(10**11, 10**12))
        snapped, const2 = _snap_cut(coeffs, constant)
        for c in snapped.values():
            assert _CUT_GRID % c.denominator == 0
        assert _CUT_GRID % const2.denominator == 0
        for bits in [tuple(rng.randint(0, 1) for _ in names) for _ in range(20)]:
            y = dict(zip(names, bits))
            before = constant + sum(coeffs[n] * y[n] for n in names)
            after = const2 + sum(snapped.get(n, Fraction(0)) * y[n] for n in names)
            assert after <= before
            assert before - after < Fraction(len(names) + 2, 1 << 20)


def test_run_converges_to_oracle():
    inst, model = cflp(4, 6, seed=42)
    report = run(model, master_solver="exhaustive", max_iter=50, seed=0)
    opt, open_idx = bench.oracle_cflp(inst)
    assert report.status == "converged"
    assert report.incumbent_cost == opt
    lbs = [h[1] for h in report.history if h[1] is not None]
    ubs = [h[3] for h in report.history if h[3] is not None]
    assert all(a <= b for a, b in zip(lbs, lbs[1:]))
    assert all(a >= b for a, b in zip(ubs, ubs[1:]))
    assert report.gap is not None and report.gap <= Fraction(1, 10**6)
    # the incumbent assignment is readable in model-variable terms
    assert set(report.incumbent_y) == set(f"y{i}" for i in range(4))


def test_run_with_sa_master_reports_consistent_bounds():
    inst, model = cflp(4, 6, seed=42)
    report = run(model, master_solver="sa", max_iter=20, seed=0,
                 sa_sweeps=200, sa_restarts=2)
    assert report.incumbent_cost is not None
    assert report.lb is not None
    assert report.lb <= report.incumbent_cost
    assert report.gap is not None


def test_run_enum_cap_enforced():
    inst, model = cflp(23, 2, seed=0)
    with pytest.raises(BendersError, match="cap|sa"):
        run(model, master_solver="exhaustive")


def test_build_master_compiles_with_cuts():
    inst, model = cflp(3, 4, seed=11)
    part = partition(model)
    state = BendersState()
    state.eta_hi = Fraction(1000)
    y = {n: Fraction(1) for n in part.master_vars}
    sol = solve_sub(part, y, force_exact=True)
    state.cuts.append(optimality_cut(part, sol.duals, 0))
    artifact = build_master(part, state, eta_bits=6)
    assert artifact.total_bits >= len(part.master_vars) + 6


def test_convergence_csv_shape():
    inst, model = cflp(2, 2, seed=7)
    report = run(model, master_solver="exhaustive", max_iter=50, seed=0)
    text = convergence_csv(report)
    lines = text.strip().splitlines()
    assert lines[0] == "iter,lb,ub,best_ub,master_obj,sub_cost,cut_kind,master_bits,elapsed_s"
    assert len(lines) == len(report.history) + 1
