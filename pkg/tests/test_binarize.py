"""Bit-encoding plans: integer expansions, continuous grids, slack sizing,
hardware budgets."""

import random
from fractions import Fraction
from itertools import product

import pytest

from quboforge.binarize import (
    BudgetError,
    EncodingPlan,
    InfeasibleConstraintError,
    SLACK_BIT_CAP,
    bits_for,
    plan_continuous,
    plan_integer,
    plan_model,
    plan_slack,
)
from quboforge.model import Constraint, LinExpr, Variable, canonicalize


def group_values(group):
    vals = set()
    for bits in product((0, 1), repeat=group.n_bits):
        vals.add(group.decode(bits))
    return vals


def test_bits_for():
    assert bits_for(0) == 0
    assert bits_for(1) == 1
    assert bits_for(511) == 9
    assert bits_for(512) == 10
    assert bits_for(600) == 10
    with pytest.raises(ValueError):
        bits_for(-1)


def test_plan_integer_covers_range_exactly():
    rng = random.Random(0)
    for U in [0, 1, 2, 3, 5, 7, 8] + [rng.randint(9, 40) for _ in range(10)]:
        g = plan_integer(U)
        assert g.n_bits == bits_for(U)
        # Every integer in [0, U] is representable and nothing decodes outside.
        assert group_values(g) == {Fraction(v) for v in range(U + 1)}


def test_plan_integer_final_weight_capped():
    g = plan_integer(600)
    assert g.weights[:-1] == tuple(Fraction(1 << i) for i in range(9))
    assert g.weights[-1] == 600 - 511
    assert g.max_value == 600


def test_plan_integer_max_bits_truncates():
    g = plan_integer(600, max_bits=9)
    assert g.n_bits == 9
    assert g.max_value == 511


def test_plan_continuous_grid():
    g = plan_continuous(Fraction(-1), Fraction(3), 4)
    assert g.n_bits == 4
    assert g.decode((0, 0, 0, 0)) == -1
    assert g.decode((1, 1, 1, 1)) == 3
    step = Fraction(4, 15)
    assert sorted(group_values(g)) == [Fraction(-1) + step * i for i in range(16)]


def plan_for(variables):
    model = canonicalize("m", "min", variables, LinExpr.build([]), [])
    return plan_model(model)


def test_plan_slack_fractional_coefficients_scaled():
    plan = EncodingPlan()
    plan.add_binary("x")
    plan.add_binary("y")
    lhs = LinExpr.build([("x", Fraction(1, 3)), ("y", Fraction(1, 2))])
    g = plan_slack(lhs, "<=", Fraction(1), plan, owner="c")
    # Scale L = 6 makes every coefficient integral; slack spans [0, 1] in
    # units of 1/6, so lhs + slack can hit the rhs exactly for every
    # satisfying assignment.
    lhs_vals = {Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(5, 6)}
    slack_vals = group_values(g)
    for v in lhs_vals:
        assert Fraction(1) - v in slack_vals


def test_plan_slack_infeasible_detected():
    plan = EncodingPlan()
    plan.add_binary("x")
    with pytest.raises(InfeasibleConstraintError):
        plan_slack(LinExpr.build([("x", Fraction(1))]), ">=", Fraction(2), plan, owner="c")


def test_plan_slack_zero_span():
    plan = EncodingPlan()
    plan.add_binary("x")
    g = plan_slack(LinExpr.build([("x", Fraction(1))]), "<=", Fraction(0), plan)
    assert g.n_bits == 0


def test_plan_slack_oversized_falls_back_to_continuous():
    plan = EncodingPlan(continuous_bits=5)
    plan.add_binary("x")
    big = Fraction(1 << (SLACK_BIT_CAP + 6))
    g = plan_slack(LinExpr.build([("x", big)]), "<=", big, plan, owner="c")
    assert g.role == "slack"
    assert g.n_bits == 5  # continuous grid at the plan's configured width
    assert g.max_value == big


def test_plan_model_layout_order():
    variables = [
        Variable("b0", "binary", Fraction(0), Fraction(1)),
        Variable("u", "integer", Fraction(0), Fraction(6)),
        Variable("t", "continuous", Fraction(0), Fraction(1)),
    ]
    plan = plan_for(variables)
    assert plan.native_binary == {"b0": 0}
    owners = [g.owner for g in plan.groups]
    assert owners == ["u", "t"]
    assert plan.total_bits == 1 + 3 + 4


def test_plan_model_fixed_continuous_needs_no_bits():
    variables = [Variable("t", "continuous", Fraction(2), Fraction(2))]
    plan = plan_for(variables)
    assert plan.total_bits == 0
    assert plan.var_range("t") == (Fraction(2), Fraction(2))


def test_budget_shaves_integer_precision():
    # 15 native binaries plus one integer in [0, 600] under a 24-bit budget:
    # the 10-bit expansion must shrink to exactly 9 bits.
    variables = [Variable(f"b{i}", "binary", Fraction(0), Fraction(1)) for i in range(15)]
    variables.append(Variable("load", "integer", Fraction(0), Fraction(600)))
    model = canonicalize("m", "min", variables, LinExpr.build([]), [])
    plan = plan_model(model, budget=24)
    (group,) = plan.groups
    assert group.n_bits == 9
    assert plan.total_bits == 24


def test_budget_below_binaries_rejected():
    variables = [Variable(f"b{i}", "binary", Fraction(0), Fraction(1)) for i in range(15)]
    model = canonicalize("m", "min", variables, LinExpr.build([]), [])
    with pytest.raises(BudgetError, match="binar"):
        plan_model(model, budget=14)


def test_budget_unsatisfiable_at_minimum_precision():
    variables = [
        Variable("b0", "binary", Fraction(0), Fraction(1)),
        Variable("u", "integer", Fraction(0), Fraction(600)),
    ]
    model = canonicalize("m", "min", variables, LinExpr.build([]), [])
    with pytest.raises(BudgetError, match="unsatisfiable"):
        plan_model(model, budget=1)


def test_budget_reserves_slack_bits():
    variables = [
        Variable("x", "binary", Fraction(0), Fraction(1)),
        Variable("y", "binary", Fraction(0), Fraction(1)),
    ]
    cons = [Constraint("c", LinExpr.build([("x", Fraction(3)), ("y", Fraction(5))]),
                       "<=", Fraction(7))]
    model = canonicalize("m", "min", variables, LinExpr.build([]), cons)
    plan = plan_model(model)
    assert plan.reserved_slack_bits == 3  # slack range [0, 7]
