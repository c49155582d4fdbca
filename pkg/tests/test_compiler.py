"""QUBO compilation: penalty construction, special structures, artifact IO."""

import random
from fractions import Fraction
from itertools import product

import pytest

from quboforge.binarize import plan_model
from quboforge.compiler import (
    CompileError,
    _poly_from_linear,
    _poly_to_quadform,
    compile_model,
    estimate_weight,
    read_artifact,
    special_structure,
    write_artifact,
)
from quboforge.model import Constraint, LinExpr, Variable, canonicalize, constraint_holds
from quboforge.solvers import decode


def knapsack_model():
    variables = [Variable(f"x{i}", "binary", Fraction(0), Fraction(1)) for i in range(3)]
    obj = LinExpr.build([("x0", 4), ("x1", 3), ("x2", 5)])
    cons = [Constraint("cap", LinExpr.build([("x0", 2), ("x1", 3), ("x2", 4)]),
                       "<=", Fraction(5))]
    return canonicalize("knap", "max", variables, obj, cons)


def all_assignments(artifact):
    for bits in product((0, 1), repeat=artifact.total_bits):
        yield bits, decode(artifact.plan, bits)


def decision_names(model):
    return [v.name for v in model.variables]


def test_penalty_zeroing_and_separation():
    model = knapsack_model()
    artifact = compile_model(model)
    con = model.constraints[0]
    # Group every full assignment by the decision part; the penalty must reach
    # zero over the slack bits iff the constraint holds, and stay >= 1 in
    # integer-scaled units when it is violated.
    (name, form, weight) = artifact.penalties[0]
    assert name == "cap"
    best = {}
    for bits, values in all_assignments(artifact):
        key = tuple(values[n] for n in decision_names(model))
        e = form.energy(bits)
        best[key] = min(best.get(key, e), e)
    for key, e in best.items():
        assignment = dict(zip(decision_names(model), key))
        if constraint_holds(con, assignment):
            assert e == 0
        else:
            assert e >= 1


def test_cost_penalty_separation():
    model = knapsack_model()
    artifact = compile_model(model)
    # The cost form carries the objective alone: on any feasible assignment
    # with zero penalties, the assembled energy equals the model objective.
    for bits, values in all_assignments(artifact):
        if all(form.energy(bits) == 0 for _, form, _ in artifact.penalties):
            obj = sum(model.objective.coef(n) * values[n] for n in decision_names(model))
            obj += model.objective.constant
            assert artifact.assembled().energy(bits) == obj


def test_estimate_weight_covers_objective_range():
    model = knapsack_model()
    plan = plan_model(model)
    assert estimate_weight(model, plan) == 1 + 4 + 3 + 5


def test_penalty_override_parameter():
    model = knapsack_model()
    artifact = compile_model(model, penalty=Fraction(99))
    assert all(w == 99 for _, _, w in artifact.penalties)


def test_constraint_weight_override():
    variables = [Variable("x", "binary", Fraction(0), Fraction(1))]
    cons = [Constraint("pin", LinExpr.build([("x", 1)]), "=", Fraction(1),
                       weight_override=Fraction(7))]
    model = canonicalize("m", "min", variables, LinExpr.build([("x", 1)]), cons)
    artifact = compile_model(model)
    assert artifact.penalties[0][2] == 7


def pairwise_model(coef):
    variables = [Variable("x", "binary", Fraction(0), Fraction(1)),
                 Variable("y", "binary", Fraction(0), Fraction(1))]
    cons = [Constraint("ex", LinExpr.build([("x", coef), ("y", coef)]), "<=",
                       Fraction(coef))]
    return canonicalize("m", "min", variables, LinExpr.build([]), cons)


@pytest.mark.parametrize("coef", [1, 2, 5])
def test_special_pairwise_exclusion(coef):
    model = pairwise_model(coef)
    plan = plan_model(model)
    form = special_structure(model.constraints[0], model, plan)
    assert form is not None
    assert form.offdiag == {(0, 1): Fraction(1)} and not form.diag
    artifact = compile_model(model)
    assert artifact.total_bits == 2  # no slack for the special structure
    for bits in product((0, 1), repeat=2):
        expect = 0 if bits[0] + bits[1] <= 1 else 1
        assert artifact.penalties[0][1].energy(bits) == expect


def test_special_indicator():
    variables = [Variable("x", "binary", Fraction(0), Fraction(1)),
                 Variable("y", "binary", Fraction(0), Fraction(1))]
    cons = [Constraint("link", LinExpr.build([("x", 1), ("y", -1)]), "<=", Fraction(0))]
    model = canonicalize("m", "min", variables, LinExpr.build([]), cons)
    artifact = compile_model(model)
    assert artifact.total_bits == 2
    for bits in product((0, 1), repeat=2):
        x, y = bits
        assert artifact.penalties[0][1].energy(bits) == (1 if x > y else 0)


def test_special_structure_ignores_non_binary():
    variables = [Variable("x", "binary", Fraction(0), Fraction(1)),
                 Variable("u", "integer", Fraction(0), Fraction(3))]
    cons = [Constraint("c", LinExpr.build([("x", 1), ("u", 1)]), "<=", Fraction(1))]
    model = canonicalize("m", "min", variables, LinExpr.build([]), cons)
    plan = plan_model(model)
    assert special_structure(model.constraints[0], model, plan) is None


def test_degree_guard_rejects_cubic():
    poly = _poly_from_linear([(0, Fraction(1)), (1, Fraction(1))], Fraction(0))
    cubic = {(0, 1, 2): Fraction(1)}
    cubic.update(poly)
    with pytest.raises(CompileError, match="degree"):
        _poly_to_quadform(cubic, 3, "test")


def test_equality_contradiction_detected():
    variables = [Variable("x", "binary", Fraction(0), Fraction(1))]
    cons = [Constraint("bad", LinExpr.build([("x", 1), ("x", -1)]), "=", Fraction(2))]
    model = canonicalize("m", "min", variables, LinExpr.build([]), cons)
    with pytest.raises(CompileError, match="contradiction"):
        compile_model(model)


def test_artifact_roundtrip():
    model = knapsack_model()
    artifact = compile_model(model)
    loaded = read_artifact(write_artifact(artifact))
    assert loaded.form.n == artifact.total_bits
    rng = random.Random(3)
    for _ in range(50):
        bits = tuple(rng.randint(0, 1) for _ in range(artifact.total_bits))
        assert loaded.form.energy(bits) == artifact.assembled().energy(bits)
        assert decode(loaded.plan, bits) == decode(artifact.plan, bits)


def test_budget_propagates_to_artifact():
    model = knapsack_model()
    artifact = compile_model(model)
    # cap needs a 6-value slack range [0,5]: 3 slack bits on top of 3 binaries
    assert artifact.total_bits == 6
    assert artifact.non_slack_bits == 3
