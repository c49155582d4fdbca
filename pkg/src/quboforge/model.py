"""MILP intermediate representation: variables, linear expressions, constraints.

Models enter through :func:`parse_model` (JSON-like structured documents) or are
built programmatically and pushed through :func:`canonicalize`. Either way the
result is a minimization model with folded constants, unique names and
zero-based integer variables; downstream modules rely on that.

All coefficients and bounds are exact :class:`fractions.Fraction` values.
Floats only appear at solver boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional


class ModelError(Exception):
    """Raised for parse or validation failures; message carries the location."""


VAR_KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", "=", ">=")


def to_rational(value, where: str = "") -> Fraction:
    """Parse an exact rational from an int, Fraction or decimal string."""
    if isinstance(value, bool):
        raise ModelError(f"{where}: boolean is not a number")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        s = value.strip()
        if s.lower() in ("inf", "+inf", "-inf", "infinity", "-infinity", "nan"):
            raise ModelError(f"{where}: non-finite value {value!r}")
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"{where}: cannot parse number {value!r}") from exc
    if isinstance(value, float):
        # Only reachable for callers that bypass exact JSON decoding.
        if value != value or value in (float("inf"), float("-inf")):
            raise ModelError(f"{where}: non-finite value {value!r}")
        return Fraction(value).limit_denominator(10**12)
    raise ModelError(f"{where}: expected a number, got {type(value).__name__}")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # binary | integer | continuous
    lb: Fraction
    ub: Fraction
    shift: Fraction = Fraction(0)  # original lb for shifted integer variables
    partition_hint: Optional[str] = None  # master | sub

    @property
    def width(self) -> Fraction:
        return self.ub - self.lb


@dataclass(frozen=True)
class LinExpr:
    """Canonical linear expression: at most one term per variable."""

    terms: tuple  # tuple of (var name, Fraction coef)
    constant: Fraction = Fraction(0)

    @staticmethod
    def build(pairs, constant=Fraction(0)) -> "LinExpr":
        acc: dict = {}
        for name, coef in pairs:
            acc[name] = acc.get(name, Fraction(0)) + Fraction(coef)
        terms = tuple((n, c) for n, c in acc.items() if c != 0)
        return LinExpr(terms=terms, constant=Fraction(constant))

    def coef(self, name: str) -> Fraction:
        for n, c in self.terms:
            if n == name:
                return c
        return Fraction(0)

    def names(self):
        return [n for n, _ in self.terms]


@dataclass(frozen=True)
class Constraint:
    name: str
    lhs: LinExpr
    sense: str  # <= | = | >=
    rhs: Fraction
    weight_override: Optional[Fraction] = None


@dataclass(frozen=True)
class MilpModel:
    name: str
    sense: str  # always "min" after canonicalization
    variables: tuple  # tuple of Variable
    objective: LinExpr
    constraints: tuple  # tuple of Constraint
    source_sense: str = "min"  # sense as authored, before normalization

    def var(self, name: str) -> Variable:
        return self._var_index()[name]

    def _var_index(self) -> dict:
        idx = getattr(self, "_vidx", None)
        if idx is None:
            idx = {v.name: v for v in self.variables}
            object.__setattr__(self, "_vidx", idx)
        return idx

    @property
    def binary_names(self):
        return [v.name for v in self.variables if v.kind == "binary"]

    @property
    def continuous_names(self):
        return [v.name for v in self.variables if v.kind == "continuous"]


def canonicalize(name, sense, variables, objective, constraints) -> MilpModel:
    """Normalize a raw model: min sense, folded constants, shifted integers.

    Raises ModelError on any invariant violation.
    """
    if sense not in ("min", "max"):
        raise ModelError(f"model {name!r}: sense must be 'min' or 'max', got {sense!r}")

    seen = set()
    for v in variables:
        if v.name in seen:
            raise ModelError(f"duplicate variable name {v.name!r}")
        seen.add(v.name)
        if v.kind not in VAR_KINDS:
            raise ModelError(f"variable {v.name!r}: unknown kind {v.kind!r}")
        if v.kind == "binary":
            if v.lb != 0 or v.ub != 1:
                raise ModelError(f"variable {v.name!r}: binary requires lb=0, ub=1")
        else:
            if v.lb > v.ub:
                raise ModelError(f"variable {v.name!r}: lb > ub")
            if v.kind == "integer" and (v.lb.denominator != 1 or v.ub.denominator != 1):
                raise ModelError(f"variable {v.name!r}: integer bounds must be integral")
        if v.partition_hint not in (None, "master", "sub"):
            raise ModelError(f"variable {v.name!r}: bad partition hint {v.partition_hint!r}")

    # Shift integer variables with nonzero lower bound to [0, ub-lb].
    shifts = {}
    canon_vars = []
    for v in variables:
        if v.kind == "integer" and v.lb != 0:
            shifts[v.name] = v.lb
            canon_vars.append(replace(v, lb=Fraction(0), ub=v.ub - v.lb, shift=v.lb))
        else:
            canon_vars.append(v)

    def check_refs(expr: LinExpr, where: str):
        for n, _ in expr.terms:
            if n not in seen:
                raise ModelError(f"{where}: term references undeclared variable {n!r}")

    check_refs(objective, "objective")

    obj_terms = dict(objective.terms)
    obj_const = objective.constant
    for vn, sh in shifts.items():
        if vn in obj_terms:
            obj_const += obj_terms[vn] * sh

    if sense == "max":
        obj_terms = {n: -c for n, c in obj_terms.items()}
        obj_const = -obj_const
    objective_c = LinExpr.build(obj_terms.items(), obj_const)

    cnames = set()
    canon_cons = []
    for con in constraints:
        if con.name in cnames:
            raise ModelError(f"duplicate constraint name {con.name!r}")
        cnames.add(con.name)
        if con.sense not in SENSES:
            raise ModelError(f"constraint {con.name!r}: bad sense {con.sense!r}")
        if con.weight_override is not None and con.weight_override <= 0:
            raise ModelError(f"constraint {con.name!r}: weight must be positive")
        check_refs(con.lhs, f"constraint {con.name!r}")
        rhs = con.rhs - con.lhs.constant
        terms = dict(LinExpr.build(con.lhs.terms).terms)
        for vn, sh in shifts.items():
            if vn in terms:
                rhs -= terms[vn] * sh
        canon_cons.append(
            Constraint(
                name=con.name,
                lhs=LinExpr.build(terms.items()),
                sense=con.sense,
                rhs=rhs,
                weight_override=con.weight_override,
            )
        )

    return MilpModel(
        name=name,
        sense="min",
        variables=tuple(canon_vars),
        objective=objective_c,
        constraints=tuple(canon_cons),
        source_sense=sense,
    )


def _get(obj: dict, key: str, where: str, required=True, default=None):
    if key not in obj:
        if required:
            raise ModelError(f"{where}: missing field {key!r}")
        return default
    return obj[key]


def _check_fields(obj: dict, allowed, where: str):
    for k in obj:
        if k not in allowed:
            raise ModelError(f"{where}: unknown field {k!r}")


def _parse_expr(obj: dict, where: str) -> LinExpr:
    _check_fields(obj, {"terms", "constant"}, where)
    pairs = []
    for i, t in enumerate(_get(obj, "terms", where, required=False, default=[])):
        tw = f"{where}.terms[{i}]"
        if not isinstance(t, dict):
            raise ModelError(f"{tw}: expected an object")
        _check_fields(t, {"var", "coef", "vars"}, tw)
        if "vars" in t:
            raise ModelError(f"{tw}: nonlinear term (product of variables) is not supported")
        var = _get(t, "var", tw)
        if not isinstance(var, str):
            raise ModelError(f"{tw}: var must be a string")
        if "*" in var or "^" in var:
            raise ModelError(f"{tw}: nonlinear expression syntax {var!r} is not supported")
        pairs.append((var, to_rational(_get(t, "coef", tw), tw)))
    const = obj.get("constant", 0)
    return LinExpr.build(pairs, to_rational(const, f"{where}.constant"))


def parse_model(text: str) -> MilpModel:
    """Parse a structured-model document (UTF-8 JSON) into a canonical model."""
    try:
        doc = json.loads(text, parse_float=Fraction, parse_int=int)
    except json.JSONDecodeError as exc:
        raise ModelError(f"line {exc.lineno}: invalid document: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ModelError("document root must be an object")
    _check_fields(doc, {"name", "sense", "variables", "objective", "constraints"}, "model")

    name = _get(doc, "name", "model", required=False, default="model")
    sense = _get(doc, "sense", "model")
    variables = []
    for i, v in enumerate(_get(doc, "variables", "model")):
        w = f"variables[{i}]"
        _check_fields(v, {"name", "kind", "lb", "ub", "partition"}, w)
        kind = _get(v, "kind", w)
        vname = _get(v, "name", w)
        if kind == "binary":
            lb = to_rational(v.get("lb", 0), f"{w}.lb")
            ub = to_rational(v.get("ub", 1), f"{w}.ub")
        else:
            raw_lb, raw_ub = _get(v, "lb", w), _get(v, "ub", w)
            for raw, fld in ((raw_lb, "lb"), (raw_ub, "ub")):
                if isinstance(raw, str) and raw.strip().lstrip("+-").lower() in ("inf", "infinity"):
                    raise ModelError(f"{w}.{fld}: non-finite bound on {kind} variable {vname!r}")
            lb = to_rational(raw_lb, f"{w}.lb")
            ub = to_rational(raw_ub, f"{w}.ub")
        variables.append(
            Variable(name=vname, kind=kind, lb=lb, ub=ub, partition_hint=v.get("partition"))
        )

    objective = _parse_expr(_get(doc, "objective", "model"), "objective")
    constraints = []
    for i, c in enumerate(_get(doc, "constraints", "model", required=False, default=[])):
        w = f"constraints[{i}]"
        _check_fields(c, {"name", "terms", "constant", "sense", "rhs", "weight"}, w)
        cname = c.get("name", f"c{i}")
        lhs = _parse_expr({"terms": _get(c, "terms", w), "constant": c.get("constant", 0)}, w)
        weight = c.get("weight")
        constraints.append(
            Constraint(
                name=cname,
                lhs=lhs,
                sense=_get(c, "sense", w),
                rhs=to_rational(_get(c, "rhs", w), f"{w}.rhs"),
                weight_override=None if weight is None else to_rational(weight, f"{w}.weight"),
            )
        )

    return canonicalize(name, sense, variables, objective, constraints)


def serialize_model(model: MilpModel) -> str:
    """Serialize a canonical model; parse_model(serialize_model(m)) == m."""
    def num(x: Fraction) -> str:
        return str(x)

    doc = {
        "name": model.name,
        "sense": "min",
        "variables": [
            {
                "name": v.name,
                "kind": v.kind,
                "lb": num(v.lb),
                "ub": num(v.ub),
                **({"partition": v.partition_hint} if v.partition_hint else {}),
            }
            for v in model.variables
        ],
        "objective": {
            "terms": [{"var": n, "coef": num(c)} for n, c in model.objective.terms],
            "constant": num(model.objective.constant),
        },
        "constraints": [
            {
                "name": c.name,
                "terms": [{"var": n, "coef": num(co)} for n, co in c.lhs.terms],
                "sense": c.sense,
                "rhs": num(c.rhs),
                **({"weight": num(c.weight_override)} if c.weight_override is not None else {}),
            }
            for c in model.constraints
        ],
    }
    return json.dumps(doc, indent=1)


def validate(model: MilpModel):
    """Re-check model invariants; returns a list of diagnostics (empty = valid)."""
    diags = []
    seen = set()
    for v in model.variables:
        if v.name in seen:
            diags.append(f"duplicate variable name {v.name!r}")
        seen.add(v.name)
        if v.lb > v.ub:
            diags.append(f"variable {v.name!r}: lb > ub")
        if v.kind == "binary" and (v.lb != 0 or v.ub != 1):
            diags.append(f"variable {v.name!r}: binary bounds must be [0, 1]")
        if v.kind not in VAR_KINDS:
            diags.append(f"variable {v.name!r}: unknown kind {v.kind!r}")
    if model.sense != "min":
        diags.append("model sense must be 'min' after canonicalization")

    def check_expr(expr: LinExpr, where: str):
        names = expr.names()
        if len(names) != len(set(names)):
            diags.append(f"{where}: duplicate terms on one variable")
        for n in names:
            if n not in seen:
                diags.append(f"{where}: undeclared variable {n!r}")

    check_expr(model.objective, "objective")
    cseen = set()
    for c in model.constraints:
        if c.name in cseen:
            diags.append(f"duplicate constraint name {c.name!r}")
        cseen.add(c.name)
        check_expr(c.lhs, f"constraint {c.name!r}")
        if c.lhs.constant != 0:
            diags.append(f"constraint {c.name!r}: constant not folded into rhs")
        if c.sense not in SENSES:
            diags.append(f"constraint {c.name!r}: bad sense {c.sense!r}")
    return diags


def evaluate(expr: LinExpr, assignment: dict) -> Fraction:
    """Value of a linear expression under a variable assignment."""
    total = expr.constant
    for n, c in expr.terms:
        total += c * assignment[n]
    return total


def constraint_holds(con: Constraint, assignment: dict) -> bool:
    lhs = evaluate(con.lhs, assignment)
    if con.sense == "<=":
        return lhs <= con.rhs
    if con.sense == ">=":
        return lhs >= con.rhs
    return lhs == con.rhs
