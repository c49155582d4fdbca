"""Binary encoding plans for integer, continuous and slack variables.

Integer variables in [0, U] get k = ceil(log2(U+1)) bits with the final bit
weight capped to U - (2^(k-1) - 1) so no bit pattern decodes out of range.
Continuous variables get a K-bit uniform grid over [lb, ub]. Slack variables
for inequalities are sized "just enough" from the interval-arithmetic range of
the left-hand side, in scaled-integer units when the data allows it.

An optional hardware budget caps the total bit count; non-binary precision is
shaved greedily (largest group first) until the budget holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import Constraint, LinExpr, MilpModel, Variable


class BudgetError(Exception):
    """Raised when a bit budget cannot be satisfied."""


class InfeasibleConstraintError(Exception):
    """Raised when a constraint can never hold over the encoded ranges."""


@dataclass
class BitGroup:
    owner: str  # variable name, or constraint name for slacks
    role: str  # integer-expansion | continuous-expansion | slack
    weights: tuple  # tuple of Fraction, one per bit
    offset: Fraction
    bit_ids: tuple = ()  # assigned when added to a plan

    @property
    def n_bits(self) -> int:
        return len(self.weights)

    @property
    def max_value(self) -> Fraction:
        return self.offset + sum(self.weights, Fraction(0))

    def decode(self, bits) -> Fraction:
        value = self.offset
        for w, b in zip(self.weights, bits):
            if b:
                value += w
        return value


@dataclass
class EncodingPlan:
    groups: list = field(default_factory=list)  # list of BitGroup
    native_binary: dict = field(default_factory=dict)  # var name -> bit id
    total_bits: int = 0
    budget: Optional[int] = None
    continuous_bits: int = 4
    reserved_slack_bits: int = 0

    def add_binary(self, name: str):
        self.native_binary[name] = self.total_bits
        self.total_bits += 1

    def add_group(self, group: BitGroup) -> BitGroup:
        group.bit_ids = tuple(range(self.total_bits, self.total_bits + group.n_bits))
        self.total_bits += group.n_bits
        self.groups.append(group)
        return group

    def group_for(self, owner: str) -> Optional[BitGroup]:
        for g in self.groups:
            if g.owner == owner and g.role != "slack":
                return g
        return None

    def bit_terms(self, name: str):
        """Encoding of one decision variable as [(bit_id, weight)], offset."""
        if name in self.native_binary:
            return [(self.native_binary[name], Fraction(1))], Fraction(0)
        g = self.group_for(name)
        if g is None:
            raise KeyError(f"no encoding for variable {name!r}")
        return list(zip(g.bit_ids, g.weights)), g.offset

    def var_range(self, name: str):
        """Encoded (min, max) of a decision variable."""
        if name in self.native_binary:
            return Fraction(0), Fraction(1)
        g = self.group_for(name)
        if g is None:
            raise KeyError(f"no encoding for variable {name!r}")
        return g.offset, g.max_value

    def bit_owner_table(self):
        """Rows (bit_id, owner, role, weight, offset) for artifact headers."""
        rows = []
        for name, bid in self.native_binary.items():
            rows.append((bid, name, "binary", Fraction(1), Fraction(0)))
        for g in self.groups:
            for i, bid in enumerate(g.bit_ids):
                rows.append((bid, g.owner, g.role, g.weights[i], g.offset))
        rows.sort(key=lambda r: r[0])
        return rows


def bits_for(U: int) -> int:
    """k = ceil(log2(U+1)); exact for arbitrarily large U."""
    if U < 0:
        raise ValueError("U must be nonnegative")
    return (int(U)).bit_length()


def plan_integer(U, owner="", offset=Fraction(0), max_bits=None) -> BitGroup:
    """Binary expansion of an integer range [0, U], final weight capped at U.

    max_bits truncates the representable range (hardware budget); the group
    then tops out at 2^max_bits - 1 (or U if smaller).
    """
    U = int(U)
    if U < 0:
        raise ValueError("U must be nonnegative")
    if max_bits is not None and U > (1 << max_bits) - 1:
        U = (1 << max_bits) - 1
    k = bits_for(U)
    if k == 0:
        return BitGroup(owner=owner, role="integer-expansion", weights=(), offset=offset)
    weights = [Fraction(1 << i) for i in range(k - 1)]
    weights.append(Fraction(U - ((1 << (k - 1)) - 1)))
    return BitGroup(owner=owner, role="integer-expansion", weights=tuple(weights), offset=offset)


def plan_continuous(lb, ub, K: int, owner="") -> BitGroup:
    """K-bit uniform grid over [lb, ub]: weights (ub-lb)*2^i/(2^K-1)."""
    lb, ub = Fraction(lb), Fraction(ub)
    if not lb < ub:
        raise ValueError("plan_continuous requires lb < ub")
    if K < 1:
        raise ValueError("plan_continuous requires K >= 1")
    span = ub - lb
    denom = (1 << K) - 1
    weights = tuple(span * (1 << i) / denom for i in range(K))
    return BitGroup(owner=owner, role="continuous-expansion", weights=weights, offset=lb)


def _lhs_interval(lhs: LinExpr, plan: EncodingPlan):
    lo = hi = Fraction(0)
    for name, coef in lhs.terms:
        vmin, vmax = plan.var_range(name)
        if coef >= 0:
            lo += coef * vmin
            hi += coef * vmax
        else:
            lo += coef * vmax
            hi += coef * vmin
    return lo, hi


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def slack_scale(lhs: LinExpr, rhs: Fraction, plan: EncodingPlan) -> int:
    """Smallest positive integer L making every encoded coefficient and the
    rhs integral when multiplied by L."""
    L = rhs.denominator
    for name, coef in lhs.terms:
        terms, offset = plan.bit_terms(name)
        L = _lcm(L, (coef * offset).denominator)
        for _, w in terms:
            L = _lcm(L, (coef * w).denominator)
    return L


# Above this many slack bits the exact scaled-integer slack is abandoned in
# favour of a plain K-bit continuous slack (loses exact zeroing, keeps size).
SLACK_BIT_CAP = 64


def plan_slack(lhs: LinExpr, sense: str, rhs, plan: EncodingPlan, owner="slack") -> BitGroup:
    """Size a slack for an inequality from the encoded range of its lhs.

    For `lhs <= rhs` the slack covers [0, rhs - min(lhs)]; `>=` is mirrored by
    negation. Integer (after LCM scaling) data gets an exact integer
    expansion in units of 1/L; data that would need too many bits falls back
    to a continuous grid with the plan's configured K.
    """
    rhs = Fraction(rhs)
    if sense == ">=":
        neg = LinExpr.build([(n, -c) for n, c in lhs.terms])
        return plan_slack(neg, "<=", -rhs, plan, owner=owner)
    if sense != "<=":
        raise ValueError("plan_slack requires an inequality")

    lo, hi = _lhs_interval(lhs, plan)
    if rhs < lo:
        raise InfeasibleConstraintError(
            f"constraint {owner!r} infeasible for all assignments (min lhs {lo} > rhs {rhs})"
        )
    span = rhs - lo  # slack upper bound in original units
    if span == 0:
        return BitGroup(owner=owner, role="slack", weights=(), offset=Fraction(0))

    L = slack_scale(lhs, rhs, plan)
    scaled = span * L
    if scaled.denominator == 1 and bits_for(int(scaled)) <= SLACK_BIT_CAP:
        g = plan_integer(int(scaled), owner=owner)
        return BitGroup(
            owner=owner,
            role="slack",
            weights=tuple(w / L for w in g.weights),
            offset=Fraction(0),
        )
    return BitGroup(
        owner=owner,
        role="slack",
        weights=plan_continuous(0, span, plan.continuous_bits).weights,
        offset=Fraction(0),
    )


def _decision_groups(model: MilpModel, continuous_bits: int, caps: dict):
    """Plan groups for all non-binary decision variables, honoring per-variable
    bit caps (from budget shaving)."""
    plan = EncodingPlan(continuous_bits=continuous_bits)
    for v in model.variables:
        if v.kind == "binary":
            plan.add_binary(v.name)
    for v in model.variables:
        if v.kind == "integer":
            U = int(v.ub)
            group = plan_integer(U, owner=v.name, offset=v.shift, max_bits=caps.get(v.name))
            plan.add_group(group)
        elif v.kind == "continuous":
            if v.lb == v.ub:
                plan.add_group(
                    BitGroup(owner=v.name, role="continuous-expansion", weights=(), offset=v.lb)
                )
                continue
            K = caps.get(v.name, continuous_bits)
            plan.add_group(plan_continuous(v.lb, v.ub, K, owner=v.name))
    return plan


def _estimate_slack_bits(model: MilpModel, plan: EncodingPlan) -> int:
    from .compiler import special_structure  # late import; avoids module cycle

    total = 0
    for con in model.constraints:
        if con.sense == "=":
            continue
        if special_structure(con, model, plan) is not None:
            continue
        total += plan_slack(con.lhs, con.sense, con.rhs, plan, owner=con.name).n_bits
    return total


def plan_model(model: MilpModel, budget: Optional[int] = None, continuous_bits: int = 4) -> EncodingPlan:
    """Plan the full bit layout: native binaries, then integer and continuous
    expansions in declaration order. Slack bits are reserved (worst case)
    against the budget; the compiler appends the actual slack groups later.
    """
    n_binary = sum(1 for v in model.variables if v.kind == "binary")
    if budget is not None and budget < n_binary:
        raise BudgetError(
            f"budget {budget} below the {n_binary} native binary variables; "
            "binaries cannot be compressed"
        )

    caps: dict = {}
    while True:
        plan = _decision_groups(model, continuous_bits, caps)
        slack_bits = _estimate_slack_bits(model, plan)
        plan.reserved_slack_bits = slack_bits
        plan.budget = budget
        if budget is None or plan.total_bits + slack_bits <= budget:
            return plan
        # Shave one bit from the largest non-binary group that still has >1 bit.
        candidates = [g for g in plan.groups if g.n_bits > 1]
        if not candidates:
            raise BudgetError(
                f"budget {budget} unsatisfiable: {plan.total_bits + slack_bits} bits "
                "needed with every variable already at minimum precision"
            )
        largest = max(candidates, key=lambda g: (g.n_bits, g.bit_ids[0]))
        caps[largest.owner] = largest.n_bits - 1
