"""MILP + encoding plan -> QUBO artifact.

Equalities become squared penalties (LHS - RHS)^2; inequalities get a
just-enough binarized slack and become (LHS + s - RHS)^2. Two special
structures skip the slack path: pairwise exclusion x_i + x_j <= 1 (penalty
x_i * x_j) and the indicator x <= y (penalty x * (1 - y)).

Penalty expansion runs through a multilinear polynomial over bit variables
with b^2 = b reduction; anything of degree > 2 aborts compilation, so
higher-order residue (the classic MTZ-without-slack mistake) cannot slip
through. Constraints with fractional encoded coefficients are scaled to
integers first, which keeps the minimum nonzero violation at >= 1 scaled unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .binarize import BitGroup, EncodingPlan, plan_model, plan_slack
from .model import Constraint, LinExpr, MilpModel, to_rational


class CompileError(Exception):
    pass


@dataclass
class QuadForm:
    """Quadratic form over bits: constant + sum diag[i] b_i + sum offdiag[i,j] b_i b_j."""

    n: int
    diag: dict = field(default_factory=dict)  # bit -> Fraction
    offdiag: dict = field(default_factory=dict)  # (i, j), i < j -> Fraction
    constant: Fraction = Fraction(0)

    def energy(self, bits) -> Fraction:
        if len(bits) != self.n:
            raise ValueError(f"assignment length {len(bits)} != form size {self.n}")
        e = self.constant
        for i, c in self.diag.items():
            if bits[i]:
                e += c
        for (i, j), c in self.offdiag.items():
            if bits[i] and bits[j]:
                e += c
        return e

    def add_scaled(self, other: "QuadForm", scale: Fraction):
        for i, c in other.diag.items():
            self.diag[i] = self.diag.get(i, Fraction(0)) + scale * c
        for k, c in other.offdiag.items():
            self.offdiag[k] = self.offdiag.get(k, Fraction(0)) + scale * c
        self.constant += scale * other.constant

    def pruned(self) -> "QuadForm":
        return QuadForm(
            n=self.n,
            diag={i: c for i, c in self.diag.items() if c != 0},
            offdiag={k: c for k, c in self.offdiag.items() if c != 0},
            constant=self.constant,
        )


# --- multilinear polynomials over bits (degree guard lives here) -------------

def _poly_from_linear(pairs, constant) -> dict:
    poly = {frozenset(): Fraction(constant)}
    for bit, coef in pairs:
        key = frozenset((bit,))
        poly[key] = poly.get(key, Fraction(0)) + coef
    return poly


def _poly_square(poly: dict) -> dict:
    items = [(k, c) for k, c in poly.items() if c != 0]
    out: dict = {}
    for a, (ka, ca) in enumerate(items):
        for kb, cb in items[a:]:
            key = ka | kb  # b^2 = b reduction
            coef = ca * cb if ka == kb else 2 * ca * cb
            out[key] = out.get(key, Fraction(0)) + coef
    return out


def _poly_to_quadform(poly: dict, n: int, where: str) -> QuadForm:
    form = QuadForm(n=n)
    for key, coef in poly.items():
        if coef == 0:
            continue
        if len(key) == 0:
            form.constant += coef
        elif len(key) == 1:
            (i,) = key
            form.diag[i] = form.diag.get(i, Fraction(0)) + coef
        elif len(key) == 2:
            i, j = sorted(key)
            form.offdiag[(i, j)] = form.offdiag.get((i, j), Fraction(0)) + coef
        else:
            raise CompileError(
                f"{where}: term of degree {len(key)} survived reduction; "
                "penalty is not quadratic"
            )
    return form


def _encoded_linear(lhs: LinExpr, plan: EncodingPlan, constant=Fraction(0)):
    """Substitute encodings into a model-space linear expression.

    Returns ([(bit, coef)], constant) in bit space.
    """
    pairs: dict = {}
    const = Fraction(constant)
    for name, coef in lhs.terms:
        terms, offset = plan.bit_terms(name)
        const += coef * offset
        for bit, w in terms:
            pairs[bit] = pairs.get(bit, Fraction(0)) + coef * w
    return list(pairs.items()), const


def _integer_scale(pairs, constant) -> int:
    L = Fraction(constant).denominator
    for _, c in pairs:
        L = L // math.gcd(L, c.denominator) * c.denominator
    return L


# --- compilation --------------------------------------------------------------

def compile_objective(model: MilpModel, plan: EncodingPlan) -> QuadForm:
    pairs, const = _encoded_linear(model.objective, plan, model.objective.constant)
    form = QuadForm(n=plan.total_bits, constant=const)
    for bit, coef in pairs:
        if coef != 0:
            form.diag[bit] = form.diag.get(bit, Fraction(0)) + coef
    return form


def _squared_penalty(pairs, constant, n, where) -> QuadForm:
    # Scale to integer coefficients so a violated assignment costs >= 1.
    L = _integer_scale(pairs, constant)
    poly = _poly_from_linear([(b, c * L) for b, c in pairs], constant * L)
    return _poly_to_quadform(_poly_square(poly), n, where).pruned()


def compile_equality(con: Constraint, plan: EncodingPlan) -> QuadForm:
    if con.sense != "=":
        raise CompileError(f"constraint {con.name!r}: compile_equality needs '='")
    pairs, const = _encoded_linear(con.lhs, plan, -con.rhs)
    if not pairs:
        if const != 0:
            raise CompileError(f"constraint {con.name!r}: contradiction {const} = 0")
        return QuadForm(n=plan.total_bits)
    return _squared_penalty(pairs, const, plan.total_bits, f"constraint {con.name!r}")


def compile_inequality(con: Constraint, plan: EncodingPlan):
    """Slack-penalized inequality. Returns (QuadForm, slack BitGroup or None);
    the slack group is appended to the plan."""
    if con.sense not in ("<=", ">="):
        raise CompileError(f"constraint {con.name!r}: compile_inequality needs an inequality")
    lhs, rhs = con.lhs, con.rhs
    if con.sense == ">=":
        lhs = LinExpr.build([(n, -c) for n, c in lhs.terms])
        rhs = -rhs
    slack = plan_slack(lhs, "<=", rhs, plan, owner=con.name)
    pairs, const = _encoded_linear(lhs, plan, -rhs)
    if not pairs and slack.n_bits == 0:
        # 0 <= rhs, trivially satisfied (plan_slack rejects the infeasible case)
        return QuadForm(n=plan.total_bits), None
    plan.add_group(slack)
    for bit, w in zip(slack.bit_ids, slack.weights):
        pairs.append((bit, w))
    form = _squared_penalty(pairs, const, plan.total_bits, f"constraint {con.name!r}")
    return form, slack


def special_structure(con: Constraint, model: MilpModel, plan: EncodingPlan) -> Optional[QuadForm]:
    """Recognize constraints with a compact penalty needing no slack.

    Handles pairwise exclusion (x_i + x_j <= 1 -> x_i x_j) and the indicator
    (x <= y -> x(1-y)) over native binary variables, scale-invariantly.
    """
    if con.sense == "=":
        return None
    lhs, rhs = con.lhs, con.rhs
    if con.sense == ">=":
        lhs = LinExpr.build([(n, -c) for n, c in lhs.terms])
        rhs = -rhs
    if len(lhs.terms) != 2:
        return None
    (na, ca), (nb, cb) = lhs.terms
    if na not in plan.native_binary or nb not in plan.native_binary:
        return None
    if ca == 0 or cb == 0:
        return None
    # Divide by the positive gcd of the (rational) coefficients.
    g = Fraction(
        math.gcd(abs(ca.numerator), abs(cb.numerator)),
        ca.denominator * cb.denominator // math.gcd(ca.denominator, cb.denominator),
    )
    ca, cb, rhs = ca / g, cb / g, rhs / g
    ia, ib = plan.native_binary[na], plan.native_binary[nb]
    if ca == 1 and cb == 1 and rhs == 1:
        i, j = sorted((ia, ib))
        return QuadForm(n=plan.total_bits, offdiag={(i, j): Fraction(1)})
    if rhs == 0 and {ca, cb} == {Fraction(1), Fraction(-1)}:
        x, y = (ia, ib) if ca == 1 else (ib, ia)
        i, j = sorted((x, y))
        return QuadForm(
            n=plan.total_bits, diag={x: Fraction(1)}, offdiag={(i, j): Fraction(-1)}
        )
    return None


detect_special = special_structure


def estimate_weight(model: MilpModel, plan: EncodingPlan) -> Fraction:
    """Default penalty weight: 1 + the attainable objective range, so one unit
    of (scaled) violation always outweighs any objective improvement."""
    P = Fraction(1)
    for name, coef in model.objective.terms:
        lo, hi = plan.var_range(name)
        P += abs(coef) * (hi - lo)
    return P


@dataclass
class QuboArtifact:
    cost: QuadForm
    penalties: list  # list of (constraint name, QuadForm, Fraction weight)
    plan: EncodingPlan
    model_name: str = "model"
    _assembled: Optional[QuadForm] = None

    @property
    def total_bits(self) -> int:
        return self.plan.total_bits

    @property
    def non_slack_bits(self) -> int:
        return self.plan.total_bits - sum(
            g.n_bits for g in self.plan.groups if g.role == "slack"
        )

    def assembled(self) -> QuadForm:
        if self._assembled is None:
            self._assembled = assemble(self)
        return self._assembled


def assemble(artifact: QuboArtifact) -> QuadForm:
    n = artifact.plan.total_bits
    total = QuadForm(n=n, constant=artifact.cost.constant)
    # Forms were compiled while the plan was still growing; widths differ, the
    # bit ids do not, so entrywise accumulation in fixed order is safe.
    total.add_scaled(QuadForm(n=n, diag=dict(artifact.cost.diag),
                              offdiag=dict(artifact.cost.offdiag)), Fraction(1))
    for _, form, weight in artifact.penalties:
        total.add_scaled(form, weight)
    return total.pruned()


def compile_model(model: MilpModel, plan: Optional[EncodingPlan] = None,
                  budget: Optional[int] = None, continuous_bits: int = 4,
                  penalty: Optional[Fraction] = None) -> QuboArtifact:
    """Full pipeline: plan (unless given), objective, penalties, weights.

    penalty overrides the automatic default weight for every constraint that
    does not carry its own weight_override."""
    if plan is None:
        plan = plan_model(model, budget=budget, continuous_bits=continuous_bits)
    cost = compile_objective(model, plan)
    P_default = penalty if penalty is not None else estimate_weight(model, plan)
    penalties = []
    for con in model.constraints:
        special = special_structure(con, model, plan)
        if special is not None:
            form = special
        elif con.sense == "=":
            form = compile_equality(con, plan)
        else:
            form, _ = compile_inequality(con, plan)
        weight = con.weight_override if con.weight_override is not None else P_default
        penalties.append((con.name, form, weight))
    # Forms compiled early saw a smaller plan; widen to the final bit count.
    cost.n = plan.total_bits
    for _, form, _ in penalties:
        form.n = plan.total_bits
    if plan.budget is not None and plan.total_bits > plan.budget:
        from .binarize import BudgetError

        raise BudgetError(
            f"compiled artifact needs {plan.total_bits} bits, budget {plan.budget}"
        )
    artifact = QuboArtifact(cost=cost, penalties=penalties, plan=plan, model_name=model.name)
    artifact.assembled()
    return artifact


# --- artifact file format -----------------------------------------------------

def write_artifact(artifact: QuboArtifact) -> str:
    q = artifact.assembled()
    lines = [f"#vars {artifact.plan.total_bits}", f"#constant {q.constant}"]
    for name, _, weight in artifact.penalties:
        lines.append(f"#weight {name} {weight}")
    for bid, owner, role, weight, offset in artifact.plan.bit_owner_table():
        lines.append(f"#bit {bid} {owner} {role} {weight} {offset}")
    entries = [(i, i, c) for i, c in q.diag.items()] + [
        (i, j, c) for (i, j), c in q.offdiag.items()
    ]
    for i, j, c in sorted(entries):
        lines.append(f"{i} {j} {c}")
    return "\n".join(lines) + "\n"


@dataclass
class LoadedArtifact:
    """Assembled form plus enough plan to decode, read back from a file."""

    form: QuadForm
    plan: EncodingPlan
    weights: dict  # constraint name -> Fraction


def read_artifact(text: str) -> LoadedArtifact:
    n = None
    constant = Fraction(0)
    weights: dict = {}
    bit_rows = []
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "#vars":
                n = int(tok[1])
            elif tok[0] == "#constant":
                constant = Fraction(tok[1])
            elif tok[0] == "#weight":
                weights[" ".join(tok[1:-1])] = Fraction(tok[-1])
            elif tok[0] == "#bit":
                bid = int(tok[1])
                owner = " ".join(tok[2:-3])
                role, weight, offset = tok[-3], Fraction(tok[-2]), Fraction(tok[-1])
                bit_rows.append((bid, owner, role, weight, offset))
            else:
                i, j, c = int(tok[0]), int(tok[1]), Fraction(tok[2])
                entries.append((i, j, c))
        except (IndexError, ValueError) as exc:
            raise CompileError(f"artifact line {lineno}: cannot parse {raw!r}") from exc
    if n is None:
        raise CompileError("artifact missing #vars header")
    form = QuadForm(n=n, constant=constant)
    for i, j, c in entries:
        if not (0 <= i <= j < n):
            raise CompileError(f"artifact entry ({i},{j}) out of range for {n} bits")
        if i == j:
            form.diag[i] = form.diag.get(i, Fraction(0)) + c
        else:
            form.offdiag[(i, j)] = form.offdiag.get((i, j), Fraction(0)) + c

    plan = EncodingPlan()
    bit_rows.sort()
    current = None
    for bid, owner, role, weight, offset in bit_rows:
        if role == "binary":
            plan.native_binary[owner] = bid
            current = None
        else:
            if current is None or current.owner != owner or current.role != role:
                current = BitGroup(owner=owner, role=role, weights=(), offset=offset)
                current.bit_ids = ()
                plan.groups.append(current)
            current.weights = current.weights + (weight,)
            current.bit_ids = current.bit_ids + (bid,)
    plan.total_bits = n
    return LoadedArtifact(form=form, plan=plan, weights=weights)
