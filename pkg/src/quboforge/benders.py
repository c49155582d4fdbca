"""Hybrid Benders decomposition: QUBO master over the binaries, LP subproblem
over the continuous variables, linked by optimality and feasibility cuts.

The master is recompiled to a QUBO artifact every iteration. It is solved
either by structured enumeration over the binary vector (exact; the surrogate
eta and all cut slacks are optimized analytically, which matches the
exhaustive QUBO argmin while staying tractable as cuts accumulate) or by
simulated annealing on the assembled artifact. With an exact master the
reported lower bound is a true bound; with SA the bound comes from the exact
LP relaxation of the master instead.

Subproblems are solved by the exact simplex after a presolve that fixes
variables forced to zero by the current binaries and drops redundant bound
rows; duals for eliminated rows are recovered so certificates stay exact.
Very large subproblems fall back to a float LP backend (scipy/HiGHS) with
rationalized duals and a small safety margin on the resulting cuts.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .binarize import plan_integer
from .compiler import QuboArtifact, compile_model
from .model import Constraint, LinExpr, MilpModel, Variable, canonicalize, constraint_holds
from .simplex import LpProblem, LpSolution, solve_lp
from .solvers import solve_sa


class BendersError(Exception):
    pass


ETA = "__eta"
EXACT_LP_CELL_LIMIT = 400_000  # rows*cols above this, use the float LP backend
MASTER_ENUM_CAP = 22
_ENUM_CHUNK = 1 << 16


@dataclass
class SubRow:
    name: str
    ax: dict  # sub var -> Fraction (coefficients on shifted x' = x - lb)
    by: dict  # master var -> Fraction
    sense: str
    rhs0: Fraction  # rhs before subtracting the y contribution


@dataclass
class Partition:
    master_vars: list  # binary names, in order
    sub_vars: list  # continuous names, in order
    f: dict  # objective coefficients on master vars
    c_sub: dict  # objective coefficients on sub vars
    obj_constant: Fraction  # model constant + objective part of fixed/shifted x
    master_only: list  # Constraints over master vars only
    sub_rows: list  # SubRows (model constraints touching x, then ub helpers)
    sub_lb: dict  # sub var -> lb (shift applied in rows)
    int_expansions: dict  # original integer var -> ([(bit name, weight)], shift)


@dataclass
class Cut:
    """optimality: eta >= value(y); feasibility/no-good: value(y) <= 0."""

    kind: str  # optimality | feasibility | no-good
    coeffs: dict  # master var -> Fraction
    constant: Fraction
    source_iteration: int = 0

    def value(self, y: dict) -> Fraction:
        v = self.constant
        for name, c in self.coeffs.items():
            v += c * y[name]
        return v


@dataclass
class BendersState:
    cuts: list = field(default_factory=list)
    incumbent_y: Optional[dict] = None
    incumbent_x: Optional[dict] = None
    incumbent_cost: Optional[Fraction] = None
    eta_lo: Fraction = Fraction(0)
    eta_hi: Fraction = Fraction(0)
    iteration: int = 0


@dataclass
class BendersReport:
    status: str  # converged | max_iter | no_incumbent | infeasible
    incumbent_y: Optional[dict]
    incumbent_x: Optional[dict]
    incumbent_cost: Optional[Fraction]
    lb: Optional[Fraction]
    gap: Optional[Fraction]
    iterations: int
    eta_step: Fraction
    history: list  # (iter, lb, ub, best_ub, master_obj, sub_cost, cut_kind, master_bits, elapsed_s)
    cuts: list
    master_exact: bool


# --- partitioning -------------------------------------------------------------

def _binarize_master_integers(model: MilpModel):
    """Replace integer variables by weighted binary bits (the master must be a
    pure binary problem). Returns (rewritten model, expansion map)."""
    expansions = {}
    new_vars = []
    for v in model.variables:
        if v.kind == "integer":
            g = plan_integer(int(v.ub), owner=v.name)
            bits = []
            for i, w in enumerate(g.weights):
                bn = f"{v.name}__bit{i}"
                new_vars.append(Variable(name=bn, kind="binary", lb=Fraction(0), ub=Fraction(1)))
                bits.append((bn, w))
            expansions[v.name] = (bits, v.shift)
        else:
            new_vars.append(v)
    if not expansions:
        return model, expansions

    def rewrite(expr: LinExpr) -> LinExpr:
        pairs = []
        for n, c in expr.terms:
            if n in expansions:
                for bn, w in expansions[n][0]:
                    pairs.append((bn, c * w))
            else:
                pairs.append((n, c))
        return LinExpr.build(pairs, expr.constant)

    cons = [
        Constraint(c.name, rewrite(c.lhs), c.sense, c.rhs, c.weight_override)
        for c in model.constraints
    ]
    return (
        canonicalize(model.name, "min", new_vars, rewrite(model.objective), cons),
        expansions,
    )


def partition(model: MilpModel) -> Partition:
    for v in model.variables:
        if v.kind == "continuous" and v.partition_hint == "master":
            raise BendersError(
                f"variable {v.name!r}: continuous variables cannot join the master "
                "(the master must be a pure binary problem)"
            )
    if not any(v.kind == "continuous" for v in model.variables):
        raise BendersError(
            "model has no continuous variables: there is no subproblem; "
            "use the monolithic path instead"
        )

    model, expansions = _binarize_master_integers(model)
    fixed_sub = {
        v.name: v.lb for v in model.variables if v.kind == "continuous" and v.ub == v.lb
    }
    master_vars = [v.name for v in model.variables if v.kind == "binary"]
    sub_vars = [
        v.name for v in model.variables if v.kind == "continuous" and v.name not in fixed_sub
    ]
    sub_set = set(sub_vars)
    sub_lb = {v.name: v.lb for v in model.variables if v.name in sub_set}

    f = {n: Fraction(0) for n in master_vars}
    c_sub = {n: Fraction(0) for n in sub_vars}
    obj_constant = model.objective.constant
    for n, c in model.objective.terms:
        if n in sub_set:
            c_sub[n] = c
            obj_constant += c * sub_lb[n]
        elif n in fixed_sub:
            obj_constant += c * fixed_sub[n]
        else:
            f[n] = c

    master_only = []
    sub_rows = []
    for con in model.constraints:
        ax, by = {}, {}
        rhs = con.rhs
        for n, c in con.lhs.terms:
            if n in sub_set:
                ax[n] = c
                rhs -= c * sub_lb[n]
            elif n in fixed_sub:
                rhs -= c * fixed_sub[n]
            else:
                by[n] = c
        if not ax:
            master_only.append(
                Constraint(con.name, LinExpr.build(list(by.items())), con.sense, rhs)
            )
            continue
        sub_rows.append(SubRow(name=con.name, ax=ax, by=by, sense=con.sense, rhs0=rhs))
    for v in model.variables:
        if v.name in sub_set:
            sub_rows.append(
                SubRow(
                    name=f"__ub::{v.name}",
                    ax={v.name: Fraction(1)},
                    by={},
                    sense="<=",
                    rhs0=v.ub - v.lb,
                )
            )

    return Partition(
        master_vars=master_vars,
        sub_vars=sub_vars,
        f=f,
        c_sub=c_sub,
        obj_constant=obj_constant,
        master_only=master_only,
        sub_rows=sub_rows,
        sub_lb=sub_lb,
        int_expansions=expansions,
    )


# --- subproblem ---------------------------------------------------------------

def _oriented_singleton(row_coefs, sense, rhs):
    """If the row is a single-variable upper bound (<=-form a*x <= r with
    a > 0), return (var, a, r); else None."""
    if sense == "=" or len(row_coefs) != 1:
        return None
    (var, a), = row_coefs.items()
    if sense == ">=":
        a, rhs = -a, -rhs
    if a <= 0:
        return None
    return var, a, rhs


def solve_sub(part: Partition, y: dict, force_exact: bool = False) -> LpSolution:
    """Solve the LP over x with the binaries fixed; the returned duals/ray
    cover every sub row, including rows eliminated by the presolve."""
    rows = []
    for r in part.sub_rows:
        rhs = r.rhs0 - sum((c * y[n] for n, c in r.by.items()), Fraction(0))
        rows.append((r.name, dict(r.ax), r.sense, rhs))
    all_names = [name for name, *_ in rows]

    fixed = {}
    fixing_row = {}

    def infeasible_via(name, sign):
        ray = {rn: Fraction(0) for rn in all_names}
        ray[name] = Fraction(sign)
        _recover_eliminated(part, rows, fixing_row, ray, for_ray=True)
        return LpSolution(status="infeasible", ray=ray)

    # Fix variables forced to zero by singleton rows.
    changed = True
    while changed:
        changed = False
        for name, coefs, sense, rhs in rows:
            live = {n: c for n, c in coefs.items() if n not in fixed}
            if len(live) != 1:
                continue
            (var, a), = live.items()
            if sense == "=":
                val = rhs / a
                if val < 0:
                    return infeasible_via(name, 1 if a < 0 else -1)
                if val == 0 and var not in fixed:
                    fixed[var] = Fraction(0)
                    fixing_row[var] = name
                    changed = True
                continue
            s = _oriented_singleton(live, sense, rhs)
            if s is None:
                continue
            var, a, r = s
            if r < 0:
                return infeasible_via(name, -1 if sense == "<=" else 1)
            if r == 0 and var not in fixed:
                fixed[var] = Fraction(0)
                fixing_row[var] = name
                changed = True

    live_vars = [v for v in part.sub_vars if v not in fixed]
    vindex = {v: k for k, v in enumerate(live_vars)}

    # Drop rows emptied by the fixing (checking satisfiability), collect the
    # rest, and record implied upper bounds from multi-variable rows with
    # all-nonnegative coefficients.
    implied_ub = {}
    reduced = []
    for name, coefs, sense, rhs in rows:
        live = {n: c for n, c in coefs.items() if n not in fixed}
        if not live:
            ok = (
                (sense == "<=" and rhs >= 0)
                or (sense == ">=" and rhs <= 0)
                or (sense == "=" and rhs == 0)
            )
            if not ok:
                if sense == "<=":
                    sign = -1
                elif sense == ">=":
                    sign = 1
                else:
                    sign = 1 if rhs > 0 else -1
                return infeasible_via(name, sign)
            continue  # dual 0 (or recovered below if it is a fixing row)
        if (
            len(live) > 1
            and sense in ("=", "<=")
            and rhs >= 0
            and all(c >= 0 for c in live.values())
        ):
            for n, c in live.items():
                if c > 0:
                    b = rhs / c
                    if n not in implied_ub or b < implied_ub[n]:
                        implied_ub[n] = b
        reduced.append((name, live, sense, rhs))

    final_rows = []
    for name, live, sense, rhs in reduced:
        s = _oriented_singleton(live, sense, rhs)
        if s is not None:
            var, a, r = s
            if var in implied_ub and implied_ub[var] <= r / a:
                continue  # redundant bound, dual 0
        final_rows.append((name, live, sense, rhs))

    n_live = len(live_vars)
    c_vec = [part.c_sub[v] for v in live_vars]
    use_float = (not force_exact) and n_live * max(len(final_rows), 1) > EXACT_LP_CELL_LIMIT
    float_backend = False
    if n_live == 0:
        sol = LpSolution(status="optimal", x=[], objective=Fraction(0), duals={})
    elif use_float:
        rows_idx = [
            (name, {vindex[v]: cf for v, cf in live.items()}, sense, rhs)
            for name, live, sense, rhs in final_rows
        ]
        sol = _solve_lp_float((n_live, c_vec, rows_idx))
        float_backend = True
    else:
        lp_rows = [
            (name, [live.get(v, Fraction(0)) for v in live_vars], sense, rhs)
            for name, live, sense, rhs in final_rows
        ]
        sol = solve_lp(LpProblem(n=n_live, c=c_vec, rows=lp_rows))

    if sol.status == "unbounded":
        raise BendersError("subproblem unbounded: the model violates the boundedness assumption")

    if sol.status == "infeasible":
        ray = {name: Fraction(0) for name in all_names}
        ray.update(sol.ray)
        _recover_eliminated(part, rows, fixing_row, ray, for_ray=True)
        out = LpSolution(status="infeasible", ray=ray, pivots=sol.pivots)
        out.float_backend = float_backend
        return out

    x = {v: Fraction(0) for v in part.sub_vars}
    for v, k in vindex.items():
        x[v] = sol.x[k]
    duals = {name: Fraction(0) for name in all_names}
    duals.update(sol.duals)
    _recover_eliminated(part, rows, fixing_row, duals, for_ray=False)
    out = LpSolution(
        status="optimal",
        x=[x[v] for v in part.sub_vars],
        objective=sol.objective,
        duals=duals,
        pivots=sol.pivots,
    )
    out.float_backend = float_backend
    return out


def _recover_eliminated(part, rows, fixing_row, duals, for_ray):
    """Assign duals to the rows that fixed variables to zero so that dual
    column feasibility holds on the eliminated columns."""
    row_by_name = {name: (coefs, sense, rhs) for name, coefs, sense, rhs in rows}
    touching = {}  # var -> [(row name, coef)], only for the eliminated columns
    eliminated = set(fixing_row)
    for name, coefs, _, _ in rows:
        for v, c in coefs.items():
            if v in eliminated:
                touching.setdefault(v, []).append((name, c))
    for var, rname in fixing_row.items():
        coefs, sense, _ = row_by_name[rname]
        a = coefs[var]
        other = sum(
            (duals.get(name, Fraction(0)) * c for name, c in touching.get(var, ()) if name != rname),
            Fraction(0),
        )
        target = (Fraction(0) if for_ray else part.c_sub[var]) - other
        # need duals[rname] * a <= target, with the row's dual sign respected
        if sense == "=":
            duals[rname] = target / a
        elif sense == "<=":  # dual <= 0; a > 0 in as-written orientation
            duals[rname] = min(Fraction(0), target / a)
        else:  # '>=' row, written with a < 0 on var; dual >= 0
            duals[rname] = max(Fraction(0), target / a)


def _rat(v, denom=10**12):
    return Fraction(float(v)).limit_denominator(denom)


def _csr(triples, shape):
    from scipy.sparse import csr_matrix

    rows, cols, vals = triples
    return csr_matrix((vals, (rows, cols)), shape=shape)


def _solve_lp_float(lp) -> LpSolution:
    """Float LP backend (scipy/HiGHS) over sparse rows.

    lp: (n, c, rows) with rows of (name, {col: Fraction}, sense, rhs), or an
    LpProblem (densified rows are converted)."""
    from scipy.optimize import linprog

    n, c, rows = _as_sparse_lp(lp)
    ub_t, ub_r = ([], [], []), 0
    eq_t, eq_r = ([], [], []), 0
    b_ub, ub_meta, b_eq, eq_names = [], [], [], []
    for name, coeffs, sense, rhs in rows:
        if sense == "=":
            for j, v in coeffs.items():
                eq_t[0].append(eq_r)
                eq_t[1].append(j)
                eq_t[2].append(float(v))
            b_eq.append(float(rhs))
            eq_names.append(name)
            eq_r += 1
        else:
            sgn = 1.0 if sense == "<=" else -1.0
            for j, v in coeffs.items():
                ub_t[0].append(ub_r)
                ub_t[1].append(j)
                ub_t[2].append(sgn * float(v))
            b_ub.append(sgn * float(rhs))
            ub_meta.append((name, int(sgn)))
            ub_r += 1
    res = linprog(
        [float(v) for v in c],
        A_ub=_csr(ub_t, (ub_r, n)) if ub_r else None,
        b_ub=b_ub or None,
        A_eq=_csr(eq_t, (eq_r, n)) if eq_r else None,
        b_eq=b_eq or None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        return _float_farkas((n, c, rows))
    if res.status == 3:
        return LpSolution(status="unbounded")
    if not res.success:
        raise BendersError(f"float LP backend failed: {res.message}")

    duals = {}
    # scipy marginals for A_ub x <= b_ub are <= 0, matching our convention on
    # '<=' rows; the sign flip maps '>=' rows back to their orientation.
    for (name, sign), m in zip(ub_meta, res.ineqlin.marginals):
        duals[name] = _rat(m) * sign
    for name, m in zip(eq_names, res.eqlin.marginals):
        duals[name] = _rat(m)
    return LpSolution(
        status="optimal",
        x=[max(Fraction(0), _rat(v)) for v in res.x],
        objective=_rat(res.fun),
        duals=duals,
    )


def _as_sparse_lp(lp):
    if isinstance(lp, LpProblem):
        rows = [
            (name, {j: v for j, v in enumerate(coeffs) if v != 0}, sense, rhs)
            for name, coeffs, sense, rhs in lp.rows
        ]
        return lp.n, lp.c, rows
    return lp


def _float_farkas(lp) -> LpSolution:
    """Extract an approximate Farkas ray as the duals of the elastic
    (minimum total violation) relaxation, i.e. the phase-1 problem."""
    from scipy.optimize import linprog

    n, _, rows = _as_sparse_lp(lp)
    elastic = []  # objective coefficients of the violation columns
    ub_t, ub_r = ([], [], []), 0
    eq_t, eq_r = ([], [], []), 0
    b_ub, ub_meta, b_eq, eq_names = [], [], [], []
    for name, coeffs, sense, rhs in rows:
        if sense == "=":
            for j, v in coeffs.items():
                eq_t[0].append(eq_r)
                eq_t[1].append(j)
                eq_t[2].append(float(v))
            eq_t[0] += [eq_r, eq_r]
            eq_t[1] += [n + len(elastic), n + len(elastic) + 1]
            eq_t[2] += [1.0, -1.0]
            elastic.extend([1.0, 1.0])
            b_eq.append(float(rhs))
            eq_names.append(name)
            eq_r += 1
        else:
            sgn = 1.0 if sense == "<=" else -1.0
            for j, v in coeffs.items():
                ub_t[0].append(ub_r)
                ub_t[1].append(j)
                ub_t[2].append(sgn * float(v))
            ub_t[0].append(ub_r)
            ub_t[1].append(n + len(elastic))
            ub_t[2].append(-1.0)
            elastic.append(1.0)
            b_ub.append(sgn * float(rhs))
            ub_meta.append((name, int(sgn)))
            ub_r += 1
    ncols = n + len(elastic)
    res = linprog(
        [0.0] * n + elastic,
        A_ub=_csr(ub_t, (ub_r, ncols)) if ub_r else None,
        b_ub=b_ub or None,
        A_eq=_csr(eq_t, (eq_r, ncols)) if eq_r else None,
        b_eq=b_eq or None,
        bounds=(0, None),
        method="highs",
    )
    if not res.success or res.fun <= 1e-9:
        raise BendersError("float backend could not certify subproblem infeasibility")
    ray = {}
    for (name, sign), m in zip(ub_meta, res.ineqlin.marginals):
        ray[name] = _rat(m, 10**9) * sign
    for name, m in zip(eq_names, res.eqlin.marginals):
        ray[name] = _rat(m, 10**9)
    return LpSolution(status="infeasible", ray=ray)


def _spans(part: Partition) -> dict:
    spans = {}
    for r in part.sub_rows:
        if r.name.startswith("__ub::"):
            spans[r.name[len("__ub::"):]] = r.rhs0
    return spans


def dual_repair_margin(part: Partition, duals: dict, for_ray: bool = False) -> Fraction:
    """Exact margin making a (possibly float-derived) dual vector yield a
    valid cut: any dual-feasibility violation on column k can overstate the
    bound by at most violation * span_k, since 0 <= x'_k <= span_k."""
    spans = _spans(part)
    col = {v: Fraction(0) for v in part.sub_vars}
    for r in part.sub_rows:
        d = duals.get(r.name, Fraction(0))
        if d == 0:
            continue
        for v, a in r.ax.items():
            col[v] += d * a
    margin = Fraction(0)
    for v in part.sub_vars:
        limit = Fraction(0) if for_ray else part.c_sub[v]
        if col[v] > limit:
            margin += (col[v] - limit) * spans.get(v, Fraction(0))
    return margin


def relaxation_warm_cut(part: Partition) -> Optional[Cut]:
    """One optimality cut from the duals of the FULL LP relaxation (binaries
    relaxed to [0,1]). Restricted to the sub rows those duals are feasible for
    the subproblem dual, so the cut is valid; float-derived duals are repaired
    by an exact interval margin."""
    names = part.master_vars
    p, s = len(names), len(part.sub_vars)
    pos = {nm: k for k, nm in enumerate(names)}
    xpos = {nm: p + k for k, nm in enumerate(part.sub_vars)}
    n = p + s
    c = [part.f[nm] for nm in names] + [part.c_sub[v] for v in part.sub_vars]
    rows = []
    for nm in names:
        rows.append((f"__yub::{nm}", {pos[nm]: Fraction(1)}, "<=", Fraction(1)))
    for con in part.master_only:
        rows.append(
            (con.name, {pos[nm]: cf for nm, cf in con.lhs.terms}, con.sense, con.rhs)
        )
    for r in part.sub_rows:
        coeffs = {pos[nm]: cf for nm, cf in r.by.items()}
        coeffs.update({xpos[v]: cf for v, cf in r.ax.items()})
        rows.append((r.name, coeffs, r.sense, r.rhs0))
    # No presolve shrinks this LP, so the exact path pays off only when tiny;
    # the repair margin keeps the float-derived cut valid regardless.
    if n * len(rows) > 2_000:
        sol = _solve_lp_float((n, c, rows))
        float_backend = True
    else:
        dense = [
            (name, [coeffs.get(j, Fraction(0)) for j in range(n)], sense, rhs)
            for name, coeffs, sense, rhs in rows
        ]
        sol = solve_lp(LpProblem(n=n, c=c, rows=dense))
        float_backend = False
    if sol.status != "optimal":
        return None
    duals = {r.name: sol.duals.get(r.name, Fraction(0)) for r in part.sub_rows}
    safety = dual_repair_margin(part, duals)
    if float_backend:
        safety += Fraction(1, 10**9)
    return optimality_cut(part, duals, 0, safety=safety)


# --- cuts ---------------------------------------------------------------------

_CUT_GRID = 1 << 30  # cut coefficients snap to this power-of-two denominator


def _snap_cut(coeffs: dict, constant: Fraction):
    """Round cut coefficients onto a fixed power-of-two grid, loosening the
    constant by the rounding error so the cut stays valid over binary y.

    Keeps the coefficient LCM bounded when the master is recompiled to a QUBO:
    rationalized float duals otherwise carry ~1e12 denominators whose LCM
    across a cut makes the integer penalty scaling blow up."""
    snapped = {}
    loosen = Fraction(0)
    for n, c in coeffs.items():
        cq = Fraction(round(c * _CUT_GRID), _CUT_GRID)
        if cq > c:
            loosen += cq - c
        if cq != 0:
            snapped[n] = cq
    const = Fraction(math.floor((constant - loosen) * _CUT_GRID), _CUT_GRID)
    return snapped, const


def optimality_cut(part: Partition, duals: dict, iteration: int,
                   safety: Fraction = Fraction(0)) -> Cut:
    """eta >= duals . (b - B y); safety lowers the cut (float-backed duals)."""
    coeffs = {n: Fraction(0) for n in part.master_vars}
    constant = Fraction(0)
    for r in part.sub_rows:
        d = duals.get(r.name, Fraction(0))
        if d == 0:
            continue
        constant += d * r.rhs0
        for n, c in r.by.items():
            coeffs[n] -= d * c
    coeffs, constant = _snap_cut(coeffs, constant - safety)
    return Cut(kind="optimality", coeffs=coeffs, constant=constant,
               source_iteration=iteration)


def feasibility_cut(part: Partition, ray: dict, iteration: int,
                    safety: Fraction = Fraction(0)) -> Optional[Cut]:
    """ray . (b - B y) <= 0 for every feasible y; None if the ray carries no
    y information (caller falls back to a no-good cut)."""
    coeffs = {n: Fraction(0) for n in part.master_vars}
    constant = Fraction(0)
    for r in part.sub_rows:
        d = ray.get(r.name, Fraction(0))
        if d == 0:
            continue
        constant += d * r.rhs0
        for n, c in r.by.items():
            coeffs[n] -= d * c
    coeffs, constant = _snap_cut(coeffs, constant - safety)
    if not coeffs:
        return None
    return Cut(kind="feasibility", coeffs=coeffs, constant=constant,
               source_iteration=iteration)


def no_good_cut(part: Partition, y: dict, iteration: int) -> Cut:
    """Excludes exactly the assignment y (Hamming distance >= 1), written in
    value(y') <= 0 form: value(y') = 1 - dist(y', y)."""
    coeffs = {}
    constant = Fraction(1)
    for n in part.master_vars:
        if y[n]:
            coeffs[n] = Fraction(1)
            constant -= 1
        else:
            coeffs[n] = Fraction(-1)
    return Cut(kind="no-good", coeffs=coeffs, constant=constant, source_iteration=iteration)


# --- master -------------------------------------------------------------------

def master_model(part: Partition, state: BendersState) -> MilpModel:
    eta_lo, eta_hi = state.eta_lo, max(state.eta_hi, state.eta_lo)
    variables = [
        Variable(name=n, kind="binary", lb=Fraction(0), ub=Fraction(1))
        for n in part.master_vars
    ]
    variables.append(Variable(name=ETA, kind="continuous", lb=eta_lo, ub=eta_hi))
    obj = LinExpr.build(
        [(n, c) for n, c in part.f.items() if c != 0] + [(ETA, Fraction(1))],
        part.obj_constant,
    )
    cons = list(part.master_only)
    for k, cut in enumerate(state.cuts):
        if cut.kind == "optimality":
            terms = [(ETA, Fraction(1))] + [(n, -c) for n, c in cut.coeffs.items()]
            cons.append(Constraint(f"__cut{k}", LinExpr.build(terms), ">=", cut.constant))
        else:
            terms = [(n, c) for n, c in cut.coeffs.items()]
            cons.append(Constraint(f"__cut{k}", LinExpr.build(terms), "<=", -cut.constant))
    return canonicalize(f"master_iter{state.iteration}", "min", variables, obj, cons)


def build_master(part: Partition, state: BendersState, eta_bits: int = 10,
                 budget: Optional[int] = None) -> QuboArtifact:
    model = master_model(part, state)
    return compile_model(model, budget=budget, continuous_bits=eta_bits)


def _master_feasible_exact(part, state, y) -> bool:
    for con in part.master_only:
        if not constraint_holds(con, y):
            return False
    for cut in state.cuts:
        if cut.kind != "optimality" and cut.value(y) > 0:
            return False
    return True


def _eta_required(state: BendersState, y: dict) -> Fraction:
    req = state.eta_lo
    for cut in state.cuts:
        if cut.kind == "optimality":
            v = cut.value(y)
            if v > req:
                req = v
    return req


def solve_master_enum(part: Partition, state: BendersState):
    """Exact master optimum by chunked enumeration over the binary vector,
    with the eta surrogate optimized analytically above the cut pool.

    Returns (y dict or None, exact lower bound or None); None means the master
    itself has become infeasible."""
    p = len(part.master_vars)
    if p > MASTER_ENUM_CAP:
        raise BendersError(f"{p} master binaries exceed the enumeration cap {MASTER_ENUM_CAP}")
    total = 1 << p
    fvec = np.array([float(part.f[n]) for n in part.master_vars])
    tol = 1e-9

    def coef_vec(coeffs: dict):
        a = np.zeros(p)
        for k, n in enumerate(part.master_vars):
            a[k] = float(coeffs.get(n, 0))
        return a

    hard = [(coef_vec(dict(con.lhs.terms)), con.sense, float(con.rhs)) for con in part.master_only]
    hard += [
        (coef_vec(cut.coeffs), "<=", float(-cut.constant))
        for cut in state.cuts
        if cut.kind != "optimality"
    ]
    opt = [
        (coef_vec(cut.coeffs), float(cut.constant))
        for cut in state.cuts
        if cut.kind == "optimality"
    ]

    def chunk_obj(start, count):
        idx = np.arange(start, start + count, dtype=np.int64)
        Y = ((idx[:, None] >> np.arange(p)) & 1).astype(np.float64)
        obj = Y @ fvec
        feas = np.ones(count, dtype=bool)
        for a, sense, rhs in hard:
            act = Y @ a
            if sense == "<=":
                feas &= act <= rhs + tol
            elif sense == ">=":
                feas &= act >= rhs - tol
            else:
                feas &= np.abs(act - rhs) <= tol
        eta_req = np.full(count, float(state.eta_lo))
        for a, c0 in opt:
            np.maximum(eta_req, c0 + Y @ a, out=eta_req)
        obj = obj + eta_req
        obj[~feas] = np.inf
        return obj

    fmin = np.inf
    for start in range(0, total, _ENUM_CHUNK):
        count = min(_ENUM_CHUNK, total - start)
        fmin = min(fmin, float(chunk_obj(start, count).min()))
    if not np.isfinite(fmin):
        return None, None
    window = 1e-7 * (abs(fmin) + 1.0)
    candidates = []
    for start in range(0, total, _ENUM_CHUNK):
        count = min(_ENUM_CHUNK, total - start)
        obj = chunk_obj(start, count)
        keep = np.nonzero(obj <= fmin + window)[0]
        candidates.extend(int(start + k) for k in keep[:4096])

    best_idx, best_val = None, None
    for ci in sorted(candidates):
        y = {n: Fraction((ci >> k) & 1) for k, n in enumerate(part.master_vars)}
        if not _master_feasible_exact(part, state, y):
            continue
        val = sum((part.f[n] * y[n] for n in part.master_vars), part.obj_constant)
        val += _eta_required(state, y)
        if best_val is None or val < best_val:
            best_val, best_idx = val, ci
    if best_idx is None:
        return None, None
    y = {n: int((best_idx >> k) & 1) for k, n in enumerate(part.master_vars)}
    return y, best_val


def master_relaxation_bound(part: Partition, state: BendersState) -> Optional[Fraction]:
    """Exact LP relaxation of the master (y in [0,1], eta above the cuts);
    a valid lower bound regardless of how the master QUBO was solved."""
    names = part.master_vars
    pos = {nm: k for k, nm in enumerate(names)}
    n = len(names) + 1  # + eta, shifted to start at 0
    eidx = len(names)
    c = [part.f[nm] for nm in names] + [Fraction(1)]
    rows = []
    for nm in names:
        coeffs = [Fraction(0)] * n
        coeffs[pos[nm]] = Fraction(1)
        rows.append((f"__ub::{nm}", coeffs, "<=", Fraction(1)))
    span = max(state.eta_hi - state.eta_lo, Fraction(0))
    coeffs = [Fraction(0)] * n
    coeffs[eidx] = Fraction(1)
    rows.append(("__ub::eta", coeffs, "<=", span))
    for con in part.master_only:
        coeffs = [Fraction(0)] * n
        for nm, cf in con.lhs.terms:
            coeffs[pos[nm]] = cf
        rows.append((con.name, coeffs, con.sense, con.rhs))
    for k, cut in enumerate(state.cuts):
        coeffs = [Fraction(0)] * n
        if cut.kind == "optimality":
            coeffs[eidx] = Fraction(1)
            for nm, cf in cut.coeffs.items():
                coeffs[pos[nm]] = -cf
            rows.append((f"__cut{k}", coeffs, ">=", cut.constant - state.eta_lo))
        else:
            for nm, cf in cut.coeffs.items():
                coeffs[pos[nm]] = cf
            rows.append((f"__cut{k}", coeffs, "<=", -cut.constant))
    lp = LpProblem(n=n, c=c, rows=rows, constant=part.obj_constant + state.eta_lo)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        return None
    return sol.objective


def solve_master_sa(part: Partition, state: BendersState, eta_bits: int,
                    seed: int, sweeps: int, restarts: int):
    artifact = build_master(part, state, eta_bits=eta_bits)
    res = solve_sa(artifact.assembled(), seed=seed + state.iteration, sweeps=sweeps,
                   restarts=restarts)
    nb = artifact.plan.native_binary
    y = {n: int(res.best[nb[n]]) for n in part.master_vars}
    return y, artifact


# --- driver -------------------------------------------------------------------

def _sp_cost_interval(part: Partition):
    """Interval bounds on the subproblem objective c_sub . x' over the boxes."""
    span_of = {}
    for r in part.sub_rows:
        if r.name.startswith("__ub::"):
            span_of[r.name[len("__ub::"):]] = r.rhs0
    lo = hi = Fraction(0)
    for v in part.sub_vars:
        c = part.c_sub[v]
        span = span_of.get(v, Fraction(0))
        if c >= 0:
            hi += c * span
        else:
            lo += c * span
    return lo, hi


def run(
    model: MilpModel,
    tol: Fraction = Fraction(1, 10**6),
    max_iter: int = 50,
    master_solver: str = "exhaustive",  # exhaustive | sa
    eta_bits: int = 10,
    seed: int = 0,
    sa_sweeps: int = 500,
    sa_restarts: int = 2,
    patience: int = 5,
    force_exact_lp: bool = False,
    compile_each_iteration: bool = True,
    warm_start: bool = True,
) -> BendersReport:
    part = partition(model)
    state = BendersState()
    exact_master = master_solver == "exhaustive"
    if exact_master and len(part.master_vars) > MASTER_ENUM_CAP:
        raise BendersError(
            f"exhaustive master limited to {MASTER_ENUM_CAP} binaries; use the sa master"
        )

    sp_lo, sp_hi = _sp_cost_interval(part)
    state.eta_lo = sp_lo if sp_lo < 0 else Fraction(0)
    state.eta_hi = sp_hi

    history = []
    t0 = time.perf_counter()
    best_ub = None
    stall = 0

    def record(it, lb, ub, master_obj, sub_cost, cut_kind, master_bits):
        nonlocal best_ub
        if ub is not None and (best_ub is None or ub < best_ub):
            best_ub = ub
        history.append(
            (
                it,
                None if lb is None else float(lb),
                None if ub is None else float(ub),
                None if best_ub is None else float(best_ub),
                None if master_obj is None else float(master_obj),
                None if sub_cost is None else float(sub_cost),
                cut_kind,
                master_bits,
                round(time.perf_counter() - t0, 6),
            )
        )

    def total_cost(y, sub_cost):
        return sum((part.f[n] * y[n] for n in part.master_vars), part.obj_constant) + sub_cost

    def accept(y, sol):
        """Optimal subproblem: add the cut and (if y is master-feasible) the
        incumbent. Returns the upper bound or None."""
        nonlocal stall
        cost = sol.objective
        safety = Fraction(0)
        if getattr(sol, "float_backend", False):
            safety = dual_repair_margin(part, sol.duals) + Fraction(1, 10**9)
        state.cuts.append(optimality_cut(part, sol.duals, state.iteration, safety=safety))
        if cost > state.eta_hi:
            # Round up onto a coarse grid: the eta encoding weights inherit
            # this denominator, and float-backed costs carry huge ones.
            state.eta_hi = Fraction(math.ceil(cost * _CUT_GRID), _CUT_GRID)
        if not all(constraint_holds(con, y) for con in part.master_only):
            stall += 1
            return None
        ub = total_cost(y, cost)
        if state.incumbent_cost is None or ub < state.incumbent_cost:
            state.incumbent_y = dict(y)
            state.incumbent_x = dict(zip(part.sub_vars, sol.x))
            state.incumbent_cost = ub
            stall = 0
        else:
            stall += 1
        return ub

    def reject(y, sol):
        """Infeasible subproblem: add a feasibility cut (or a no-good cut if
        the ray carries no y information)."""
        nonlocal stall
        safety = Fraction(0)
        if getattr(sol, "float_backend", False):
            safety = dual_repair_margin(part, sol.ray, for_ray=True) + Fraction(1, 10**9)
        cut = feasibility_cut(part, sol.ray, state.iteration, safety=safety)
        state.cuts.append(cut if cut is not None else no_good_cut(part, y, state.iteration))
        stall += 1
        return state.cuts[-1].kind

    if warm_start:
        warm = relaxation_warm_cut(part)
        if warm is not None:
            state.cuts.append(warm)

    # Bootstrap: all-ones y (opens every facility in assignment-shaped models).
    y0 = {n: 1 for n in part.master_vars}
    sol0 = solve_sub(part, y0, force_exact=force_exact_lp)
    if sol0.status == "optimal":
        ub0 = accept(y0, sol0)
        record(0, None, ub0, None, float(sol0.objective), "optimality", None)
    else:
        kind = reject(y0, sol0)
        record(0, None, None, None, None, kind, None)

    status = "max_iter"
    lb = None

    def converged():
        return (
            lb is not None
            and best_ub is not None
            and best_ub - lb <= tol * max(1, abs(best_ub))
        )

    for it in range(1, max_iter + 1):
        state.iteration = it
        master_bits = None
        if exact_master:
            y, master_obj = solve_master_enum(part, state)
            if y is None:
                status = "infeasible"
                record(it, lb, None, None, None, "", None)
                break
            lb_t = master_obj
            if compile_each_iteration:
                try:
                    master_bits = build_master(part, state, eta_bits=eta_bits).total_bits
                except Exception:
                    master_bits = None
        else:
            y, artifact = solve_master_sa(part, state, eta_bits, seed, sa_sweeps, sa_restarts)
            master_bits = artifact.total_bits
            master_obj = None
            lb_t = master_relaxation_bound(part, state)

        if lb_t is not None and (lb is None or lb_t > lb):
            lb = lb_t
        if converged():
            record(it, lb, None, master_obj, None, "", master_bits)
            status = "converged"
            break

        sol = solve_sub(part, y, force_exact=force_exact_lp)
        if sol.status == "optimal":
            ub_t = accept(y, sol)
            record(it, lb, ub_t, master_obj, float(sol.objective), "optimality", master_bits)
        else:
            kind = reject(y, sol)
            record(it, lb, None, master_obj, None, kind, master_bits)

        if converged():
            status = "converged"
            break
        if not exact_master and stall >= patience and state.incumbent_cost is not None:
            status = "converged"
            break

    if state.incumbent_cost is None and status != "infeasible":
        status = "no_incumbent"
    gap = None
    if state.incumbent_cost is not None and lb is not None:
        gap = (state.incumbent_cost - lb) / max(Fraction(1), abs(state.incumbent_cost))

    inc_y = state.incumbent_y
    if inc_y is not None and part.int_expansions:
        inc_y = dict(inc_y)
        for orig, (bits, shift) in part.int_expansions.items():
            inc_y[orig] = shift + sum((w * inc_y.pop(bn) for bn, w in bits), Fraction(0))

    span = max(state.eta_hi - state.eta_lo, Fraction(0))
    eta_step = span / ((1 << eta_bits) - 1) if span > 0 else Fraction(0)

    return BendersReport(
        status=status,
        incumbent_y=inc_y,
        incumbent_x=state.incumbent_x,
        incumbent_cost=state.incumbent_cost,
        lb=lb,
        gap=gap,
        iterations=state.iteration,
        eta_step=eta_step,
        history=history,
        cuts=state.cuts,
        master_exact=exact_master,
    )


def convergence_csv(report: BendersReport) -> str:
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["iter", "lb", "ub", "best_ub", "master_obj", "sub_cost",
                "cut_kind", "master_bits", "elapsed_s"])
    for row in report.history:
        w.writerow(["" if v is None else v for v in row])
    return out.getvalue()
