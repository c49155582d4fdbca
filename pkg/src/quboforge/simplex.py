"""Exact two-phase primal simplex with dual values and Farkas rays.

Problems are min c.x over x >= 0 with named rows (coeffs, sense, rhs). All
arithmetic is exact rational (gmpy2.mpq when available, Fraction otherwise);
pivoting uses Bland's rule, so the method terminates without cycling.

Dual conventions (per original row): objective value = sum dual_r * rhs_r;
duals are <= 0 on '<=' rows, >= 0 on '>=' rows, free on '='. An infeasible
problem returns a ray with the same sign pattern satisfying
sum_r ray_r * a_rk <= 0 for every variable k and ray . rhs > 0.
check_certificates verifies all of this exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    _Q = Fraction

_ZERO = _Q(0)
_ONE = _Q(1)

PIVOT_BUDGET = 500_000


class SimplexError(Exception):
    pass


@dataclass
class LpProblem:
    """min c.x + constant s.t. rows; x >= 0 implicitly."""

    n: int
    c: list  # length n
    rows: list  # list of (name, coeffs list length n, sense, rhs)
    constant: Fraction = Fraction(0)
    var_names: Optional[list] = None

    def __post_init__(self):
        for name, coeffs, sense, _ in self.rows:
            if len(coeffs) != self.n:
                raise ValueError(f"row {name!r}: expected {self.n} coefficients")
            if sense not in ("<=", "=", ">="):
                raise ValueError(f"row {name!r}: bad sense {sense!r}")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: Optional[list] = None  # Fractions, length n
    objective: Optional[Fraction] = None
    duals: Optional[dict] = None  # row name -> Fraction
    ray: Optional[dict] = None  # row name -> Fraction (infeasible only)
    pivots: int = 0


def solve_lp(p: LpProblem, pivot_budget: int = PIVOT_BUDGET) -> LpSolution:
    m, n = len(p.rows), p.n

    # Equality form with slack/surplus, rhs made nonnegative, artificials where
    # no +1 unit column is available. sigma maps tableau rows back to the
    # original orientation.
    sigma = []
    slack_col = [None] * m  # column of the row's slack/surplus, if any
    art_col = [None] * m
    ncols = n
    for r, (_, _, sense, _) in enumerate(p.rows):
        if sense in ("<=", ">="):
            slack_col[r] = ncols
            ncols += 1
    n_slack_end = ncols

    T = []
    rhs = []
    for r, (_, coeffs, sense, b) in enumerate(p.rows):
        row = [_Q(v.numerator, v.denominator) if isinstance(v, Fraction) else _Q(v) for v in coeffs]
        row += [_ZERO] * (n_slack_end - n)
        if sense == "<=":
            row[slack_col[r]] = _ONE
        elif sense == ">=":
            row[slack_col[r]] = -_ONE
        bq = _Q(b.numerator, b.denominator) if isinstance(b, Fraction) else _Q(b)
        if bq < 0:
            row = [-v for v in row]
            bq = -bq
            sigma.append(-1)
        else:
            sigma.append(1)
        T.append(row)
        rhs.append(bq)

    # Initial basis: the row's +1 unit column, adding artificials as needed.
    basis = [None] * m
    init_col = [None] * m
    for r in range(m):
        sc = slack_col[r]
        if sc is not None and T[r][sc] == _ONE:
            basis[r] = sc
            init_col[r] = sc
        else:
            art_col[r] = ncols
            basis[r] = ncols
            init_col[r] = ncols
            ncols += 1
    is_artificial = [False] * ncols
    for r in range(m):
        if art_col[r] is not None:
            is_artificial[art_col[r]] = True
    for r in range(m):
        if art_col[r] is not None:
            T[r] += [_ZERO] * (ncols - len(T[r]))
            T[r][art_col[r]] = _ONE
    for r in range(m):
        if len(T[r]) < ncols:
            T[r] += [_ZERO] * (ncols - len(T[r]))

    pivots = 0

    def pivot(i, e, zrow, zval):
        nonlocal pivots
        pivots += 1
        if pivots > pivot_budget:
            raise SimplexError(f"pivot budget {pivot_budget} exceeded")
        piv = T[i][e]
        inv = _ONE / piv
        Ti = T[i]
        if piv != _ONE:
            T[i] = Ti = [v * inv for v in Ti]
            rhs[i] *= inv
        for k in range(m):
            if k == i:
                continue
            f = T[k][e]
            if f != _ZERO:
                Tk = T[k]
                T[k] = [a - f * b for a, b in zip(Tk, Ti)]
                rhs[k] -= f * rhs[i]
        f = zrow[e]
        if f != _ZERO:
            zrow[:] = [a - f * b for a, b in zip(zrow, Ti)]
            zval -= f * rhs[i]
        basis[i] = e
        return zval

    def make_zrow(costs):
        zrow = list(costs)
        zval = _ZERO
        for i in range(m):
            cb = costs[basis[i]]
            if cb != _ZERO:
                Ti = T[i]
                for j in range(ncols):
                    if Ti[j] != _ZERO:
                        zrow[j] -= cb * Ti[j]
                zval -= cb * rhs[i]
        return zrow, zval  # zrow holds reduced costs; objective = -zval

    def run_phase(zrow, zval, allow):
        while True:
            e = -1
            for j in range(ncols):
                if allow[j] and zrow[j] < _ZERO:
                    e = j
                    break
            if e < 0:
                return zval, None
            leave, ratio = -1, None
            for i in range(m):
                t = T[i][e]
                if t > _ZERO:
                    rr = rhs[i] / t
                    if ratio is None or rr < ratio or (rr == ratio and basis[i] < basis[leave]):
                        leave, ratio = i, rr
            if leave < 0:
                return zval, e  # unbounded along column e
            zval = pivot(leave, e, zrow, zval)

    def duals_from(costs, zrow):
        # y_r = cost(init basis col) - reduced cost(init basis col); map back
        # through sigma to the original row orientation.
        out = {}
        for r in range(m):
            y = sigma[r] * (costs[init_col[r]] - zrow[init_col[r]])
            out[p.rows[r][0]] = Fraction(int(y.numerator), int(y.denominator))
        return out

    # Phase 1
    if any(a is not None for a in art_col):
        c1 = [_ZERO] * ncols
        for r in range(m):
            if art_col[r] is not None:
                c1[art_col[r]] = _ONE
        zrow1, zval1 = make_zrow(c1)
        allow = [not is_artificial[j] for j in range(ncols)]
        # artificials may leave but never re-enter
        zval1, unb = run_phase(zrow1, zval1, allow)
        obj1 = -zval1
        if obj1 > _ZERO:
            return LpSolution(status="infeasible", ray=duals_from(c1, zrow1), pivots=pivots)
        # Drive remaining artificials out of the basis where possible.
        for r in range(m):
            if is_artificial[basis[r]]:
                for j in range(ncols):
                    if not is_artificial[j] and T[r][j] != _ZERO:
                        pivot(r, j, zrow1, zval1)
                        break

    # Phase 2
    c2 = [_ZERO] * ncols
    for j in range(n):
        v = p.c[j]
        c2[j] = _Q(v.numerator, v.denominator) if isinstance(v, Fraction) else _Q(v)
    zrow2, zval2 = make_zrow(c2)
    allow = [not is_artificial[j] for j in range(ncols)]
    zval2, unb = run_phase(zrow2, zval2, allow)
    if unb is not None:
        return LpSolution(status="unbounded", pivots=pivots)

    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = Fraction(int(rhs[i].numerator), int(rhs[i].denominator))
    obj_q = -zval2
    objective = Fraction(int(obj_q.numerator), int(obj_q.denominator)) + p.constant
    return LpSolution(
        status="optimal",
        x=x,
        objective=objective,
        duals=duals_from(c2, zrow2),
        pivots=pivots,
    )


def check_certificates(p: LpProblem, s: LpSolution) -> bool:
    """Exact verification of the solution's certificates."""
    if s.status == "optimal":
        assert s.x is not None and s.duals is not None
        if any(v < 0 for v in s.x):
            return False
        activities = []
        for name, coeffs, sense, rhs in p.rows:
            act = sum((c * v for c, v in zip(coeffs, s.x)), Fraction(0))
            activities.append(act)
            if sense == "<=" and act > rhs:
                return False
            if sense == ">=" and act < rhs:
                return False
            if sense == "=" and act != rhs:
                return False
        # dual signs + complementary slackness on rows
        for (name, coeffs, sense, rhs), act in zip(p.rows, activities):
            y = s.duals[name]
            if sense == "<=" and y > 0:
                return False
            if sense == ">=" and y < 0:
                return False
            if y != 0 and act != rhs:
                return False
        # dual feasibility + complementary slackness on columns
        for k in range(p.n):
            red = p.c[k] - sum(
                (s.duals[name] * coeffs[k] for name, coeffs, _, _ in p.rows), Fraction(0)
            )
            if red < 0:
                return False
            if s.x[k] > 0 and red != 0:
                return False
        # strong duality
        primal = sum((c * v for c, v in zip(p.c, s.x)), Fraction(0)) + p.constant
        dual = sum((s.duals[name] * rhs for name, _, _, rhs in p.rows), Fraction(0)) + p.constant
        return primal == dual and primal == s.objective

    if s.status == "infeasible":
        assert s.ray is not None
        for name, _, sense, _ in p.rows:
            y = s.ray[name]
            if sense == "<=" and y > 0:
                return False
            if sense == ">=" and y < 0:
                return False
        for k in range(p.n):
            comb = sum((s.ray[name] * coeffs[k] for name, coeffs, _, _ in p.rows), Fraction(0))
            if comb > 0:
                return False
        val = sum((s.ray[name] * rhs for name, _, _, rhs in p.rows), Fraction(0))
        return val > 0

    return s.status == "unbounded"
