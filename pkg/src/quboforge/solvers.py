"""Classical QUBO solvers standing in for the annealer.

Exhaustive search proves optimality up to a configurable bit cap; the search
runs on integer-scaled numpy vectors so the reported minimum is exact, with a
float fallback (plus exact re-check of near-minimal candidates) when the
scaled coefficients would overflow int64. Simulated annealing is a seeded
single-flip Metropolis walk with a geometric temperature schedule and
incremental local-field updates; the final energy is recomputed exactly.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .binarize import EncodingPlan
from .compiler import QuadForm

EXHAUSTIVE_BIT_CAP = 25
_CHUNK_BITS = 18


class SolverError(Exception):
    pass


@dataclass
class SolverResult:
    best: tuple  # 0/1 bits
    energy: Fraction
    method: str  # exhaustive | sa
    proven_optimal: bool
    seed: Optional[int] = None
    sweeps: Optional[int] = None
    trace: Optional[list] = None  # rows (sweep, best_energy, current_energy, temperature)


def energy(q: QuadForm, bits) -> Fraction:
    return q.energy(bits)


def _int_scaled(q: QuadForm):
    """(diag ints, offdiag ints, constant int, scale L) or None if oversized."""
    L = q.constant.denominator
    for c in q.diag.values():
        L = L // math.gcd(L, c.denominator) * c.denominator
    for c in q.offdiag.values():
        L = L // math.gcd(L, c.denominator) * c.denominator
    diag = {i: int(c * L) for i, c in q.diag.items()}
    off = {k: int(c * L) for k, c in q.offdiag.items()}
    const = int(q.constant * L)
    bound = abs(const) + sum(abs(v) for v in diag.values()) + sum(abs(v) for v in off.values())
    if bound >= 2**62:
        return None
    return diag, off, const, L


def _chunk_energies(q_diag, q_off, start, count, n, dtype):
    idx = np.arange(start, start + count, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(dtype)
    e = np.zeros(count, dtype=dtype)
    for i, c in q_diag.items():
        e += c * bits[:, i]
    for (i, j), c in q_off.items():
        e += c * (bits[:, i] * bits[:, j])
    return e


def solve_exhaustive(q: QuadForm, bit_cap: int = EXHAUSTIVE_BIT_CAP) -> SolverResult:
    """Global minimum by enumeration; ties break to the lowest pattern index
    (bit i is the i-th binary digit of the index)."""
    n = q.n
    if n > bit_cap:
        raise SolverError(f"{n} bits exceeds exhaustive cap {bit_cap}")
    if n == 0:
        return SolverResult(best=(), energy=q.constant, method="exhaustive", proven_optimal=True)

    scaled = _int_scaled(q)
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    if scaled is not None:
        diag, off, const, _ = scaled
        best_val, best_idx = None, None
        for start in range(0, total, chunk):
            count = min(chunk, total - start)
            e = _chunk_energies(diag, off, start, count, n, np.int64)
            k = int(np.argmin(e))
            v = int(e[k])
            if best_val is None or v < best_val:
                best_val, best_idx = v, start + k
        bits = tuple((best_idx >> i) & 1 for i in range(n))
        return SolverResult(
            best=bits, energy=q.energy(bits), method="exhaustive", proven_optimal=True
        )

    # Float search with exact re-check of everything near the float minimum.
    fdiag = {i: float(c) for i, c in q.diag.items()}
    foff = {k: float(c) for k, c in q.offdiag.items()}
    fmin, candidates = math.inf, []
    slack = None
    for start in range(0, total, chunk):
        count = min(chunk, total - start)
        e = _chunk_energies(fdiag, foff, start, count, n, np.float64)
        m = float(e.min())
        fmin = min(fmin, m)
        slack = 1e-9 * (abs(fmin) + 1.0)
        keep = np.nonzero(e <= fmin + slack)[0]
        candidates.extend(int(start + k) for k in keep[:4096])
    best_idx, best_val = None, None
    for idx in sorted(candidates):
        bits = tuple((idx >> i) & 1 for i in range(n))
        v = q.energy(bits)
        if best_val is None or v < best_val:
            best_val, best_idx = v, idx
    bits = tuple((best_idx >> i) & 1 for i in range(n))
    return SolverResult(best=bits, energy=best_val, method="exhaustive", proven_optimal=True)


def _adjacency(q: QuadForm):
    """Per-bit neighbor index/value arrays for local-field updates."""
    neigh = [[] for _ in range(q.n)]
    for (i, j), c in q.offdiag.items():
        v = float(c)
        if v != 0.0:
            neigh[i].append((j, v))
            neigh[j].append((i, v))
    idx = [np.array([j for j, _ in lst], dtype=np.int64) for lst in neigh]
    val = [np.array([v for _, v in lst], dtype=np.float64) for lst in neigh]
    return idx, val


def default_t_hi(q: QuadForm) -> float:
    """Row-sum bound on |dE| of a single flip."""
    rows = {i: abs(float(c)) for i, c in q.diag.items()}
    for (i, j), c in q.offdiag.items():
        v = abs(float(c))
        rows[i] = rows.get(i, 0.0) + v
        rows[j] = rows.get(j, 0.0) + v
    return max(rows.values(), default=1.0) or 1.0


def solve_sa(
    q: QuadForm,
    seed: int = 0,
    sweeps: int = 1000,
    restarts: int = 2,
    t_hi: Optional[float] = None,
    t_lo: Optional[float] = None,
    record_trace: bool = False,
) -> SolverResult:
    """Best-of-restarts single-flip Metropolis annealing; deterministic per seed."""
    if sweeps < 1:
        raise SolverError("sweeps must be >= 1")
    n = q.n
    if n == 0:
        return SolverResult(best=(), energy=q.constant, method="sa", proven_optimal=False,
                            seed=seed, sweeps=sweeps, trace=[] if record_trace else None)

    t_hi = t_hi if t_hi is not None else default_t_hi(q)
    t_lo = t_lo if t_lo is not None else max(1e-3 * t_hi, 1e-12)
    cool = (t_lo / t_hi) ** (1.0 / max(sweeps - 1, 1))

    nidx, nval = _adjacency(q)
    dvec = np.zeros(n, dtype=np.float64)
    for i, c in q.diag.items():
        dvec[i] = float(c)

    best_bits, best_e = None, None
    trace = [] if record_trace else None
    for r in range(restarts):
        rng = random.Random(seed * 1_000_003 + r)
        bits = np.array([rng.randrange(2) for _ in range(n)], dtype=np.int8)
        # local field h[i] = diag[i] + sum_j Q[i,j] b[j]; dE(flip i) = (1-2b_i) h_i
        h = dvec.copy()
        for i in range(n):
            if bits[i]:
                h[nidx[i]] += nval[i]
        cur = float(sum(dvec[i] for i in range(n) if bits[i]))
        for (i, j), c in q.offdiag.items():
            if bits[i] and bits[j]:
                cur += float(c)
        run_best, run_best_bits = cur, bits.copy()
        T = t_hi
        for sweep in range(sweeps):
            for _ in range(n):
                i = rng.randrange(n)
                de = (1.0 - 2.0 * bits[i]) * h[i]
                if de <= 0.0 or rng.random() < math.exp(-de / T):
                    delta = 1 - 2 * int(bits[i])
                    bits[i] ^= 1
                    h[nidx[i]] += delta * nval[i]
                    cur += de
                    if cur < run_best:
                        run_best, run_best_bits = cur, bits.copy()
            if trace is not None and r == 0:
                trace.append((sweep, run_best + float(q.constant), cur + float(q.constant), T))
            T *= cool
        if best_e is None or run_best < best_e:
            best_e, best_bits = run_best, run_best_bits

    bits = tuple(int(b) for b in best_bits)
    return SolverResult(
        best=bits,
        energy=q.energy(bits),  # exact recomputation
        method="sa",
        proven_optimal=False,
        seed=seed,
        sweeps=sweeps,
        trace=trace,
    )


def decode(plan: EncodingPlan, bits) -> dict:
    """Map a bit assignment back to variable (and slack) values."""
    values = {}
    for name, bid in plan.native_binary.items():
        values[name] = Fraction(int(bits[bid]))
    for g in plan.groups:
        val = g.decode([bits[b] for b in g.bit_ids])
        if g.role == "slack":
            values[f"slack:{g.owner}"] = val
        else:
            values[g.owner] = val
    return values


def trace_csv(trace) -> str:
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["sweep", "best_energy", "current_energy", "temperature"])
    for row in trace or []:
        w.writerow(row)
    return out.getvalue()
