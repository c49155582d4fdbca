"""QUBO solvers: exhaustive enumeration and seeded simulated annealing."""

import random
from fractions import Fraction
from itertools import product

import pytest

from quboforge.compiler import QuadForm, compile_model
from quboforge.bench import generate
from quboforge.solvers import (
    SolverError,
    decode,
    solve_exhaustive,
    solve_sa,
    trace_csv,
)


def random_form(rng, n, fractional=False):
    def coef():
        if fractional:
            return Fraction(rng.randint(-20, 20), rng.randint(1, 7))
        return Fraction(rng.randint(-10, 10))

    diag = {i: coef() for i in range(n) if rng.random() < 0.8}
    offdiag = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                offdiag[(i, j)] = coef()
    return QuadForm(n=n, diag=diag, offdiag=offdiag, constant=coef())


def brute_min(q):
    return min(q.energy(bits) for bits in product((0, 1), repeat=q.n))


def test_exhaustive_matches_brute_force():
    rng = random.Random(1)
    for trial in range(30):
        q = random_form(rng, rng.randint(1, 10), fractional=trial % 2 == 1)
        res = solve_exhaustive(q)
        assert res.energy == brute_min(q)
        assert res.energy == q.energy(res.best)
        assert res.proven_optimal


def test_exhaustive_tie_breaks_to_lowest_index():
    q = QuadForm(n=3)  # all-zero energy: every assignment ties
    res = solve_exhaustive(q)
    assert res.best == (0, 0, 0)


def test_exhaustive_respects_bit_cap():
    with pytest.raises(SolverError, match="cap"):
        solve_exhaustive(QuadForm(n=30))


def test_exhaustive_zero_bits():
    q = QuadForm(n=0, constant=Fraction(5))
    assert solve_exhaustive(q).energy == 5


def test_sa_deterministic_per_seed():
    rng = random.Random(2)
    q = random_form(rng, 12)
    a = solve_sa(q, seed=7, sweeps=200)
    b = solve_sa(q, seed=7, sweeps=200)
    assert a.best == b.best and a.energy == b.energy
    assert a.energy == q.energy(a.best)  # reported energy is exact


def test_sa_never_beats_exhaustive_and_usually_matches():
    model = generate("knapsack", 6, seed=5)
    q = compile_model(model).assembled()
    opt = solve_exhaustive(q).energy
    hits = 0
    for seed in range(100):
        res = solve_sa(q, seed=seed, sweeps=1000)
        assert res.energy >= opt
        hits += res.energy == opt
    assert hits >= 95


def test_sa_trace_recorded():
    rng = random.Random(3)
    q = random_form(rng, 8)
    res = solve_sa(q, seed=0, sweeps=50, record_trace=True)
    assert res.trace
    sweeps = [row[0] for row in res.trace]
    assert sweeps == sorted(sweeps)
    best = [row[1] for row in res.trace]
    assert all(a >= b for a, b in zip(best, best[1:]))  # best energy never worsens
    text = trace_csv(res.trace)
    assert text.splitlines()[0] == "sweep,best_energy,current_energy,temperature"
    assert len(text.splitlines()) == len(res.trace) + 1


def test_sa_rejects_bad_sweeps():
    with pytest.raises(SolverError):
        solve_sa(QuadForm(n=2), sweeps=0)


def test_decode_reports_variables_and_slacks():
    model = generate("knapsack", 4, seed=0)
    artifact = compile_model(model)
    res = solve_exhaustive(artifact.assembled())
    values = decode(artifact.plan, res.best)
    for v in model.variables:
        assert values[v.name] in (0, 1)
    slacks = [k for k in values if k.startswith("slack:")]
    assert slacks  # the knapsack capacity row carries a slack group
