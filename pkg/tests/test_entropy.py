import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from castle_cases import brute_entropy, build, random_case
from xsection.entropy import (Ball, EntropyError, FiberPartition, Partition, abramov_check, block_entropy,
                              castle_entropy_exact, castle_entropy_upper, comparison_check, exactly_clusterable,
                              fatten, lex_rank_sample, max_drops, pack_rows, pattern_table, plugin_entropy, rls,
                              shape_fibers, spectra_consistent, transfer_check, validate_ball)
from xsection.group import BoxSet, ElementSet, Zd
from xsection.section import Castle, SectionSample, from_orbit_window, interval, tiling_castle
from xsection.systems import Bernoulli, analytic_entropy, suspend, symmetric_markov

Z, Z2 = Zd(1), Zd(2)


def rls_reference(cover, fibers, A, mu):
    total = 0.0
    for x in A:
        k = sum(1 for C in cover if any(fibers[y] == fibers[x] for y in C))
        total += mu[x] * (math.log2(k) if k > 1 else 0.0)
    return total


# ---------------------------------------------------------------- rls

def test_rls_examples():
    fib = FiberPartition(np.array([0, 0, 1, 1]))
    A = np.arange(4)
    mu = np.full(4, 0.25)
    assert rls([np.array([0, 1]), np.array([2, 3])], fib, A, mu) == 0.0
    both = [np.array([0, 2]), np.array([1, 3])]
    assert rls(both, fib, A, mu) == 1.0
    with pytest.raises(EntropyError):
        rls([np.array([0, 5])], FiberPartition(np.zeros(6, int)), A, np.full(6, 1 / 6))


def test_rls_random_covers_match_reference():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = 6
        fib = rng.integers(0, 3, n)
        mu = rng.random(n)
        mu /= mu.sum()
        cover = [np.flatnonzero(rng.random(n) < 0.4) for _ in range(int(rng.integers(1, 5)))]
        got = rls(cover, FiberPartition(fib), np.arange(n), mu)
        assert got == pytest.approx(rls_reference(cover, fib, range(n), mu), abs=1e-12)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_rls_invariant_under_fiber_measurable_refinement(seed):
    rng = np.random.default_rng(seed)
    n = 10
    fib = rng.integers(0, 4, n)
    mu = np.full(n, 1 / n)
    cover = [np.flatnonzero(rng.random(n) < 0.5) for _ in range(3)]
    # D: a partition into unions of fibers
    side = rng.integers(0, 2, 4)[fib]
    refined = [C[side[C] == j] for C in cover for j in (0, 1)]
    refined = [C for C in refined if C.size]
    F = FiberPartition(fib)
    assert rls(refined, F, np.arange(n), mu) == pytest.approx(rls(cover, F, np.arange(n), mu))


# ---------------------------------------------------------------- balls

def test_ball_singleton_full_alphabet():
    s, c, P, F = build([(4, 1, [0, 1, 1, 0])])
    x = int(c.base[0])
    addr = c.addresses(0)
    for eps in (0.0, 0.3):
        assert validate_ball(Ball(np.array([x]), {0: addr}), P, c, eps, F)[0]


def test_ball_condition_three():
    s, c, P, F = build([(3, 0, [0, 1, 1]), (3, 0, [0, 0, 1])])
    addr = c.addresses(0)
    ok, msg = validate_ball(Ball(c.base, {0: addr}), P, c, 0.0, F)
    assert not ok and msg.startswith("condition 3")


def test_ball_condition_two_at_eps_zero():
    s, c, P, F = build([(4, 0, [0, 1, 1, 0])])
    addr = c.addresses(0)[:-1]
    ok, msg = validate_ball(Ball(c.base, {0: addr}), P, c, 0.0, F)
    assert not ok and msg.startswith("condition 2")
    assert validate_ball(Ball(c.base, {0: addr}), P, c, 0.3, F)[0]


def test_ball_condition_one_and_injectivity():
    s, c, P, F = build([(3, 0, [0, 1, 1])])
    outside = np.array([[5]])
    assert validate_ball(Ball(c.base, {0: outside}), P, c, 0.9, F)[1].startswith("condition 1")
    twice = np.array([[0], [0], [-1]])
    ok, msg = validate_ball(Ball(c.base, {0: twice}), P, c, 0.0, F)
    assert not ok


def test_max_drops():
    assert max_drops(5, 0.0) == 0
    assert max_drops(5, 0.2) == 0
    assert max_drops(5, 0.21) == 1
    assert max_drops(10, 0.5) == 4


# ---------------------------------------------------------------- castle entropy

def test_identical_towers_zero():
    s, c, P, F = build([(3, 0, [0, 1, 0])] * 4)
    assert castle_entropy_upper(P, c, 0.0, F) == 0.0
    assert castle_entropy_exact(P, c, 0.0, F) == 0.0


def test_single_label_zero():
    # a one-label partition needs fibers that resolve tower shapes
    rng = np.random.default_rng(1)
    for _ in range(20):
        s, c, P, F = random_case(rng)
        F = F.join(shape_fibers(c))
        P1 = Partition(np.zeros(len(s), int), 1)
        assert castle_entropy_upper(P1, c, 0.1, F) == 0.0
        assert castle_entropy_exact(P1, c, 0.1, F) == 0.0


def test_single_label_trivial_fibers_separates_shapes():
    s, c, P, F = build([(2, 0, [0, 0]), (3, 0, [0, 0, 0])])
    P1 = Partition(np.zeros(len(s), int), 1)
    assert castle_entropy_exact(P1, c, 0.0, F) > 0
    assert castle_entropy_exact(P1, c, 0.0, shape_fibers(c)) == 0.0


def test_single_point_base():
    s, c, P, F = build([(5, 2, [0, 1, 1, 0, 1])])
    assert castle_entropy_exact(P, c, 0.0, F) == 0.0


def test_two_incompatible_towers_forced_apart():
    s, c, P, F = build([(2, 0, [0, 1]), (2, 0, [1, 0])])
    mu_A = float(s.weights[c.base].sum())
    assert castle_entropy_exact(P, c, 0.0, F) == pytest.approx(mu_A * math.log2(2))


def test_exact_cap():
    rng = np.random.default_rng(0)
    s, c, P, F = build([(1, 0, [0])] * 9)
    with pytest.raises(EntropyError):
        castle_entropy_exact(P, c, 0.1, F)


@pytest.mark.parametrize("seed", range(4))
def test_upper_dominates_exact_and_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(60):
        s, c, P, F = random_case(rng, max_base=5, max_tower=4)
        for eps in (0.0, 0.3, 0.5):
            ex = castle_entropy_exact(P, c, eps, F)
            assert ex == pytest.approx(brute_entropy(P, c, eps, F), abs=1e-12)
            up = castle_entropy_upper(P, c, eps, F)
            assert up >= ex - 1e-12
            if exactly_clusterable(c, eps):
                assert up == pytest.approx(ex, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 0.5), st.floats(0, 0.5))
def test_exact_monotone_in_eps(seed, e1, e2):
    e1, e2 = sorted((e1, e2))
    s, c, P, F = random_case(np.random.default_rng(seed))
    assert castle_entropy_exact(P, c, e1, F) >= castle_entropy_exact(P, c, e2, F) - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25, 0.5]))
def test_castle_additivity_for_separated_fibers(seed, eps):
    rng = np.random.default_rng(seed)
    m1, m2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    towers = []
    for _ in range(m1 + m2):
        L = int(rng.integers(1, 4))
        towers.append((L, 0, rng.integers(0, 2, L).tolist()))
    fib = [0] * m1 + [1] * m2
    s, c, P, F = build(towers, fib)
    c1 = Castle(s, c.base[:m1], c.towers[:m1])
    c2 = Castle(s, c.base[m1:], c.towers[m1:])
    total = castle_entropy_exact(P, c, eps, F)
    assert total == pytest.approx(castle_entropy_exact(P, c1, eps, F) + castle_entropy_exact(P, c2, eps, F))


def test_comparison_same_castle_and_trivial_partition():
    s, c, P, F = build([(2, 0, [0, 1]), (2, 0, [1, 0]), (3, 0, [1, 1, 0])])
    rep = comparison_check(P, c, c, 0.1, F)
    assert rep["ok"] and rep["method"] == "exact"
    P1 = Partition(np.zeros(len(s), int), 1)
    rep = comparison_check(P1, c, c, 0.1, shape_fibers(c))
    assert rep["lhs"] == 0.0 and rep["rhs"] == pytest.approx(0.2)


def test_comparison_coverage_hypothesis():
    s, c, P, F = build([(2, 0, [0, 1]), (2, 0, [1, 0])])
    partial = Castle(s, c.base[:1], c.towers[:1])
    with pytest.raises(EntropyError, match="covers"):
        comparison_check(P, partial, c, 0.1, F)


def test_shape_fibers_make_spectra_local():
    smp = from_orbit_window(Bernoulli((0.5, 0.5)), BoxSet(Z, 300), "symbol:0", 2)
    c = tiling_castle(smp, interval(0, 9), 0.1, collar=False)
    F = shape_fibers(c)
    assert spectra_consistent(smp, F, Z.ball(0))
    assert not spectra_consistent(smp, FiberPartition.trivial(len(smp)))


# ---------------------------------------------------------------- fattening

def test_fatten_examples():
    W = interval(0, 9)
    smp = from_orbit_window(Bernoulli((0.5, 0.5)), W, lambda pos, lab: pos[:, 0] % 2 == 0, 3)
    P = Partition(smp.labels, 2)
    Q = fatten(P, smp, ElementSet(Z, [(0,), (1,)]))[0]
    assert np.array_equal(Q[0::2], P.labels) and np.array_equal(Q[1::2], P.labels)
    Q0 = fatten(P, smp, ElementSet(Z, [(0,)]))[0]
    assert np.all(Q0[1::2] == 2) and np.array_equal(Q0[0::2], P.labels)
    full = from_orbit_window(Bernoulli((0.5, 0.5)), W, "always", 3)
    Qf = fatten(Partition(full.labels, 2), full, ElementSet(Z, [(0,)]))[0]
    assert not np.any(Qf == 2)
    with pytest.raises(EntropyError):
        fatten(Partition(full.labels, 2), full, ElementSet(Z, [(0,), (1,)]))


# ---------------------------------------------------------------- block entropy

def test_pack_rows_injective():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 3, (2000, 6))
    codes = pack_rows(rows)
    assert np.unique(codes).size == np.unique(rows, axis=0).shape[0]
    wide = rng.integers(0, 1000, (500, 9))
    assert np.unique(pack_rows(wide)).size == np.unique(wide, axis=0).shape[0]


def test_plugin_entropy_miller_madow():
    codes = np.array([0, 1] * 500)
    assert plugin_entropy(codes) == pytest.approx(1 + 1 / (2 * 1000 * math.log(2)))


@pytest.mark.parametrize("system,F", [
    (Bernoulli((0.5, 0.5)), interval(0, 9)),
    (Bernoulli((0.3, 0.7)), interval(0, 9)),
    (symmetric_markov(0.9), interval(0, 9)),
    (Bernoulli((0.3, 0.7), Z2), BoxSet(Z2, 1)),
])
def test_block_entropy_oracles(system, F):
    est = block_entropy(system, F, 200_000, 1)
    target = analytic_entropy(system)
    assert abs(est.estimate - target) < max(4 * est.stderr, 1e-3)
    assert abs(est.estimate - target) / target < 0.02


def test_block_entropy_guards():
    with pytest.raises(EntropyError):
        block_entropy(Bernoulli((0.5, 0.5)), interval(0, 40), 20_000, 0)
    with pytest.raises(EntropyError):
        block_entropy(Bernoulli((0.5, 0.5)), interval(0, 9), 5_000, 0)


def test_block_entropy_reproducible():
    a = block_entropy(symmetric_markov(0.8), interval(0, 5), 20_000, 3)
    b = block_entropy(symmetric_markov(0.8), interval(0, 5), 20_000, 3)
    assert a == b


def test_pattern_table(tmp_path):
    n = pattern_table(Bernoulli((0.5, 0.5)), interval(0, 2), 10_000, 0, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert n == 8 and len(lines) == 9 and lines[0] == "pattern,count"


# ---------------------------------------------------------------- Abramov and Kac

def test_abramov_whole_space():
    rep = abramov_check(Bernoulli((0.5, 0.5)), [0, 1], 100_000, 0)
    assert rep["target"] == 1.0 and abs(rep["ratio"] - 1) < 0.03
    assert rep["kac_mean"] == 1.0


def test_abramov_suspension():
    base = Bernoulli((0.5, 0.5))
    rep = abramov_check(base, suspend(base, 2), 200_000, 1)
    assert rep["target"] == 0.5 and abs(rep["ratio"] - 1) < 0.02


def test_abramov_fair_coin_cylinder():
    rep = abramov_check(Bernoulli((0.5, 0.5)), [0], 200_000, 2)
    assert rep["target"] == 2.0 and abs(rep["ratio"] - 1) < 0.05
    assert abs(rep["kac_mean"] - 2.0) < 3 * rep["kac_stderr"]


def test_abramov_zero_cylinder():
    with pytest.raises(EntropyError):
        abramov_check(Bernoulli((1.0, 0.0)), [1], 20_000, 0)


# ---------------------------------------------------------------- transfer

def test_transfer_trivial_partition():
    smp = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 20), "always", 0)
    beta = lex_rank_sample(smp)
    P1 = Partition(np.zeros(len(smp), int), 1)
    rep = transfer_check(smp, beta, P1, None, BoxSet(Z2, 1), interval(0, 8), 0.3)
    assert rep["alpha"]["estimate"] == 0.0 and rep["beta"]["estimate"] == 0.0 and rep["ok"]


def test_transfer_constant_names():
    smp = from_orbit_window(Bernoulli((1.0,), Z2), BoxSet(Z2, 20), "always", 0)
    beta = lex_rank_sample(smp)
    P = Partition(smp.labels, 2)
    rep = transfer_check(smp, beta, P, None, BoxSet(Z2, 1), interval(0, 8), 0.3)
    assert rep["alpha"]["estimate"] == 0.0 and rep["beta"]["estimate"] == 0.0


def test_transfer_rejects_different_relations():
    a = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 5), "always", 0)
    b = lex_rank_sample(from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 6), "always", 0))
    with pytest.raises(EntropyError):
        transfer_check(a, b, Partition(a.labels, 2), FiberPartition.trivial(len(a)), BoxSet(Z2, 1),
                       interval(0, 8), 0.3)
