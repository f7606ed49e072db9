import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsection.group import BoxSet, ElementSet, Zd
from xsection.section import (Castle, SectionError, SectionSample, TableCocycle, castle_ergodic_check,
                              castle_interior, collar_mask, ergodic_average, from_orbit_window, interval,
                              is_castle_invariant, mean_ergodic_deviation, tiling_castle, trend_test, validate)
from xsection.systems import Bernoulli

Z, Z2 = Zd(1), Zd(2)
E = ElementSet(Z, [(0,)])


def line_sample(positions, classes=None):
    pos = np.asarray(positions)[:, None]
    n = pos.shape[0]
    cls = np.zeros(n, int) if classes is None else classes
    return SectionSample(Z, pos, cls, np.full(n, 1 / n))


def fair_window(n, rule="symbol:0", seed=0, n_orbits=1):
    return from_orbit_window(Bernoulli((0.5, 0.5)), BoxSet(Z, n), rule, seed, n_orbits)


# ---------------------------------------------------------------- validation

def test_orbit_window_sample_validates():
    s = fair_window(500, seed=3, n_orbits=4)
    assert validate(s, Z.ball(0)).ok
    s2 = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 20), "symbol:1", 1)
    assert validate(s2, Z2.ball(0)).ok


def test_corrupted_pair_is_flagged():
    s = line_sample(np.arange(10))
    a = s.alpha([2], [5])[0]
    bad = SectionSample(Z, s.positions, s.classes, s.weights, cocycle=TableCocycle({(5, 2): tuple(a)}))
    rep = validate(bad, E)
    assert not rep["cocycle identity"].ok
    assert not rep["inverse"].ok
    assert rep["weights"].ok


def test_singleton_classes_valid():
    s = line_sample(np.zeros(6, int), classes=np.arange(6))
    assert validate(s, Z.ball(3)).ok


def test_u_discreteness_and_freeness():
    s = line_sample([0, 1, 5])
    assert not validate(s, Z.ball(1))["U-discreteness"].ok
    assert validate(s, E)["U-discreteness"].ok
    dup = line_sample([0, 0, 5])
    assert not validate(dup, E)["freeness"].ok


def test_bad_weights_flagged():
    s = SectionSample(Z, np.arange(4)[:, None], np.zeros(4, int), np.full(4, 0.3))
    assert not validate(s, E)["weights"].ok


# ---------------------------------------------------------------- generator

def test_intensity_of_symbol_rule():
    s = from_orbit_window(Bernoulli((0.5, 0.5)), interval(0, 999), "symbol:0", 11, n_orbits=20)
    n = 20 * 1000
    assert abs(s.meta["intensity"] - 0.5) < 5 * math.sqrt(0.25 / n)


def test_always_rule_is_identity_section():
    W = interval(0, 99)
    s = from_orbit_window(Bernoulli((0.5, 0.5)), W, "always", 0)
    assert len(s) == 100 and s.meta["intensity"] == 1.0
    assert s.alpha([7], [3])[0].tolist() == [4]


def test_origin_rule_gives_singletons():
    s = from_orbit_window(Bernoulli((0.5, 0.5)), BoxSet(Z, 10), "origin", 0, n_orbits=5)
    assert len(s) == 5 and len(s.class_ids) == 5
    assert np.all(s.positions == 0)


def test_dropped_orbits_are_counted():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        s = from_orbit_window(Bernoulli((0.5, 0.5)), interval(0, 1), "symbol:0", 2, n_orbits=40)
    assert s.meta["dropped_orbits"] > 0 and w
    with pytest.raises(SectionError), pytest.warns(UserWarning):
        from_orbit_window(Bernoulli((1.0, 0.0)), interval(0, 9), "symbol:1", 0)


# ---------------------------------------------------------------- ergodic averages

def test_constant_function_averages_to_one():
    s = fair_window(300, seed=2)
    avg = ergodic_average(s, np.ones(len(s)), interval(-5, 5))
    assert np.all(avg == 1.0)


def test_identity_window_returns_h():
    s = fair_window(300, seed=2)
    h = np.random.default_rng(0).random(len(s))
    assert np.allclose(ergodic_average(s, h, E), h, rtol=0, atol=1e-12)


def _brute_average(s, h, F):
    out = np.zeros(len(s))
    fs = {tuple(f) for f in F.tolist()}
    for i in range(len(s)):
        vals = [h[j] for j in range(len(s)) if s.classes[j] == s.classes[i]
                and tuple(s.alpha([i], [j])[0].tolist()) in fs]
        out[i] = np.mean(vals) if vals else 0.0
    return out


@pytest.mark.parametrize("F", [interval(-3, 3), interval(0, 4), ElementSet(Z, [(-2,), (0,), (5,)])])
def test_average_matches_brute_force(F):
    s = from_orbit_window(Bernoulli((0.5, 0.5)), BoxSet(Z, 30), "symbol:0", 4, n_orbits=2)
    h = s.labels + np.arange(len(s)) % 3
    assert np.allclose(ergodic_average(s, h, F), _brute_average(s, h, F))


def test_z2_box_average_matches_generic_path():
    s = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 8), "symbol:0", 1)
    h = np.random.default_rng(1).random(len(s))
    box = BoxSet(Z2, 2)
    explicit = ElementSet(Z2, box.points)
    assert np.allclose(ergodic_average(s, h, box), ergodic_average(s, h, explicit))


def test_deviation_shrinks_with_window_on_one_sample():
    s = from_orbit_window(Bernoulli((0.5, 0.5)), BoxSet(Z, 100_000), "symbol:0,1", 5)
    h = (s.labels == 0).astype(float)
    d = [mean_ergodic_deviation(s, h, interval(-n, n), 0.1) for n in (10, 100, 1000)]
    assert d[0] > d[1] > d[2]


def test_collar_mask():
    s = fair_window(50, rule="always")
    m = collar_mask(s, interval(-3, 3))
    assert m.sum() == 6 and m[0] and m[-1]


# ---------------------------------------------------------------- castles

def interior_setup():
    # ambient positions -15..5; tower at positions -9..0 with base 0, so addresses 0..9
    s = line_sample(np.arange(-15, 6))
    tower = np.flatnonzero((s.positions[:, 0] >= -9) & (s.positions[:, 0] <= 0))
    base = int(np.flatnonzero(s.positions[:, 0] == 0)[0])
    return s, Castle(s, np.array([base]), (tower,)), base


def test_interior_example():
    s, c, x = interior_setup()
    inner, bd = castle_interior(c, x, Z.ball(1))
    assert sorted(s.alpha(np.full(len(inner), x), inner)[:, 0].tolist()) == list(range(1, 9))
    assert sorted(s.alpha(np.full(len(bd), x), bd)[:, 0].tolist()) == [0, 9]
    inner, bd = castle_interior(c, x, E)
    assert len(inner) == 10 and len(bd) == 0


def test_interior_of_whole_class():
    s = line_sample(np.arange(12))
    c = Castle(s, np.array([0]), (np.arange(12),))
    inner, bd = castle_interior(c, 0, Z.ball(2))
    assert len(inner) == 12 and len(bd) == 0
    with pytest.raises(SectionError):
        castle_interior(c, 3, E)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 29), min_size=1, max_size=30, unique=True), st.integers(0, 3))
def test_interior_duality(members, r):
    s = line_sample(np.arange(30))
    t = np.array(sorted(members))
    c = Castle(s, t[:1], (t,))
    inner, bd = castle_interior(c, int(t[0]), Z.ball(r))
    assert len(np.intersect1d(inner, bd)) == 0
    assert np.array_equal(np.union1d(inner, bd), t)


def test_invariance_examples():
    s = line_sample(np.arange(20), classes=np.repeat([0, 1], 10))
    full = Castle(s, np.array([0, 10]), (np.arange(10), np.arange(10, 20)))
    for eps in (1e-6, 0.5):
        ok, off = is_castle_invariant(full, Z.ball(1), eps)
        assert ok and off == 0
    s2 = line_sample(np.arange(8))
    half = Castle(s2, np.array([2]), (np.array([2, 3, 4, 5]),))
    ok, off = is_castle_invariant(half, Z.ball(1), 0.4)
    assert not ok and off == pytest.approx(half.measure())
    with pytest.raises(SectionError):
        is_castle_invariant(Castle(s2, np.zeros(0, int), ()), Z.ball(1), 0.1)


def test_tiling_castle_invariance_improves_with_scale():
    s = fair_window(20_000, rule="symbol:0", seed=1)
    offs = []
    for n in (2, 20, 200):
        c = tiling_castle(s, interval(0, n), 0.1)
        offs.append(is_castle_invariant(c, Z.ball(1), 0.05)[1] / c.measure())
    assert offs[0] > offs[-1]
    assert is_castle_invariant(tiling_castle(s, interval(0, 400), 0.1), Z.ball(1), 0.05)[0]


def test_castle_ergodic_constant_and_singleton():
    s = line_sample(np.arange(10))
    c = Castle(s, np.arange(10), tuple(np.array([i]) for i in range(10)))
    rep = castle_ergodic_check(s, c, np.full(10, 3.0), 0.01)
    assert rep.ok and rep.good_fraction == 1.0
    h = np.zeros(10)
    h[4] = 1.0
    one = Castle(s, np.array([4]), (np.array([4]),))
    assert not castle_ergodic_check(s, one, h, 0.05).ok
    with pytest.raises(SectionError):
        castle_ergodic_check(s, one, h, 0.5)


def test_castle_ergodic_z2_pass_rate_grows():
    rates = []
    for n in (1, 8):
        ok = 0
        for seed in range(8):
            s = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 60), "always", seed)
            c = tiling_castle(s, BoxSet(Z2, n), 0.1)
            ok += castle_ergodic_check(s, c, s.labels.astype(float), 0.1).ok
        rates.append(ok / 8)
    assert rates[0] < rates[1] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_castle_measure_additive(seed):
    s = fair_window(400, seed=seed % 50)
    c = tiling_castle(s, interval(0, 9), 0.1)
    rng = np.random.default_rng(seed)
    mask = rng.random(len(c.base)) < 0.5
    assert c.measure(mask) + c.measure(~mask) == pytest.approx(c.measure())
    # uniform weights: mu_T(A) equals the mass of the range
    assert c.measure() == pytest.approx(c.range_measure())


def test_castle_rejects_bad_towers():
    s = line_sample(np.arange(6), classes=np.array([0, 0, 0, 1, 1, 1]))
    with pytest.raises(SectionError, match="disjoint"):
        Castle(s, np.array([0, 1]), (np.array([0, 1]), np.array([1, 2])))
    with pytest.raises(SectionError, match="class"):
        Castle(s, np.array([2]), (np.array([2, 3]),))
    with pytest.raises(SectionError, match="own tower"):
        Castle(s, np.array([0]), (np.array([1, 2]),))


def test_tiling_castle_towers_disjoint_and_in_class():
    s = from_orbit_window(Bernoulli((0.5, 0.5), Z2), BoxSet(Z2, 30), "symbol:0", 3, n_orbits=2)
    c = tiling_castle(s, BoxSet(Z2, 2), 0.1)
    allpts = np.concatenate(c.towers)
    assert np.unique(allpts).size == allpts.size
    assert all(np.all(s.classes[t] == s.classes[b]) for b, t in zip(c.base, c.towers))


# ---------------------------------------------------------------- serialization and trend test

def test_json_round_trip():
    s = fair_window(40, seed=9, n_orbits=2)
    doc = json.loads(json.dumps(s.to_dict()))
    t = SectionSample.from_dict(doc)
    assert np.array_equal(t.positions, s.positions) and np.array_equal(t.classes, s.classes)
    assert np.array_equal(t.weights, s.weights) and np.array_equal(t.labels, s.labels)
    bad = SectionSample(Z, s.positions, s.classes, s.weights, cocycle=TableCocycle({(0, 1): (3,)}))
    back = SectionSample.from_dict(json.loads(json.dumps(bad.to_dict())))
    assert back.alpha([0], [1])[0].tolist() == [3]


def test_trend_test():
    x = np.arange(20)
    assert trend_test(x, -x + 0.1 * np.sin(x), "decreasing")[0]
    assert not trend_test(x, x, "decreasing")[0]
    assert trend_test(x, x, "increasing")[0]
    with pytest.raises(SectionError):
        trend_test(x, x, "up")
