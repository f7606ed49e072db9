from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsection.group import BoxSet, ElementSet, Heisenberg, Zd, product_set
from xsection.tiling import (TilingError, TilingInstance, TilingParams, TilingResult, eps_ok, is_eps_disjoint,
                             lemma_bound_holds, make_instance, min_scales, params_for, quasi_tile,
                             select_tile_centers, separated_thinning, verify_tiling)
from xsection._rng import make_rng

Z, Z2, H3 = Zd(1), Zd(2), Heisenberg()


def iv(lo, hi):
    return ElementSet(Z, np.arange(lo, hi + 1)[:, None])


def oracle_N(delta, c=1):
    mpmath.mp.dps = 60
    d = mpmath.mpf(str(delta))
    return int(mpmath.ceil(mpmath.log(d) / mpmath.log(1 - d / (8 * c))))


# ---------------------------------------------------------------- eps-disjointness

def test_is_eps_disjoint_examples():
    assert is_eps_disjoint([iv(0, 3), iv(10, 12), iv(20, 20)], 1e-6)
    assert not is_eps_disjoint([iv(0, 4), iv(0, 4)], 0.5)
    assert is_eps_disjoint([iv(0, 3), iv(3, 6)], 0.3)
    assert not is_eps_disjoint([iv(0, 3), iv(3, 6)], 0.25)


def test_is_eps_disjoint_errors():
    with pytest.raises(TilingError):
        is_eps_disjoint([iv(0, 3), ElementSet(Z, [])], 0.1)
    with pytest.raises(TilingError):
        is_eps_disjoint([iv(0, 3)], 0.0)


# ---------------------------------------------------------------- parameters

def test_params_for_delta_01():
    p = params_for(0.1, 1)
    assert p.N == oracle_N(0.1) == 184
    assert p.eps == 0.0058
    eps, d = Fraction("0.0058"), Fraction(1, 10)
    assert (1 - d) * (1 - 2 * eps) > (1 - 2 * d) * (1 + d + 2 * eps)
    # largest grid value: the next one fails
    assert not eps_ok(eps + Fraction(1, 10_000), d)
    assert eps < Fraction(1, 170)
    assert not p.violations()


def test_params_for_delta_005():
    p = params_for(0.05, 1)
    assert p.N == oracle_N(0.05)
    assert p.N > params_for(0.1, 1).N
    assert eps_ok(Fraction(str(p.eps)), Fraction("0.05"))


@pytest.mark.parametrize("delta", [0.0, -0.1, 0.2, 0.10001])
def test_params_for_rejects_delta(delta):
    with pytest.raises(TilingError, match="delta"):
        params_for(delta, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 100), st.integers(1, 3))
def test_min_scales_matches_mpmath(k, c):
    delta = k / 1000
    assert min_scales(delta, c) == oracle_N(delta, c)


def test_violations_listed():
    assert TilingParams(0.1, 1, 10, 0.0058).violations() == ["N must be at least 184"]
    assert any("eps" in v for v in TilingParams(0.1, 1, 184, 0.01).violations())
    assert any("delta" in v for v in TilingParams(0.3, 1, 184, 0.001).violations())


# ---------------------------------------------------------------- single scale

def test_select_singleton():
    A = iv(0, 99)
    F = iv(0, 11)
    B = ElementSet(Z, [(5,)])
    assert select_tile_centers(A, B, F, 0.1) == B


def test_select_empty():
    assert len(select_tile_centers(iv(0, 99), ElementSet(Z, []), iv(0, 11), 0.1)) == 0


def test_select_names_failed_hypothesis():
    with pytest.raises(TilingError, match="condition 3"):
        select_tile_centers(iv(0, 99), iv(0, 5), iv(0, 9), 0.1)
    with pytest.raises(TilingError, match="lemma hypothesis"):
        select_tile_centers(iv(0, 99), iv(90, 99), iv(0, 19), 0.1)
    with pytest.raises(TilingError, match="subset"):
        select_tile_centers(iv(0, 99), iv(95, 105), iv(-5, 5), 0.1)
    with pytest.raises(TilingError, match="condition 4"):
        select_tile_centers(iv(0, 99), iv(0, 5), iv(-5, 5), 0.1, U=Z.ball(1))


def _tiles(F, centers, A):
    return [product_set(F, ElementSet(F.group, [tuple(b)])).intersection(A) for b in centers.points]


def _random_z2_case(seed):
    rng = make_rng(seed, "test-select")
    n = int(rng.integers(8, 20))
    window = BoxSet(Z2, n).points
    pts = window[rng.random(len(window)) < rng.uniform(0.5, 1.0)]
    U = Z2.ball(int(rng.integers(0, 2)))
    A = ElementSet(Z2, separated_thinning(pts, Z2, U))
    F = BoxSet(Z2, int(rng.integers(2, 5)))
    cnt = np.array([len(t) for t in _tiles(F, A, A)])
    B = ElementSet(Z2, A.points[cnt > len(F) / 2])
    return A, B, F, U


@pytest.mark.parametrize("block", range(4))
def test_select_random_z2(block):
    for seed in range(50 * block, 50 * block + 50):
        A, B, F, U = _random_z2_case(seed)
        delta = 0.1
        ct = select_tile_centers(A, B, F, delta, U=U, V=ElementSet(Z2, [(0, 0)]))
        assert ct.issubset(B)
        if len(ct):
            assert is_eps_disjoint(_tiles(F, ct, A), delta)
        assert lemma_bound_holds(A, B, F, ct, delta)
        inst = TilingInstance(Z2, A, B, (F,), U, ElementSet(Z2, [(0, 0)]))
        res = TilingResult((ct.points,), 0.0)
        rep = verify_tiling(inst, TilingParams(delta, 1, 1, 0.0058), res)
        assert rep["per-scale delta-disjointness"].ok
        assert rep["cross-scale disjointness"].ok


# ---------------------------------------------------------------- multi-scale

def test_quasi_tile_single_interval_scale():
    # |F| = 10 is below the size hypothesis, so the checks are skipped
    A = iv(0, 99)
    inst = TilingInstance(Z, A, A, (iv(0, 9),), ElementSet(Z, [(0,)]), ElementSet(Z, [(0,)]))
    params = TilingParams(0.1, 1, 1, 0.0058)
    with pytest.raises(TilingError, match="condition 3"):
        quasi_tile(inst, params)
    res = quasi_tile(inst, params, check=False)
    assert res.coverage == 1.0
    assert res.centers[0][:, 0].tolist() == list(range(0, 100, 10))
    assert verify_tiling(inst, params, res).ok


def test_quasi_tile_degenerate_top_scale():
    params = params_for(0.1)
    inst = make_instance(Z, 40, 1.0, 3, params)
    res = quasi_tile(inst, params)
    used = [i for i, c in enumerate(res.centers) if len(c)]
    assert used == [len(inst.scales) - 1]
    assert res.coverage == 1.0


@pytest.mark.parametrize("group,scale", [(Z, 2000), (Z2, 40), (H3, 6)])
def test_quasi_tile_random_instances(group, scale):
    params = params_for(0.1)
    for seed in range(10):
        inst = make_instance(group, scale, 0.5, seed, params)
        assert inst.check(params).ok
        res = quasi_tile(inst, params)
        assert verify_tiling(inst, params, res).ok


@pytest.mark.parametrize("group,scale,used", [(Z, 4000, 1), (Z2, 60, 2)])
def test_quasi_tile_nondegenerate_ladder(group, scale, used):
    p = TilingParams(0.1, 1, 1, 0.05)
    inst = make_instance(group, scale, 0.6, 11, p, saturate=False)
    assert len(inst.scales) >= 2
    res = quasi_tile(inst, p, check=False)
    assert sum(1 for c in res.centers if len(c)) >= used
    assert verify_tiling(inst, p, res).ok


def test_quasi_tile_deterministic():
    params = params_for(0.1)
    inst = make_instance(Z2, 50, 0.4, 9, params)
    a, b = quasi_tile(inst, params), quasi_tile(inst, params)
    assert a.coverage == b.coverage
    assert all(np.array_equal(x, y) for x, y in zip(a.centers, b.centers))


def test_verify_tiling_counterexamples():
    A = iv(0, 99)
    F = iv(0, 19)
    inst = TilingInstance(Z, A, A, (F, F), ElementSet(Z, [(0,)]), ElementSet(Z, [(0,)]))
    p = TilingParams(0.1, 1, 2, 0.0058)
    overlap = TilingResult((np.array([[0]]), np.array([[10]])), 0.3)
    rep = verify_tiling(inst, p, overlap)
    assert not rep["cross-scale disjointness"].ok
    empty = TilingResult((np.zeros((0, 1), int), np.zeros((0, 1), int)), 0.0)
    rep = verify_tiling(inst, p, empty)
    assert not rep["coverage"].ok and rep["per-scale delta-disjointness"].ok
    same_scale = TilingResult((np.array([[0], [5]]), np.zeros((0, 1), int)), 0.0)
    assert not verify_tiling(inst, p, same_scale)["per-scale delta-disjointness"].ok


# ---------------------------------------------------------------- generator

def test_make_instance_z2_example():
    params = params_for(0.1)
    inst = make_instance(Z2, 200, 0.3, 42, params)
    rep = inst.check(params)
    assert rep.ok, rep.failed()
    assert len(rep.checks) >= 6


def test_make_instance_full_density():
    inst = make_instance(Z2, 20, 1.0, 0)
    assert inst.A == ElementSet(Z2, BoxSet(Z2, 20).points)


def test_make_instance_errors():
    with pytest.raises(TilingError, match="condition 3"):
        make_instance(Z, 2, 1.0, 0)
    with pytest.raises(TilingError, match="density"):
        make_instance(Z, 100, 0.0, 0)


def test_make_instance_deterministic():
    a = make_instance(H3, 5, 0.7, 4)
    b = make_instance(H3, 5, 0.7, 4)
    assert a.A == b.A and a.B == b.B and a.scales == b.scales
