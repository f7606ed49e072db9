import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsection.entropy import EntropyError
from xsection.group import BoxSet, ElementSet, Heisenberg, Zd, is_separated
from xsection.mixing import (MixingError, joint_entropy_empirical, markov_joint_entropy_exact, mixing_scan,
                             progression, separated_family)
from xsection.systems import Bernoulli, Markov, periodic, shannon, symmetric_markov

Z, Z2 = Zd(1), Zd(2)
H09 = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
M09 = symmetric_markov(0.9)


def test_separated_family_trivial_K():
    F = separated_family(Z2, ElementSet(Z2, [(0, 0)]), 20, BoxSet(Z2, 3), 0)
    assert len(F) == 20 and is_separated(F, ElementSet(Z2, [(0, 0)]))


def test_progression_is_separated():
    for N in (1, 5, 30):
        assert is_separated(progression(N + 1, 10), Z.ball(N))
        assert not is_separated(progression(N, 10), Z.ball(N))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([Z, Z2, Heisenberg()]), st.integers(0, 2))
def test_random_families_are_separated(seed, group, r):
    K = group.ball(r)
    F = separated_family(group, K, 5, group.folner(6 + 3 * r), seed)
    assert len(F) == 5 and is_separated(F, K)


def test_separated_family_infeasible():
    with pytest.raises(MixingError):
        separated_family(Z, Z.ball(5), 10, BoxSet(Z, 10), 0)


def test_oracle_examples():
    pi = M09.stationary
    assert markov_joint_entropy_exact(M09.P, pi, []) == pytest.approx(1.0)
    assert markov_joint_entropy_exact(M09.P, pi, [1]) / 2 == pytest.approx((1 + H09) / 2, abs=1e-12)
    far = markov_joint_entropy_exact(M09.P, pi, [10**6]) / 2
    assert abs(far - shannon(pi)) < 1e-9


def _brute_joint(P, pi, gaps):
    # enumerate every path of the family
    k = P.shape[0]
    powers = [np.linalg.matrix_power(P, g) for g in gaps]
    probs = []
    for path in np.ndindex(*([k] * (len(gaps) + 1))):
        p = pi[path[0]]
        for j, M in enumerate(powers):
            p *= M[path[j], path[j + 1]]
        probs.append(p)
    return shannon(np.array(probs))


@pytest.mark.parametrize("gaps", [[1], [2, 3], [1, 1, 4], [5, 1, 2, 7]])
def test_oracle_matches_enumeration(gaps):
    M = Markov(((0.7, 0.2, 0.1), (0.3, 0.3, 0.4), (0.25, 0.25, 0.5)))
    assert markov_joint_entropy_exact(M.P, M.stationary, gaps) == pytest.approx(
        _brute_joint(M.P, M.stationary, gaps), abs=1e-12)


def test_oracle_defect_monotone():
    for stay in (0.6, 0.9, 0.99, 0.2):
        M = symmetric_markov(stay)
        pi = M.stationary
        d = [shannon(pi) - markov_joint_entropy_exact(M.P, pi, [N]) / 2 for N in range(1, 51)]
        assert all(a >= b - 1e-15 for a, b in zip(d, d[1:]))


def test_oracle_rejects_reducible():
    with pytest.raises(MixingError):
        markov_joint_entropy_exact(np.eye(2), np.array([0.5, 0.5]), [1])
    with pytest.raises(MixingError):
        markov_joint_entropy_exact(M09.P, M09.stationary, [0])


def test_singleton_family_is_one_site_entropy():
    F = ElementSet(Z, [(0,)])
    joint, _, hp, _ = joint_entropy_empirical(Bernoulli((0.3, 0.7)), None, F, 50_000, 0)
    assert joint == hp


def test_iid_defect_zero():
    F = separated_family(Z2, Z2.ball(2), 6, BoxSet(Z2, 20), 1)
    joint, se, hp, sed = joint_entropy_empirical(Bernoulli((0.3, 0.7), Z2), None, F, 200_000, 2)
    assert abs(joint / len(F) - hp) < 3 * sed + 1e-12


def test_two_point_markov_matches_oracle():
    for N in (1, 3, 10):
        F = ElementSet(Z, [(0,), (N,)])
        joint, se, _, _ = joint_entropy_empirical(M09, None, F, 200_000, N)
        exact = markov_joint_entropy_exact(M09.P, M09.stationary, [N])
        assert abs(joint - exact) < 3 * se + 1e-3


def test_guards():
    with pytest.raises(EntropyError):
        joint_entropy_empirical(M09, None, progression(1, 41), 20_000, 0)
    with pytest.raises(EntropyError):
        joint_entropy_empirical(M09, None, progression(1, 4), 2_000, 0)


@pytest.mark.parametrize("system,layout", [(Bernoulli((0.5, 0.5)), "progression"),
                                            (M09, "progression"),
                                            (Bernoulli((0.2, 0.8), Z2), "random")])
def test_subadditivity(system, layout):
    for rep in mixing_scan(system, None, [0, 2, 5], 6, 100_000, 4, layout=layout):
        assert rep.signed_defect <= 3 * rep.stderr + 1e-12
        assert rep.defect == abs(rep.signed_defect)


def test_periodic_control_keeps_defect():
    reps = mixing_scan(periodic(3), None, [1, 4, 10], 8, 50_000, 0)
    for r in reps:
        assert r.defect > 0.05
        assert r.oracle_defect is not None and abs(r.oracle_defect) > 0.05


def test_scan_reproducible():
    a = mixing_scan(M09, None, [1, 3], 4, 20_000, 9)
    b = mixing_scan(M09, None, [1, 3], 4, 20_000, 9)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
