"""Joint entropy of separated translate families and the mixing defect.

For a partition P and a K-separated family F the defect is
``|H(P on F) / |F| - H(P)|``.  For Z-Markov chains the joint law along a
sorted family is a product of matrix powers, which gives an exact oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import make_rng
from .entropy import EntropyError, _shards, plugin_entropy
from .group import ElementSet, GroupModel, Zd, is_separated
from .systems import Bernoulli, Markov, SymbolicSystem, shannon


class MixingError(ValueError):
    """A precondition of a mixing operation is violated."""


@dataclass(frozen=True)
class MixingReport:
    """One K scale of a mixing scan (entropies in bits)."""

    K_radius: int
    family: list
    joint_per_element: float
    H_P: float
    signed_defect: float
    stderr: float
    oracle_defect: float | None = None

    @property
    def defect(self) -> float:
        return abs(self.signed_defect)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["defect"] = self.defect
        return d


def separated_family(group: GroupModel, K: ElementSet, size: int, window: ElementSet, seed: int) -> ElementSet:
    """Random K-separated subset of ``window`` with ``size`` elements.

    Window points are visited in a seeded random order and kept when
    ``g h^-1`` and ``h g^-1`` avoid K for every kept h.

    Raises
    ------
    MixingError
        If the greedy pass cannot reach ``size`` points.
    """
    rng = make_rng(seed, "family")
    pts = window.points[rng.permutation(len(window))]
    Kp = K.points
    Kinv = group.inv_array(Kp)
    banned: set[int] = set()
    chosen = []
    for g in pts:
        key = int(group.keys(g[None])[0])
        if key in banned:
            continue
        chosen.append(g)
        if len(chosen) == size:
            break
        # g' is excluded iff g' in K g or g' in K^-1 g
        near = np.concatenate([group.mul_arrays(Kp, g[None]), group.mul_arrays(Kinv, g[None])])
        banned.update(group.keys(near).tolist())
        banned.add(key)
    if len(chosen) < size:
        raise MixingError(f"window of {len(window)} points hosts only {len(chosen)} K-separated points, "
                          f"{size} requested")
    out = ElementSet(group, np.array(chosen))
    assert is_separated(out, K)
    return out


def progression(step: int, size: int) -> ElementSet:
    """The Z-family {0, step, ..., (size-1) step}."""
    return ElementSet(Zd(1), (step * np.arange(size))[:, None])


def _family_samples(system: SymbolicSystem, F: ElementSet, n: int, rng) -> np.ndarray:
    if isinstance(system, Bernoulli):
        return system.draw(n * len(F), rng).reshape(n, len(F))
    if F.group.dim != 1:
        raise MixingError(f"{system.kind} supports only Z families")
    off = F.points[:, 0] - F.points[:, 0].min()
    path = system.sample_path(n + int(off.max()), rng)
    return path[np.arange(n)[:, None] + off[None, :]]


def joint_entropy_empirical(system: SymbolicSystem, P: np.ndarray | None, F: ElementSet, sample_size: int,
                            seed: int, n_shards: int = 20) -> tuple[float, float, float, float]:
    """Miller-Madow joint entropy of ``(P(g x))_{g in F}``.

    ``P`` maps symbols to parts (identity when None).  Returns the pooled
    joint entropy, its seed-split stderr, the one-site entropy ``H(P)`` and
    the stderr of the per-element defect ``H(F)/|F| - H(P)``.
    """
    k = system.alphabet_size
    P = np.arange(k) if P is None else np.asarray(P, dtype=np.int64)
    nP = int(P.max()) + 1
    if len(F) * math.log2(max(nP, 2)) > 40:
        raise EntropyError(f"|F| log2|P| = {len(F) * math.log2(max(nP, 2)):.4g} exceeds 40")
    if sample_size < 10_000:
        raise EntropyError("sample_size must be at least 10^4")
    rows = [P[_family_samples(system, F, m, make_rng(seed, "joint", i))]
            for i, m in enumerate(_shards(sample_size, n_shards))]
    allr = np.concatenate(rows)
    joint = plugin_entropy(allr)
    hp = plugin_entropy(allr.reshape(-1))
    per_j = np.array([plugin_entropy(r) for r in rows])
    per_d = np.array([plugin_entropy(r) / len(F) - plugin_entropy(r.reshape(-1)) for r in rows])
    s = math.sqrt(n_shards)
    return joint, float(per_j.std(ddof=1) / s), hp, float(per_d.std(ddof=1) / s)


def _irreducible(P: np.ndarray) -> bool:
    k = P.shape[0]
    reach = (P > 0).astype(np.int64) + np.eye(k, dtype=np.int64)
    for _ in range(max(1, math.ceil(math.log2(k)) + 1)):
        reach = np.minimum(reach @ reach, 1)
    return bool(np.all(reach > 0))


def markov_joint_entropy_exact(matrix: np.ndarray, stationary: np.ndarray, gaps: Sequence[int]) -> float:
    """Exact entropy of ``(X_0, X_{n_1}, X_{n_1+n_2}, ...)`` for a stationary chain.

    Chain rule: ``H(pi) + sum_j sum_i pi_i H(row i of P^{n_j})``.
    """
    P = np.asarray(matrix, dtype=float)
    pi = np.asarray(stationary, dtype=float)
    if any(int(g) < 1 for g in gaps):
        raise MixingError("gaps must be at least 1")
    if not _irreducible(P):
        raise MixingError("the transition matrix is reducible")
    h = shannon(pi)
    for g in gaps:
        Pn = np.linalg.matrix_power(P, int(g))
        h += float(sum(pi[i] * shannon(Pn[i]) for i in range(P.shape[0])))
    return h


def _gaps(F: ElementSet) -> list[int]:
    p = np.sort(F.points[:, 0])
    return np.diff(p).astype(int).tolist()


def mixing_scan(system: SymbolicSystem, P: np.ndarray | None, K_scales: Sequence[int], family_size: int,
                sample_size: int, seed: int, layout: str = "progression",
                window_scale: int | None = None) -> list[MixingReport]:
    """Mixing defect for K = word-metric balls of each radius in ``K_scales``.

    ``layout='progression'`` uses the tightest Z-family (step radius + 1);
    ``'random'`` draws a seeded separated family inside a box window.
    Markov systems on Z carry the exact oracle defect.
    """
    group = system.group
    out = []
    for r in K_scales:
        K = group.ball(int(r))
        if layout == "progression":
            if group.dim != 1:
                raise MixingError("progression layout needs Z")
            F = progression(int(r) + 1, family_size)
        elif layout == "random":
            W = group.folner(window_scale or max(4, 2 * (int(r) + 1) * family_size))
            F = separated_family(group, K, family_size, W, int(make_rng(seed, "scale", int(r)).integers(2**62)))
        else:
            raise MixingError(f"unknown layout {layout!r}")
        s = int(make_rng(seed, "scan", int(r)).integers(2**62))
        joint, _, hp, se = joint_entropy_empirical(system, P, F, sample_size, s)
        oracle = None
        if isinstance(system, Markov) and P is None:
            pi = system.stationary
            oracle = markov_joint_entropy_exact(system.P, pi, _gaps(F)) / len(F) - shannon(pi)
        out.append(MixingReport(int(r), F.tolist(), joint / len(F), hp, joint / len(F) - hp, se,
                                None if oracle is None else float(oracle)))
    return out
