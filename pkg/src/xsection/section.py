"""Finite cross-section models, castles and the empirical ergodic theorems.

A :class:`SectionSample` is a finite set of points with weights, a partition
into classes (the equivalence relation) and a cocycle into a group model.  The
default cocycle is ``alpha(x, y) = g_x g_y^-1`` where ``g_x`` is the window
position of ``x``, so the cocycle identity holds by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._report import Report
from ._rng import make_rng
from .group import BoxSet, ElementSet, GroupModel, Zd, parse_group
from .systems import SymbolicSystem
from .tiling import _greedy, _interval, build_tiles


class SectionError(ValueError):
    """A precondition of a cross-section operation is violated."""


# ----------------------------------------------------------------------
# cocycles
# ----------------------------------------------------------------------

class PositionCocycle:
    """``alpha(x, y) = g_x g_y^-1`` from the stored positions."""

    overrides: Mapping = {}

    def alpha(self, sample: "SectionSample", i: np.ndarray, j: np.ndarray) -> np.ndarray:
        g = sample.group
        pos = sample.positions
        return g.mul_arrays(pos[np.asarray(i)], g.inv_array(pos[np.asarray(j)]))

    def to_dict(self) -> dict:
        return {"kind": "position"}


@dataclass(frozen=True)
class TableCocycle(PositionCocycle):
    """The position cocycle with explicitly overridden pairs.

    ``overrides`` maps ``(i, j)`` point-index pairs to group elements.  Used to
    build deliberately broken samples for the validator.
    """

    overrides: Mapping = field(default_factory=dict)

    def alpha(self, sample, i, j):
        i = np.atleast_1d(np.asarray(i, dtype=np.int64))
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        out = super().alpha(sample, i, j)
        if self.overrides:
            for r, (a, b) in enumerate(zip(i.tolist(), j.tolist())):
                hit = self.overrides.get((a, b))
                if hit is not None:
                    out[r] = hit
        return out

    def to_dict(self):
        return {"kind": "table",
                "overrides": [[int(a), int(b), list(map(int, v))] for (a, b), v in sorted(self.overrides.items())]}


# ----------------------------------------------------------------------
# samples
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SectionSample:
    """Points, weights, classes and a cocycle over ``group``.

    Attributes
    ----------
    positions : (n, dim) int64 array
        Window position of each point.
    classes : (n,) int64 array
        Class id of each point.
    weights : (n,) float array
        The measure; sums to one.
    labels : (n,) int64 array or None
        System symbol at each point, used to build partitions.
    window : ElementSet or None
        The sampled window, used for collar exclusion.
    """

    group: GroupModel
    positions: np.ndarray
    classes: np.ndarray
    weights: np.ndarray
    labels: np.ndarray | None = None
    cocycle: PositionCocycle = field(default_factory=PositionCocycle)
    window: ElementSet | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = self.group.as_array(self.positions) if len(self.positions) else np.zeros((0, self.group.dim), np.int64)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "classes", np.asarray(self.classes, dtype=np.int64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        n = pos.shape[0]
        if self.classes.shape != (n,) or self.weights.shape != (n,):
            raise SectionError("positions, classes and weights must have one entry per point")
        # (class, position key) lookup table
        keys = self.group.keys(pos) if n else np.zeros(0, np.int64)
        order = np.lexsort((keys, self.classes))
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_skeys", keys[order])
        cls_sorted = self.classes[order]
        uniq, start = np.unique(cls_sorted, return_index=True)
        object.__setattr__(self, "_cls", uniq)
        object.__setattr__(self, "_start", np.append(start, n))

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    @property
    def class_ids(self) -> np.ndarray:
        return self._cls

    def members(self, c: int) -> np.ndarray:
        """Point indices of class ``c`` in position order."""
        k = int(np.searchsorted(self._cls, c))
        if k >= self._cls.shape[0] or self._cls[k] != c:
            return np.zeros(0, dtype=np.int64)
        return self._order[self._start[k]:self._start[k + 1]]

    def alpha(self, i, j) -> np.ndarray:
        return self.cocycle.alpha(self, np.atleast_1d(i), np.atleast_1d(j))

    def locate(self, cls: np.ndarray, pos: np.ndarray) -> np.ndarray:
        """Index of the point with class ``cls`` and position ``pos``, or -1."""
        cls = np.asarray(cls, dtype=np.int64)
        pos = self.group.as_array(pos)
        out = np.full(cls.shape[0], -1, dtype=np.int64)
        if cls.shape[0] == 0 or len(self) == 0:
            return out
        qk = self.group.keys(pos)
        k = np.searchsorted(self._cls, cls)
        kc = np.minimum(k, self._cls.shape[0] - 1)
        valid = self._cls[kc] == cls
        lo = self._start[kc]
        hi = self._start[kc + 1]
        # binary search inside each class block
        left, right = lo.copy(), hi.copy()
        while True:
            active = valid & (left < right)
            if not active.any():
                break
            mid = (left + right) // 2
            midc = np.minimum(mid, len(self) - 1)
            less = self._skeys[midc] < qk
            left = np.where(active & less, mid + 1, left)
            right = np.where(active & ~less, mid, right)
        found = valid & (left < hi)
        found &= self._skeys[np.minimum(left, len(self) - 1)] == qk
        out[found] = self._order[left[found]]
        return out

    def resolve(self, i: np.ndarray, g: np.ndarray) -> np.ndarray:
        """The point ``y`` in the class of ``x_i`` with ``alpha(x_i, y) = g``, or -1.

        Resolution goes through positions, so it ignores table overrides.
        """
        i = np.asarray(i, dtype=np.int64)
        G = self.group
        target = G.mul_arrays(G.inv_array(G.as_array(g)), self.positions[i])
        return self.locate(self.classes[i], target)

    def with_cocycle(self, group: GroupModel, positions: np.ndarray) -> "SectionSample":
        """Same points, classes and weights with a new position cocycle."""
        return SectionSample(group, positions, self.classes, self.weights, self.labels,
                             PositionCocycle(), None, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "group": self.group.name,
            "points": [{"position": p, "class": int(c), "weight": float(w)}
                       for p, c, w in zip(self.positions.tolist(), self.classes, self.weights)],
            "labels": None if self.labels is None else self.labels.tolist(),
            "cocycle": self.cocycle.to_dict(),
            "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, list, bool))},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SectionSample":
        group = parse_group(doc["group"])
        pts = doc["points"]
        coc = doc.get("cocycle", {"kind": "position"})
        cocycle = PositionCocycle()
        if coc.get("kind") == "table":
            cocycle = TableCocycle({(a, b): tuple(v) for a, b, v in coc["overrides"]})
        return cls(group,
                   np.array([p["position"] for p in pts], dtype=np.int64).reshape(-1, group.dim),
                   np.array([p["class"] for p in pts], dtype=np.int64),
                   np.array([p["weight"] for p in pts], dtype=float),
                   None if doc.get("labels") is None else np.array(doc["labels"], dtype=np.int64),
                   cocycle, None, dict(doc.get("meta", {})))


def _as_rule(rule) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if callable(rule):
        return rule
    if rule == "always":
        return lambda pos, lab: np.ones(lab.shape[0], dtype=bool)
    if rule == "origin":
        return lambda pos, lab: np.all(pos == 0, axis=1)
    if isinstance(rule, str) and rule.startswith("symbol:"):
        allowed = np.array([int(s) for s in rule.split(":", 1)[1].split(",")], dtype=np.int64)
        return lambda pos, lab: np.isin(lab, allowed)
    raise SectionError(f"unknown section rule {rule!r}; use 'always', 'origin', 'symbol:k[,k...]' or a callable")


def from_orbit_window(system: SymbolicSystem, window: ElementSet, section_rule, seed: int,
                      n_orbits: int = 1) -> SectionSample:
    """Sample ``n_orbits`` independent orbit segments and keep the points where the rule fires.

    Each orbit becomes one class.  Orbits where the rule never fires are
    dropped, with a warning and a count in ``meta['dropped_orbits']``.
    """
    rule = _as_rule(section_rule)
    pos_parts, cls_parts, lab_parts = [], [], []
    dropped = 0
    wpts = window.points
    for o in range(n_orbits):
        sub = int(make_rng(seed, "orbit", o).integers(2**62))
        lw = system.sample_window(window, sub)
        fire = np.asarray(rule(wpts, lw.labels), dtype=bool)
        if not fire.any():
            dropped += 1
            continue
        pos_parts.append(wpts[fire])
        lab_parts.append(lw.labels[fire])
        cls_parts.append(np.full(int(fire.sum()), o, dtype=np.int64))
    if dropped:
        warnings.warn(f"section rule never fired on {dropped} of {n_orbits} orbits; dropped", stacklevel=2)
    if not pos_parts:
        raise SectionError("the section rule fired on no sampled orbit")
    pos = np.concatenate(pos_parts)
    n = pos.shape[0]
    meta = {"intensity": n / ((n_orbits - dropped) * len(window)), "dropped_orbits": dropped,
            "n_orbits": n_orbits, "seed": int(seed)}
    return SectionSample(window.group, pos, np.concatenate(cls_parts), np.full(n, 1.0 / n),
                         np.concatenate(lab_parts), PositionCocycle(), window, meta)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

def validate(sample: SectionSample, U: ElementSet, n_spot: int = 2000, seed: int = 0) -> Report:
    """Check weights, identity, inverse law, cocycle identity, freeness and U-discreteness.

    Pairs not overridden are checked through positions, where the algebraic
    laws are exact; overridden pairs are checked against every third point of
    their class.  ``n_spot`` random triples are also evaluated directly.
    """
    G = sample.group
    rep = Report()
    n = len(sample)
    w = sample.weights
    rep.add("weights", bool(np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-9) if n else True,
            f"sum {w.sum():.17g}")
    over = dict(getattr(sample.cocycle, "overrides", {}) or {})
    bad = {"identity": 0, "inverse": 0, "cocycle identity": 0, "freeness": 0, "U-discreteness": 0}
    e = np.array(G.identity, dtype=np.int64)

    def eq(a, b):
        return np.all(a == b, axis=-1)

    # position part: freeness = distinct positions within a class
    if n:
        dup = (np.diff(sample._skeys) == 0) & (np.diff(sample.classes[sample._order]) == 0)
        bad["freeness"] += int(dup.sum())
        others = [u for u in U if u != G.identity]
        if others:
            idx = np.arange(n)
            for u in others:
                y = sample.resolve(idx, np.tile(np.array(u, dtype=np.int64), (n, 1)))
                hit = (y >= 0) & (y != idx)
                # overridden pairs are judged below on their table value
                if over and hit.any():
                    hit &= np.array([(int(a), int(b)) not in over for a, b in zip(idx, y)])
                bad["U-discreteness"] += int(hit.sum())
    # overridden pairs
    U_keys = U
    for (a, b), val in over.items():
        val = np.array(val, dtype=np.int64)
        if sample.classes[a] != sample.classes[b]:
            raise SectionError(f"override ({a}, {b}) relates points in different classes")
        if a == b and not eq(val, e):
            bad["identity"] += 1
        back = sample.alpha([b], [a])[0]
        if not eq(G.mul_arrays(val[None], back[None])[0], e):
            bad["inverse"] += 1
        if a != b and val.tolist() in [list(u) for u in U_keys]:
            bad["U-discreteness"] += 1
        members = sample.members(int(sample.classes[a]))
        m = members.shape[0]
        A_ = np.full(m, a)
        B_ = np.full(m, b)
        for (i, j, k) in ((A_, B_, members), (members, A_, B_), (A_, members, B_)):
            lhs = G.mul_arrays(sample.alpha(i, j), sample.alpha(j, k))
            bad["cocycle identity"] += int((~eq(lhs, sample.alpha(i, k))).sum())
        row = sample.alpha(A_, members)
        bad["freeness"] += m - np.unique(G.keys(row)).shape[0]
    # direct spot checks on random triples
    if n:
        rng = make_rng(seed, "validate")
        i = rng.integers(0, n, n_spot)
        cls = sample.classes[i]
        j = np.empty_like(i)
        k = np.empty_like(i)
        for c in np.unique(cls):
            mem = sample.members(int(c))
            sel = cls == c
            j[sel] = mem[rng.integers(0, mem.shape[0], sel.sum())]
            k[sel] = mem[rng.integers(0, mem.shape[0], sel.sum())]
        bad["identity"] += int((~eq(sample.alpha(i, i), e)).sum())
        aij, aji = sample.alpha(i, j), sample.alpha(j, i)
        bad["inverse"] += int((~eq(G.mul_arrays(aij, aji), e)).sum())
        lhs = G.mul_arrays(aij, sample.alpha(j, k))
        bad["cocycle identity"] += int((~eq(lhs, sample.alpha(i, k))).sum())
    for name, cnt in bad.items():
        rep.add(name, cnt == 0, f"{cnt} violations")
    return rep


# ----------------------------------------------------------------------
# ergodic averages
# ----------------------------------------------------------------------

def _neighbor_sums(sample: SectionSample, h: np.ndarray, F: ElementSet):
    """(sum of h, count) over ``{y : alpha(x, y) in F}`` for every x."""
    G = sample.group
    n = len(sample)
    tot = np.zeros(n)
    cnt = np.zeros(n)
    iv = _interval(F)
    for c in sample.class_ids:
        mem = sample.members(int(c))
        pos = sample.positions[mem]
        if iv is not None:
            # g_y in g_x - F = [g_x - hi, g_x - lo]
            p = pos[:, 0]
            cs = np.concatenate([[0.0], np.cumsum(h[mem])])
            lo = np.searchsorted(p, p - iv[1], "left")
            hi = np.searchsorted(p, p - iv[0], "right")
            tot[mem] = cs[hi] - cs[lo]
            cnt[mem] = hi - lo
        elif isinstance(G, Zd) and isinstance(F, BoxSet):
            from ._grid import GridCounter
            gs = GridCounter(pos, h[mem])
            gc = GridCounter(pos)
            tot[mem] = gs.box_sum(pos - F.n, pos + F.n)
            cnt[mem] = gc.box_sum(pos - F.n, pos + F.n)
        else:
            cls = np.full(mem.shape[0], c)
            for f in F.points:
                y = sample.locate(cls, G.mul_arrays(G.inv_array(f[None]), pos))
                ok = y >= 0
                tot[mem[ok]] += h[y[ok]]
                cnt[mem[ok]] += 1
    return tot, cnt


def ergodic_average(sample: SectionSample, h: np.ndarray, F: ElementSet) -> np.ndarray:
    """Per-point averages of ``h`` over ``{y : alpha(x, y) in F}``, zero when that set is empty."""
    h = np.asarray(h, dtype=float)
    if h.shape != (len(sample),):
        raise SectionError("h needs one value per point")
    tot, cnt = _neighbor_sums(sample, h, F)
    out = np.zeros(len(sample))
    np.divide(tot, cnt, out=out, where=cnt > 0)
    return out


def collar_mask(sample: SectionSample, F: ElementSet) -> np.ndarray:
    """True at points whose F-neighbourhood ``F^-1 g_x`` leaves the sampled window."""
    n = len(sample)
    W = sample.window
    if W is None:
        return np.zeros(n, dtype=bool)
    G = sample.group
    pos = sample.positions
    if isinstance(G, Zd) and isinstance(W, BoxSet):
        iv = _interval(F)
        if isinstance(F, BoxSet):
            return np.any(np.abs(pos) + F.n > W.n, axis=1)
        if iv is not None:
            p = pos[:, 0]
            return (p - iv[1] < -W.n) | (p - iv[0] > W.n)
    out = np.zeros(n, dtype=bool)
    Finv = F.inverse().points
    step = max(1, 2_000_000 // max(1, len(Finv)))
    for s in range(0, n, step):
        q = G.mul_arrays(Finv[None, :, :], pos[s:s + step, None, :]).reshape(-1, G.dim)
        inside = W.contains(q).reshape(-1, len(Finv))
        out[s:s + step] = ~inside.all(axis=1)
    return out


def deviation_measure(sample: SectionSample, values: np.ndarray, target: float, tol: float,
                      exclude: np.ndarray | None = None) -> float:
    """mu-share of ``{x : |values(x) - target| > tol}`` among non-excluded points."""
    keep = np.ones(len(sample), dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    w = sample.weights[keep]
    if w.sum() == 0:
        raise SectionError("every point lies in the excluded collar; use a larger window")
    dev = np.abs(np.asarray(values)[keep] - target) > tol
    return float(np.sum(w[dev]) / np.sum(w))


def mean_ergodic_deviation(sample: SectionSample, h: np.ndarray, F: ElementSet, tol: float,
                           collar: bool = True) -> float:
    """Deviation measure of the F-averages of h from its mean, collar excluded."""
    h = np.asarray(h, dtype=float)
    mean = float(np.dot(sample.weights, h))
    avg = ergodic_average(sample, h, F)
    return deviation_measure(sample, avg, mean, tol, collar_mask(sample, F) if collar else None)


# ----------------------------------------------------------------------
# castles
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Castle:
    """Base points and pairwise disjoint towers inside their classes.

    ``base[i]`` owns ``towers[i]``; both hold point indices into ``sample``.
    """

    sample: SectionSample
    base: np.ndarray
    towers: tuple

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.int64)
        towers = tuple(np.unique(np.asarray(t, dtype=np.int64)) for t in self.towers)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "towers", towers)
        if len(towers) != base.shape[0]:
            raise SectionError("one tower per base point is required")
        if np.unique(base).shape[0] != base.shape[0]:
            raise SectionError("base points must be distinct")
        allpts = np.concatenate(towers) if towers else np.zeros(0, np.int64)
        if np.any(allpts < 0) or np.any(allpts >= len(self.sample)) or np.any(base < 0):
            raise SectionError("tower members must be point indices of the sample")
        if np.unique(allpts).shape[0] != allpts.shape[0]:
            raise SectionError("towers must be pairwise disjoint")
        cls = self.sample.classes
        for x, t in zip(base, towers):
            if not np.isin(x, t):
                raise SectionError(f"base point {x} is missing from its own tower")
            if np.any(cls[t] != cls[x]):
                raise SectionError(f"tower of {x} leaves its class")
        owner = np.full(len(self.sample), -1, dtype=np.int64)
        for i, t in enumerate(towers):
            owner[t] = i
        object.__setattr__(self, "owner", owner)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([t.shape[0] for t in self.towers], dtype=np.int64)

    def slot(self, x: int) -> int:
        hit = np.flatnonzero(self.base == x)
        if hit.size == 0:
            raise SectionError(f"point {x} is not a base point")
        return int(hit[0])

    def measure(self, subset=None) -> float:
        """mu_T of a subset of the base, given as base slots or a mask over slots."""
        m = self.sizes * self.sample.weights[self.base]
        if subset is None:
            return float(m.sum())
        sel = np.asarray(subset)
        return float(m[sel].sum())

    def range_mask(self) -> np.ndarray:
        return self.owner >= 0

    def range_measure(self) -> float:
        return float(self.sample.weights[self.range_mask()].sum())

    def addresses(self, slot: int) -> np.ndarray:
        """alpha(x, t) for the members t of the tower over base slot ``slot``."""
        t = self.towers[slot]
        return self.sample.alpha(np.full(t.shape[0], self.base[slot]), t)

    def to_dict(self) -> dict:
        return {"base": {str(int(x)): self.addresses(i).tolist() for i, x in enumerate(self.base)}}


def _boundary_flags(castle: Castle, K: ElementSet) -> np.ndarray:
    """Per-point flag on the castle range: some K-neighbour lies outside its tower."""
    s = castle.sample
    G = s.group
    pts = np.flatnonzero(castle.range_mask())
    flag = np.zeros(len(s), dtype=bool)
    for k in K.points:
        # alpha(t, r) = k  <=>  g_r = k^-1 g_t
        r = s.locate(s.classes[pts], G.mul_arrays(G.inv_array(k[None]), s.positions[pts]))
        out = (r >= 0) & (castle.owner[np.maximum(r, 0)] != castle.owner[pts])
        flag[pts[out]] = True
    return flag


def castle_interior(castle: Castle, x: int, K: ElementSet) -> tuple[np.ndarray, np.ndarray]:
    """(K-interior, K-boundary) of the tower over base point ``x``, as point indices."""
    t = castle.towers[castle.slot(x)]
    flag = _boundary_flags_for(castle, t, K)
    return t[~flag], t[flag]


def _boundary_flags_for(castle: Castle, t: np.ndarray, K: ElementSet) -> np.ndarray:
    s = castle.sample
    G = s.group
    flag = np.zeros(t.shape[0], dtype=bool)
    for k in K.points:
        r = s.locate(s.classes[t], G.mul_arrays(G.inv_array(k[None]), s.positions[t]))
        flag |= (r >= 0) & (castle.owner[np.maximum(r, 0)] != castle.owner[t])
    return flag


def is_castle_invariant(castle: Castle, K: ElementSet, eps: float) -> tuple[bool, float]:
    """Whether the castle is (K, eps)-invariant, and the offending mu_T mass."""
    if not eps > 0:
        raise SectionError("eps must be positive")
    if castle.base.shape[0] == 0:
        raise SectionError("castle has an empty base")
    flag = _boundary_flags(castle, K)
    nb = np.array([flag[t].sum() for t in castle.towers])
    bad = nb / castle.sizes > eps
    off = castle.measure(bad)
    return bool(off < eps * castle.measure()), off


@dataclass(frozen=True)
class CastleErgodicReport:
    ok: bool
    good_fraction: float
    mean: float
    range_measure: float
    delta: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tower_averages(castle: Castle, h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return np.array([h[t].mean() for t in castle.towers])


def castle_ergodic_check(sample: SectionSample, castle: Castle, h: np.ndarray, delta: float) -> CastleErgodicReport:
    """Largest base share (in mu_T) whose tower averages sit within delta of the mean of h.

    Passes when that share exceeds ``1 - delta``.
    """
    h = np.asarray(h, dtype=float)
    rg = castle.range_measure()
    if not rg > delta:
        raise SectionError(f"castle range has measure {rg:.6g}, which must exceed delta = {delta}")
    mean = float(np.dot(sample.weights, h))
    good = np.abs(tower_averages(castle, h) - mean) < delta
    frac = castle.measure(good) / castle.measure()
    return CastleErgodicReport(bool(frac > 1 - delta), float(frac), mean, rg, float(delta))


def tiling_castle(sample: SectionSample, F: ElementSet, delta: float, collar: bool = True) -> Castle:
    """Castle whose towers are the greedy delta-disjoint tiles ``F b`` of each class.

    Tiles are trimmed against earlier ones, so towers are disjoint; each
    tower's base is its first point in canonical order.  With ``collar`` only
    points whose whole tile fits inside the window are used as centers.
    """
    G = sample.group
    excl = _tile_collar(sample, F) if collar else np.zeros(len(sample), dtype=bool)
    base, towers = [], []
    for c in sample.class_ids:
        mem = sample.members(int(c))
        A = ElementSet(G, sample.positions[mem])
        # ElementSet order matches members() order (both sorted by key)
        cand = ~excl[mem]
        if not cand.any():
            continue
        Bpts = A.points[cand]
        chosen, _ = _greedy(F, Bpts, A, delta)
        ck = Bpts[chosen]
        if ck.shape[0] == 0:
            continue
        tiles = build_tiles(F, ck, A)
        taken = np.zeros(len(A), dtype=bool)
        for i in range(ck.shape[0]):
            tile = tiles.tile(i, len(A))
            tile = tile[~taken[tile]]
            if tile.size == 0:
                continue
            taken[tile] = True
            pts = mem[np.sort(tile)]
            base.append(pts[0])
            towers.append(pts)
    return Castle(sample, np.array(base, dtype=np.int64), tuple(towers))


def _tile_collar(sample: SectionSample, F: ElementSet) -> np.ndarray:
    """True at points b whose tile ``F g_b`` leaves the window."""
    W = sample.window
    n = len(sample)
    if W is None:
        return np.zeros(n, dtype=bool)
    G = sample.group
    pos = sample.positions
    if isinstance(G, Zd) and isinstance(W, BoxSet):
        if isinstance(F, BoxSet):
            return np.any(np.abs(pos) + F.n > W.n, axis=1)
        iv = _interval(F)
        if iv is not None:
            p = pos[:, 0]
            return (p + iv[0] < -W.n) | (p + iv[1] > W.n)
    Fp = F.points
    out = np.zeros(n, dtype=bool)
    step = max(1, 2_000_000 // max(1, len(Fp)))
    for s in range(0, n, step):
        q = G.mul_arrays(Fp[None, :, :], pos[s:s + step, None, :]).reshape(-1, G.dim)
        out[s:s + step] = ~W.contains(q).reshape(-1, len(Fp)).all(axis=1)
    return out


def interval(lo: int, hi: int) -> ElementSet:
    """The Z-interval {lo, ..., hi}."""
    return ElementSet(Zd(1), np.arange(lo, hi + 1)[:, None])


def trend_test(x: Sequence[float], y: Sequence[float], direction: str, alpha: float = 0.05) -> tuple[bool, float, float]:
    """One-sided Kendall tau test of a monotone trend of y in x.

    Returns (significant, tau, p-value); ``direction`` is 'increasing' or
    'decreasing'.
    """
    from scipy.stats import kendalltau
    if direction not in ("increasing", "decreasing"):
        raise SectionError("direction must be 'increasing' or 'decreasing'")
    alt = "greater" if direction == "increasing" else "less"
    res = kendalltau(np.asarray(x, dtype=float), np.asarray(y, dtype=float), alternative=alt)
    p = float(res.pvalue)
    return bool(p < alpha), float(res.statistic), p
