"""Discrete amenable groups with counting Haar measure.

Elements are integer tuples.  ``Zd(d)`` is the free abelian group of rank
``d``; ``Heisenberg()`` is the discrete Heisenberg group H3(Z) with the law

    (a, b, c) * (a', b', c') = (a + a', b + b', c + c' + a b').

Finite subsets are held in :class:`ElementSet`, which keeps its elements in
lexicographic order so every greedy algorithm built on top of it is
deterministic.  Følner boxes are :class:`BoxSet` instances that only
materialize their points on demand.
"""

from __future__ import annotations

import itertools
from collections import deque
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np


class GroupError(ValueError):
    """Raised on encoding mismatches and other misuse of a group model."""


class GroupModel:
    """Base class for the finitely generated groups used throughout."""

    dim: int
    name: str

    @property
    def identity(self) -> tuple[int, ...]:
        return (0,) * self.dim

    @cached_property
    def _bits(self) -> int:
        return 63 // self.dim

    # -- scalar law -----------------------------------------------------
    def _check(self, g) -> tuple[int, ...]:
        g = tuple(int(v) for v in g)
        if len(g) != self.dim:
            raise GroupError(f"{self.name} elements have {self.dim} entries, got {len(g)}")
        return g

    def mul(self, g, h) -> tuple[int, ...]:
        g, h = self._check(g), self._check(h)
        out = self.mul_arrays(np.array([g], dtype=np.int64), np.array([h], dtype=np.int64))
        return tuple(int(v) for v in out[0])

    def inv(self, g) -> tuple[int, ...]:
        g = self._check(g)
        return tuple(int(v) for v in self.inv_array(np.array([g], dtype=np.int64))[0])

    # -- vectorized law -------------------------------------------------
    def mul_arrays(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inv_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def as_array(self, elements) -> np.ndarray:
        arr = np.asarray(elements, dtype=np.int64)
        if arr.size == 0:
            return np.zeros((0, self.dim), dtype=np.int64)
        arr = arr.reshape(-1, self.dim) if arr.ndim == 1 and self.dim == 1 else arr
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise GroupError(f"expected shape (n, {self.dim}) for {self.name}, got {arr.shape}")
        return arr

    def keys(self, x: np.ndarray) -> np.ndarray:
        """Pack rows into int64 keys whose order is lexicographic order."""
        bits = self._bits
        off = 1 << (bits - 1)
        x = np.asarray(x, dtype=np.int64)
        if x.size and (x.min() < -off or x.max() >= off):
            raise GroupError(f"coordinates exceed the packable range +-{off} of {self.name}")
        key = np.zeros(x.shape[0], dtype=np.int64)
        for j in range(self.dim):
            key = (key << bits) | (x[:, j] + off)
        return key

    def unkey(self, key: np.ndarray) -> np.ndarray:
        bits = self._bits
        off = 1 << (bits - 1)
        mask = (1 << bits) - 1
        key = np.asarray(key, dtype=np.int64)
        out = np.empty((key.shape[0], self.dim), dtype=np.int64)
        for j in range(self.dim - 1, -1, -1):
            out[:, j] = (key & mask) - off
            key = key >> bits
        return out

    # -- named sets -----------------------------------------------------
    def generators(self) -> list[tuple[int, ...]]:
        raise NotImplementedError

    def folner(self, n: int) -> "BoxSet":
        """The n-th set of the standard Følner family."""
        if n < 0:
            raise GroupError("Følner index must be nonnegative")
        return BoxSet(self, n)

    def ball(self, radius: int) -> "ElementSet":
        """Word-metric ball for the symmetric generating set."""
        gens = self.generators()
        gens = gens + [self.inv(g) for g in gens]
        seen = {self.identity}
        frontier = deque([(self.identity, 0)])
        while frontier:
            g, r = frontier.popleft()
            if r == radius:
                continue
            for s in gens:
                h = self.mul(g, s)
                if h not in seen:
                    seen.add(h)
                    frontier.append((h, r + 1))
        return ElementSet(self, list(seen))

    def element_set(self, elements) -> "ElementSet":
        return ElementSet(self, elements)

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.dim == other.dim

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.dim))

    def __repr__(self) -> str:
        return self.name


class Zd(GroupModel):
    """The lattice Z^d."""

    def __init__(self, d: int = 1):
        if d < 1:
            raise GroupError("Z^d needs d >= 1")
        self.dim = d
        self.name = f"Z^{d}"

    def mul_arrays(self, x, y):
        return np.asarray(x, dtype=np.int64) + np.asarray(y, dtype=np.int64)

    def inv_array(self, x):
        return -np.asarray(x, dtype=np.int64)

    def generators(self):
        return [tuple(int(i == j) for j in range(self.dim)) for i in range(self.dim)]

    def ball(self, radius: int) -> "ElementSet":
        rng = range(-radius, radius + 1)
        pts = [p for p in itertools.product(rng, repeat=self.dim) if sum(map(abs, p)) <= radius]
        return ElementSet(self, pts)


class Heisenberg(GroupModel):
    """The discrete Heisenberg group H3(Z) in (a, b, c) coordinates."""

    dim = 3
    name = "H3"

    def mul_arrays(self, x, y):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        x, y = np.broadcast_arrays(x, y)
        out = x + y
        out[..., 2] += x[..., 0] * y[..., 1]
        return out

    def inv_array(self, x):
        x = np.asarray(x, dtype=np.int64)
        out = -x
        out[..., 2] += x[..., 0] * x[..., 1]
        return out

    def generators(self):
        return [(1, 0, 0), (0, 1, 0)]


def parse_group(spec: str) -> GroupModel:
    """``"z"``, ``"z2"`` (or ``"Z^2"``), ``"zd:4"`` or ``"h3"``."""
    s = spec.strip().lower().replace("^", "")
    if s in ("z", "z1"):
        return Zd(1)
    if s in ("h3", "heisenberg"):
        return Heisenberg()
    if s.startswith("zd:"):
        return Zd(int(s[3:]))
    if s.startswith("z") and s[1:].isdigit():
        return Zd(int(s[1:]))
    raise GroupError(f"unknown group spec {spec!r}")


class ElementSet:
    """A finite, deduplicated set of group elements in lexicographic order."""

    def __init__(self, group: GroupModel, elements=()):
        self.group = group
        arr = group.as_array(list(elements) if not isinstance(elements, np.ndarray) else elements)
        keys = group.keys(arr)
        keys = np.unique(keys)
        self._keys = keys

    @classmethod
    def _from_keys(cls, group: GroupModel, keys: np.ndarray) -> "ElementSet":
        obj = cls.__new__(cls)
        obj.group = group
        obj._keys = np.unique(np.asarray(keys, dtype=np.int64))
        return obj

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @cached_property
    def points(self) -> np.ndarray:
        return self.group.unkey(self.keys)

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for row in self.points:
            yield tuple(int(v) for v in row)

    def __contains__(self, g) -> bool:
        g = self.group._check(g)
        return bool(self.contains(np.array([g], dtype=np.int64))[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ElementSet):
            return NotImplemented
        return self.group == other.group and np.array_equal(self.keys, other.keys)

    def __repr__(self) -> str:
        return f"ElementSet({self.group.name}, size={len(self)})"

    def is_explicit(self) -> bool:
        return True

    def index_of(self, x: np.ndarray) -> np.ndarray:
        """Positions of rows of ``x`` in canonical order, -1 when absent."""
        x = self.group.as_array(x)
        if len(self) == 0 or x.shape[0] == 0:
            return np.full(x.shape[0], -1, dtype=np.int64)
        k = self.group.keys(x)
        pos = np.searchsorted(self.keys, k)
        pos_c = np.minimum(pos, len(self) - 1)
        hit = self.keys[pos_c] == k
        return np.where(hit, pos_c, -1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.index_of(x) >= 0

    def tolist(self) -> list[list[int]]:
        return self.points.tolist()

    # set algebra on keys
    def union(self, other: "ElementSet") -> "ElementSet":
        return ElementSet._from_keys(self.group, np.union1d(self.keys, other.keys))

    def intersection(self, other: "ElementSet") -> "ElementSet":
        return ElementSet._from_keys(self.group, np.intersect1d(self.keys, other.keys, assume_unique=True))

    def difference(self, other: "ElementSet") -> "ElementSet":
        return ElementSet._from_keys(self.group, np.setdiff1d(self.keys, other.keys, assume_unique=True))

    def issubset(self, other: "ElementSet") -> bool:
        return bool(np.all(other.contains(self.points))) if len(self) else True

    def inverse(self) -> "ElementSet":
        return ElementSet(self.group, self.group.inv_array(self.points))

    def translate(self, g, side: str = "right") -> "ElementSet":
        """``F g`` (side='right') or ``g F`` (side='left')."""
        g = np.array([self.group._check(g)], dtype=np.int64)
        pts = self.points
        out = self.group.mul_arrays(pts, g) if side == "right" else self.group.mul_arrays(g, pts)
        return ElementSet(self.group, out)

    def with_identity(self) -> "ElementSet":
        return self.union(ElementSet(self.group, [self.group.identity]))


class BoxSet(ElementSet):
    """The standard Følner box of index n, materialized lazily.

    Z^d: [-n, n]^d.  H3: [-n, n] x [-n, n] x [-n^2, n^2].
    """

    def __init__(self, group: GroupModel, n: int):
        self.group = group
        self.n = int(n)

    @property
    def extents(self) -> list[int]:
        if isinstance(self.group, Heisenberg):
            return [self.n, self.n, self.n * self.n]
        return [self.n] * self.group.dim

    def __len__(self) -> int:
        return int(np.prod([2 * e + 1 for e in self.extents], dtype=object))

    def __repr__(self) -> str:
        return f"BoxSet({self.group.name}, n={self.n}, size={len(self)})"

    def is_explicit(self) -> bool:
        return False

    @cached_property
    def keys(self) -> np.ndarray:
        if len(self) > 50_000_000:
            raise GroupError(f"refusing to materialize {self!r}")
        axes = [np.arange(-e, e + 1, dtype=np.int64) for e in self.extents]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.group.dim)
        return self.group.keys(grid)

    @cached_property
    def points(self) -> np.ndarray:
        return self.group.unkey(self.keys)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = self.group.as_array(x)
        ext = np.array(self.extents, dtype=np.int64)
        return np.all(np.abs(x) <= ext, axis=1)

    def index_of(self, x):
        # positions only make sense once materialized
        return ElementSet.index_of(self, x)

    def rows(self) -> np.ndarray:
        """Fibered form: rows (prefix coords..., lo, hi) over the last coordinate."""
        ext = self.extents
        if self.group.dim == 1:
            return np.array([[-ext[0], ext[0]]], dtype=np.int64)
        axes = [np.arange(-e, e + 1, dtype=np.int64) for e in ext[:-1]]
        pre = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        lohi = np.tile(np.array([-ext[-1], ext[-1]], dtype=np.int64), (pre.shape[0], 1))
        return np.hstack([pre, lohi])

    def __eq__(self, other) -> bool:
        if isinstance(other, BoxSet):
            return self.group == other.group and self.n == other.n
        return ElementSet.__eq__(self, other)

    __hash__ = None


# ----------------------------------------------------------------------
# products, invariance, separation, interiors
# ----------------------------------------------------------------------

def _same_group(*sets: ElementSet) -> GroupModel:
    g = sets[0].group
    for s in sets[1:]:
        if s.group != g:
            raise GroupError(f"encoding mismatch: {g.name} vs {s.group.name}")
    return g


def product_set(*factors: ElementSet) -> ElementSet:
    """{k f ... : k in K, f in F, ...}, deduplicated.

    Centered Z^d boxes multiply to a box; everything else is enumerated.
    """
    if not factors:
        raise GroupError("product_set needs at least one factor")
    group = _same_group(*factors)
    if isinstance(group, Zd) and all(isinstance(f, BoxSet) for f in factors):
        return BoxSet(group, sum(f.n for f in factors))
    out = factors[0]
    for f in factors[1:]:
        a, b = out.points, f.points
        prod = group.mul_arrays(a[:, None, :], b[None, :, :]).reshape(-1, group.dim)
        out = ElementSet(group, prod)
    return out


def _shift_rows(group: GroupModel, rows: np.ndarray, g: np.ndarray, side: str) -> np.ndarray:
    """Multiply a fibered row set by one element on the given side."""
    out = rows.copy()
    d = group.dim
    out[:, : d - 1] += g[: d - 1]
    shift = np.full(rows.shape[0], g[d - 1], dtype=np.int64)
    if isinstance(group, Heisenberg):
        if side == "left":
            shift += g[0] * rows[:, 1]      # la * b
        else:
            shift += rows[:, 0] * g[1]      # a * rb
    out[:, d - 1] += shift
    out[:, d] += shift
    return out


def _union_length(rows: np.ndarray, d: int) -> int:
    """Number of lattice points in a union of fibered intervals."""
    if rows.shape[0] == 0:
        return 0
    cols = [rows[:, d - 1]] + [rows[:, j] for j in range(d - 2, -1, -1)]
    order = np.lexsort(cols)
    r = rows[order]
    pre = r[:, : d - 1]
    lo, hi = r[:, d - 1], r[:, d]
    new_fiber = np.ones(r.shape[0], dtype=bool)
    if d > 1:
        new_fiber[1:] = np.any(pre[1:] != pre[:-1], axis=1)
    else:
        new_fiber[1:] = False
    # running max of hi within each fiber
    fid = np.cumsum(new_fiber) - 1
    big = np.int64(1) << 40
    run = np.maximum.accumulate(hi + fid * big) - fid * big
    prev = np.empty_like(run)
    prev[0] = lo[0] - 1
    prev[1:] = run[:-1]
    prev[new_fiber] = lo[new_fiber] - 1
    start = np.maximum(lo, prev + 1)
    return int(np.sum(np.maximum(hi - start + 1, 0)))


def _box_sumset_size(ext: Sequence[int], shifts: set) -> int:
    """|box + S| in Z^d by grouping first coordinates with equal shift patterns."""
    if not shifts:
        return 0
    if not ext:
        return 1
    e = ext[0]
    firsts = sorted({s[0] for s in shifts})
    # x is reachable from shift s1 iff s1 - e <= x <= s1 + e; the active set
    # only changes at these breakpoints
    cuts = sorted({f - e for f in firsts} | {f + e + 1 for f in firsts})
    total = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        active = {s[1:] for s in shifts if s[0] - e <= a <= s[0] + e}
        if active:
            total += (b - a) * _box_sumset_size(ext[1:], active)
    return total


def _equal_fiber_count(group: GroupModel, box: BoxSet, left: np.ndarray, right: np.ndarray):
    """Count |L F R| for a box F whose fibers all have the same length.

    Each output fiber collects shifted copies of one interval; when their
    starts spread by at most the interval length the union is contiguous
    and its size is length + spread.  Returns None otherwise.
    """
    d = group.dim
    ext = box.extents
    length = 2 * ext[-1] + 1
    if d == 1:
        sh = np.array([l[0] + r[0] for l in left for r in right], dtype=np.int64)
        spread = int(sh.max() - sh.min())
        return length + spread if spread <= length else None
    pre_shift = np.array([l[: d - 1] + r[: d - 1] for l in left for r in right], dtype=np.int64)
    lo = [-e + int(pre_shift[:, j].min()) for j, e in enumerate(ext[:-1])]
    hi = [e + int(pre_shift[:, j].max()) for j, e in enumerate(ext[:-1])]
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    big = np.iinfo(np.int64).max
    smin = np.full(grid[0].shape, big, dtype=np.int64)
    smax = np.full(grid[0].shape, -big, dtype=np.int64)
    for l in left:
        for r in right:
            src = [grid[j] - l[j] - r[j] for j in range(d - 1)]
            ok = np.ones(grid[0].shape, dtype=bool)
            for j in range(d - 1):
                ok &= np.abs(src[j]) <= ext[j]
            if isinstance(group, Heisenberg):
                a, b = src
                sh = l[2] + r[2] + l[0] * b + (a + l[0]) * r[1]
            else:
                sh = np.full(grid[0].shape, l[-1] + r[-1], dtype=np.int64)
            smin = np.where(ok, np.minimum(smin, sh), smin)
            smax = np.where(ok, np.maximum(smax, sh), smax)
    hit = smax >= smin
    spread = (smax - smin)[hit]
    if spread.size and spread.max() > length:
        return None
    return int(hit.sum()) * length + int(spread.sum())


def product_size(*factors: ElementSet, explicit_limit: int = 200_000) -> int:
    """|K_1 ... F ... K_m| without materializing a single large box factor.

    At most one factor may be a :class:`BoxSet`; the others are enumerated.
    """
    group = _same_group(*factors)
    boxes = [i for i, f in enumerate(factors) if isinstance(f, BoxSet)]
    if isinstance(group, Zd) and len(boxes) == len(factors):
        return len(BoxSet(group, sum(f.n for f in factors)))
    if len(boxes) != 1 or len(factors[boxes[0]]) <= explicit_limit:
        return len(product_set(*factors))
    i = boxes[0]
    box = factors[i]
    left = product_set(*factors[:i]) if i > 0 else ElementSet(group, [group.identity])
    right = product_set(*factors[i + 1:]) if i + 1 < len(factors) else ElementSet(group, [group.identity])
    d = group.dim
    if isinstance(group, Zd):
        sums = {tuple(int(v) for v in l + r) for l in left.points for r in right.points}
        return _box_sumset_size(box.extents, sums)
    fast = _equal_fiber_count(group, box, left.points, right.points)
    if fast is not None:
        return fast
    base = box.rows()
    if d == 1:
        rows = [_shift_rows(group, _shift_rows(group, base, l, "left"), r, "right")
                for l in left.points for r in right.points]
        return _union_length(np.vstack(rows), d)
    # chunk by output first coordinate to bound memory
    n0 = box.extents[0]
    first = base[:, 0]
    starts = {int(v): np.searchsorted(first, v) for v in range(-n0, n0 + 2)}
    shifts = [(l, r, int(l[0] + r[0])) for l in left.points for r in right.points]
    lo_out = -n0 + min(s for _, _, s in shifts)
    hi_out = n0 + max(s for _, _, s in shifts)
    total = 0
    for v in range(lo_out, hi_out + 1):
        chunk = []
        for l, r, s in shifts:
            src = v - s
            if -n0 <= src <= n0:
                part = base[starts[src]:starts[src + 1]]
                chunk.append(_shift_rows(group, _shift_rows(group, part, l, "left"), r, "right"))
        if chunk:
            total += _union_length(np.vstack(chunk), d)
    return total


def is_invariant(F: ElementSet, K: ElementSet, eps: float) -> bool:
    """(K, eps)-invariance: |K F K| < (1 + eps) |F|, with the identity adjoined to K."""
    if eps <= 0:
        raise GroupError("eps must be positive")
    if len(F) == 0:
        raise GroupError("invariance is undefined on the empty set")
    _same_group(F, K)
    K1 = K.with_identity()
    return product_size(K1, F, K1) < (1 + eps) * len(F)


def is_separated(A: ElementSet, K: ElementSet) -> bool:
    """True iff g h^-1 is not in K for all distinct g, h in A."""
    group = _same_group(A, K)
    if len(A) <= 1:
        return True
    pts = A.points
    ident = np.array(group.identity, dtype=np.int64)
    for k in K.points:
        if np.array_equal(k, ident):
            continue
        # g = k h with both in A
        if np.any(A.contains(group.mul_arrays(k[None, :], pts))):
            return False
    return True


def interior(T: ElementSet, ambient: ElementSet, K: ElementSet) -> ElementSet:
    """{t in T : every r in ambient with r t^-1 in K lies in T}."""
    group = _same_group(T, ambient, K)
    if len(T) == 0:
        return T
    pts = T.points
    good = np.ones(len(T), dtype=bool)
    for k in K.points:
        r = group.mul_arrays(k[None, :], pts)
        bad = ambient.contains(r) & ~T.contains(r)
        good &= ~bad
    return ElementSet(group, pts[good])


def boundary(T: ElementSet, ambient: ElementSet, K: ElementSet) -> ElementSet:
    return T.difference(interior(T, ambient, K))


def folner_threshold(group: GroupModel, K: ElementSet, eps: float, n_max: int = 4096) -> int:
    """Smallest n with F_n (K, eps)-invariant, found by doubling then bisection.

    The box ratio is monotone in n for the families used here; callers that
    need the 'stays true' half of the Følner property check a few n beyond.
    """
    lo, hi = 0, 1
    while not is_invariant(group.folner(hi), K, eps):
        lo, hi = hi, hi * 2
        if hi > n_max:
            raise GroupError(f"no invariant box up to n={n_max}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if is_invariant(group.folner(mid), K, eps):
            hi = mid
        else:
            lo = mid
    return hi


def canonical(elements: Iterable[Sequence[int]], group: GroupModel) -> list[tuple[int, ...]]:
    return list(ElementSet(group, list(elements)))
