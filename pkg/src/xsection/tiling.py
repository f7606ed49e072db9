"""Quasi-tilings of finite subsets of amenable groups.

The single-scale greedy selection picks translates ``F b`` one at a time,
keeping ``b`` when its tile overlaps the tiles chosen so far in less than a
``delta`` fraction.  The multi-scale procedure runs that greedy from the
largest scale down, shrinking the uncovered set and the admissible centers
after each scale, and freezing once less than ``2 delta`` of the set is left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence

import numba
import numpy as np

from ._grid import GridCounter, LineCounter, runs
from ._report import Report
from ._rng import make_rng
from .group import BoxSet, ElementSet, GroupModel, Heisenberg, Zd, product_set, product_size


class TilingError(ValueError):
    """A violated hypothesis; the message names it."""


class TilingInvariantError(AssertionError):
    """The center-count invariant of the multi-scale recursion failed."""


# ----------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TilingParams:
    """Constants for the multi-scale tiling.

    Attributes
    ----------
    delta : float
        Disjointness and coverage slack, in (0, 0.1].
    c : int
        Packing constant.
    N : int
        Number of scales.
    eps : float
        Invariance slack for the scale conditions.
    """

    delta: float
    c: int
    N: int
    eps: float

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.delta <= 0.1:
            out.append(DELTA_MSG)
        if self.c < 1:
            out.append("c must be a positive integer")
        if not 0 < self.eps < 1:
            out.append("eps must lie in (0, 1)")
        if not out:
            if self.N < min_scales(self.delta, self.c):
                out.append(f"N must be at least {min_scales(self.delta, self.c)}")
            if not eps_ok(Fraction(str(self.eps)), Fraction(str(self.delta))):
                out.append("eps must satisfy (1-delta)(1-2eps) > (1-2delta)(1+delta+2eps)")
        return out

    def to_dict(self) -> dict:
        return {"delta": self.delta, "c": self.c, "N": self.N, "eps": self.eps}


DELTA_MSG = "delta must lie in (0, 0.1] (0 < delta < 0.1, plus the boundary value 0.1)"


def _check_delta(delta: float, c: int) -> None:
    if not 0 < delta <= 0.1:
        raise TilingError(f"{DELTA_MSG}, got {delta}")
    if int(c) != c or c < 1:
        raise TilingError(f"c must be a positive integer, got {c}")


def min_scales(delta: float, c: int = 1) -> int:
    """ceil(log(delta) / log(1 - delta / (8c))) in 50-digit decimal arithmetic."""
    _check_delta(delta, c)
    with localcontext() as ctx:
        ctx.prec = 50
        d = Decimal(str(delta))
        ratio = d.ln() / (1 - d / (8 * int(c))).ln()
        return int(ratio.to_integral_value(rounding="ROUND_CEILING"))


def eps_ok(eps: Fraction, delta: Fraction) -> bool:
    return (1 - delta) * (1 - 2 * eps) > (1 - 2 * delta) * (1 + delta + 2 * eps)


def params_for(delta: float, c: int = 1, n_cap: int = 512, grid: int = 10_000) -> TilingParams:
    """Tiling constants for ``delta`` and packing constant ``c``.

    ``N`` is the smallest admissible number of scales and ``eps`` the largest
    multiple of ``1/grid`` satisfying the strict inequality.

    Raises
    ------
    TilingError
        If delta is outside (0, 0.1] or N exceeds ``n_cap``.
    """
    N = min_scales(delta, c)
    if N > n_cap:
        raise TilingError(f"N = {N} exceeds the cap {n_cap}; raise n_cap or increase delta")
    d = Fraction(str(delta))
    # the inequality is linear in eps: eps < delta^2 / (2 - 3 delta)
    bound = d * d / (2 - 3 * d)
    k = math.ceil(bound * grid) - 1
    while k > 0 and not eps_ok(Fraction(k, grid), d):
        k -= 1
    if k <= 0:
        raise TilingError(f"no eps on the 1/{grid} grid works for delta={delta}")
    return TilingParams(float(delta), int(c), N, k / grid)


# ----------------------------------------------------------------------
# eps-disjointness
# ----------------------------------------------------------------------

def is_eps_disjoint(sets: Sequence[ElementSet], eps: float) -> bool:
    """Each set meets the union of its predecessors in less than eps of itself."""
    if eps <= 0:
        raise TilingError("eps must be positive")
    seen: ElementSet | None = None
    for i, s in enumerate(sets):
        if len(s) == 0:
            raise TilingError(f"set {i} is empty; the disjointness ratio is undefined")
        if seen is not None and len(s.intersection(seen)) >= eps * len(s):
            return False
        seen = s if seen is None else seen.union(s)
    return True


# ----------------------------------------------------------------------
# counting |K b ∩ A| and building tiles F b ∩ A
# ----------------------------------------------------------------------


def saturates(F: ElementSet, A: ElementSet) -> bool:
    """Sufficient test for A A^-1 ⊆ F, which makes F b ⊇ A for every b in A."""
    if len(A) == 0:
        return True
    group = A.group
    pts = A.points
    span = pts.max(axis=0) - pts.min(axis=0)
    if isinstance(F, BoxSet):
        n = F.n
        if isinstance(group, Heisenberg):
            bmax = int(np.abs(pts[:, 1]).max())
            return span[0] <= n and span[1] <= n and span[2] + span[0] * bmax <= n * n
        return bool(np.all(span <= n))
    if len(F) < len(A):
        return False
    if len(A) > 2000:
        return False
    diffs = group.mul_arrays(pts[:, None, :], group.inv_array(pts)[None, :, :]).reshape(-1, group.dim)
    return bool(np.all(F.contains(diffs)))


class _Counter:
    """Cached prefix-sum structures over a fixed point set A."""

    def __init__(self, A: ElementSet):
        self.A = A
        self._grid = None
        self._h3 = None

    def grid(self) -> GridCounter:
        if self._grid is None:
            self._grid = GridCounter(self.A.points)
        return self._grid

    def h3(self) -> GridCounter:
        if self._h3 is None:
            self._h3 = GridCounter(self.A.points, axes=(1, 2))
        return self._h3

    def counts(self, K: ElementSet, pts: np.ndarray) -> np.ndarray:
        """|K b ∩ A| for each row b of ``pts``."""
        A = self.A
        group = A.group
        m = pts.shape[0]
        if m == 0 or len(A) == 0:
            return np.zeros(m, dtype=np.int64)
        if isinstance(K, BoxSet) and isinstance(group, Zd):
            n = K.n
            return np.rint(self.grid().box_sum(pts - n, pts + n)).astype(np.int64)
        if isinstance(K, BoxSet) and isinstance(group, Heisenberg):
            n = K.n
            g = self.h3()
            out = np.zeros(m)
            a, b, c = pts[:, 0], pts[:, 1], pts[:, 2]
            for u in range(-n, n + 1):
                shift = c + u * b
                lo = np.stack([b - n, shift - n * n], axis=1)
                hi = np.stack([b + n, shift + n * n], axis=1)
                out += g.box_sum(lo, hi, fixed=(a + u)[:, None])
            return np.rint(out).astype(np.int64)
        if isinstance(group, (Zd, Heisenberg)) and group.dim <= 3:
            return self._fibered(K, pts)
        Kp = K.points
        out = np.empty(m, dtype=np.int64)
        step = max(1, 4_000_000 // max(1, len(K)))
        for s in range(0, m, step):
            chunk = pts[s:s + step]
            prod = group.mul_arrays(Kp[None, :, :], chunk[:, None, :])
            hit = A.contains(prod.reshape(-1, group.dim)).reshape(chunk.shape[0], len(K))
            out[s:s + step] = hit.sum(axis=1)
        return out


    def lines(self) -> LineCounter:
        if getattr(self, "_lines", None) is None:
            self._lines = LineCounter(_pad3(self.A.points))
        return self._lines

    def _fibered(self, K: ElementSet, pts: np.ndarray) -> np.ndarray:
        """Run-length form of K against per-line prefix sums of A."""
        group = self.A.group
        rows = runs(K.points)                       # (prefix..., lo, hi)
        pre = _pad3(np.hstack([rows[:, :-2], np.zeros((rows.shape[0], 1), dtype=np.int64)]))[:, :2]
        lo_k, hi_k = rows[:, -2], rows[:, -1]
        b3 = _pad3(pts)
        lc = self.lines()
        m = pts.shape[0]
        out = np.zeros(m, dtype=np.int64)
        step = max(1, 4_000_000 // max(1, rows.shape[0]))
        for s in range(0, m, step):
            b = b3[s:s + step]
            x = pre[None, :, 0] + b[:, None, 0]
            y = pre[None, :, 1] + b[:, None, 1]
            shift = b[:, None, 2]
            if isinstance(group, Heisenberg):
                shift = shift + pre[None, :, 0] * b[:, None, 1]
            cnt = lc.count(x, y, lo_k[None, :] + shift, hi_k[None, :] + shift)
            out[s:s + step] = cnt.sum(axis=1)
        return out


def _pad3(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.int64)
    out = np.zeros((pts.shape[0], 3), dtype=np.int64)
    out[:, 3 - pts.shape[1]:] = pts
    return out


@dataclass
class _Tiles:
    """Tiles F b ∩ A for a batch of centers, as index ranges or CSR arrays."""

    mode: str                     # "all", "range" or "csr"
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    indptr: np.ndarray | None = None
    indices: np.ndarray | None = None

    def union_mask(self, n_a: int) -> np.ndarray:
        m = np.zeros(n_a, dtype=bool)
        if self.mode == "all":
            m[:] = True
        elif self.mode == "range":
            diff = np.zeros(n_a + 1, dtype=np.int64)
            np.add.at(diff, self.lo, 1)
            np.add.at(diff, self.hi, -1)
            m = np.cumsum(diff[:-1]) > 0
        else:
            m[self.indices] = True
        return m

    def tile(self, i: int, n_a: int) -> np.ndarray:
        if self.mode == "all":
            return np.arange(n_a)
        if self.mode == "range":
            return np.arange(self.lo[i], self.hi[i])
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


def _interval(F: ElementSet):
    """(lo, hi) if F is a contiguous interval of Z, else None."""
    if not isinstance(F.group, Zd) or F.group.dim != 1 or len(F) == 0:
        return None
    if isinstance(F, BoxSet):
        return -F.n, F.n
    p = F.points[:, 0]
    if p[-1] - p[0] + 1 == p.shape[0]:
        return int(p[0]), int(p[-1])
    return None


def build_tiles(F: ElementSet, centers: np.ndarray, A: ElementSet, saturated: bool | None = None) -> _Tiles:
    group = A.group
    if saturated is None:
        saturated = saturates(F, A) and bool(np.all(A.contains(centers))) if len(centers) else False
    if saturated:
        return _Tiles("all")
    iv = _interval(F)
    if iv is not None:
        a = A.points[:, 0]
        c = centers[:, 0]
        return _Tiles("range", lo=np.searchsorted(a, c + iv[0], "left"),
                      hi=np.searchsorted(a, c + iv[1], "right"))
    m = centers.shape[0]
    if len(F) <= max(len(A), 64):
        Fp = F.points
        indptr = np.zeros(m + 1, dtype=np.int64)
        parts = []
        step = max(1, 4_000_000 // max(1, len(F)))
        for s in range(0, m, step):
            chunk = centers[s:s + step]
            prod = group.mul_arrays(Fp[None, :, :], chunk[:, None, :]).reshape(-1, group.dim)
            idx = A.index_of(prod).reshape(chunk.shape[0], len(F))
            hit = idx >= 0
            indptr[s + 1:s + 1 + chunk.shape[0]] = hit.sum(axis=1)
            parts.append(idx[hit])
        np.cumsum(indptr, out=indptr)
        indices = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return _Tiles("csr", indptr=indptr, indices=indices)
    # large F, few centers: test every point of A against F b
    Ap = A.points
    indptr = [0]
    parts = []
    for b in centers:
        rel = group.mul_arrays(Ap, group.inv_array(b[None, :]))
        idx = np.flatnonzero(F.contains(rel))
        parts.append(idx)
        indptr.append(indptr[-1] + idx.shape[0])
    return _Tiles("csr", indptr=np.array(indptr, dtype=np.int64),
                  indices=np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64))


@numba.njit(cache=True)
def _greedy_csr(indptr, indices, n_a, delta):
    covered = np.zeros(n_a, dtype=np.bool_)
    chosen = np.zeros(indptr.shape[0] - 1, dtype=np.bool_)
    for i in range(indptr.shape[0] - 1):
        s, e = indptr[i], indptr[i + 1]
        size = e - s
        over = 0
        for j in range(s, e):
            if covered[indices[j]]:
                over += 1
        if over < delta * size:
            chosen[i] = True
            for j in range(s, e):
                covered[indices[j]] = True
    return chosen


class _LatticeGrid:
    """Dense 3-d embedding of a Z^d or H3 point set for box queries."""

    def __init__(self, A: ElementSet):
        pts = A.points
        d = pts.shape[1]
        g = np.zeros((pts.shape[0], 3), dtype=np.int64)
        g[:, 3 - d:] = pts
        self.pad = 3 - d
        self.lo = g.min(axis=0) if pts.shape[0] else np.zeros(3, dtype=np.int64)
        self.shape = (g.max(axis=0) - self.lo + 1) if pts.shape[0] else np.ones(3, dtype=np.int64)
        size = int(np.prod(self.shape))
        if size > 30_000_000:
            raise TilingError("point set too sparse for the dense lattice grid")
        cell = g - self.lo
        flat = (cell[:, 0] * self.shape[1] + cell[:, 1]) * self.shape[2] + cell[:, 2]
        self.is_pt = np.zeros(size, dtype=np.bool_)
        self.is_pt[flat] = True
        self.rank = np.cumsum(self.is_pt) - 1      # flat cell -> index into A
        self.flat = flat

    def boxes(self, F: BoxSet | tuple, centers: np.ndarray):
        """Per-center lists of 3-d boxes (inclusive, grid coordinates) covering F b."""
        m = centers.shape[0]
        if isinstance(F, tuple):  # explicit interval [lo, hi] of Z
            lo = np.zeros((m, 3), dtype=np.int64)
            hi = np.zeros((m, 3), dtype=np.int64)
            lo[:, 2] = centers[:, 0] + F[0]
            hi[:, 2] = centers[:, 0] + F[1]
            ptr = np.arange(m + 1, dtype=np.int64)
        elif isinstance(F.group, Heisenberg):
            n = F.n
            u = np.arange(-n, n + 1, dtype=np.int64)
            a, b, c = (centers[:, j][:, None] for j in range(3))
            shift = c + u[None, :] * b
            k = u.shape[0]
            lo = np.stack([a + u[None, :], np.broadcast_to(b - n, (m, k)), shift - n * n], axis=-1)
            hi = np.stack([a + u[None, :], np.broadcast_to(b + n, (m, k)), shift + n * n], axis=-1)
            lo, hi = lo.reshape(-1, 3), hi.reshape(-1, 3)
            ptr = np.arange(0, m * k + 1, k, dtype=np.int64)
        else:
            n = F.n
            lo = np.zeros((m, 3), dtype=np.int64)
            hi = np.zeros((m, 3), dtype=np.int64)
            lo[:, self.pad:] = centers - n
            hi[:, self.pad:] = centers + n
            ptr = np.arange(m + 1, dtype=np.int64)
        return ptr, lo - self.lo, hi - self.lo


@numba.njit(cache=True)
def _bit_add(tree, s0, s1, s2, x, y, z):
    i = x + 1
    while i <= s0:
        j = y + 1
        while j <= s1:
            k = z + 1
            while k <= s2:
                tree[i, j, k] += 1
                k += k & -k
            j += j & -j
        i += i & -i


@numba.njit(cache=True)
def _bit_prefix(tree, x, y, z):
    # sum over cells with coordinates < (x, y, z)
    tot = 0
    i = x
    while i > 0:
        j = y
        while j > 0:
            k = z
            while k > 0:
                tot += tree[i, j, k]
                k -= k & -k
            j -= j & -j
        i -= i & -i
    return tot


@numba.njit(cache=True)
def _clip_box(lo, hi, shape):
    out_lo = np.empty(3, dtype=np.int64)
    out_hi = np.empty(3, dtype=np.int64)
    for t in range(3):
        out_lo[t] = max(lo[t], 0)
        out_hi[t] = min(hi[t], shape[t] - 1)
        if out_lo[t] > out_hi[t]:
            return out_lo, out_hi, False
    return out_lo, out_hi, True


@numba.njit(cache=True)
def _find(nxt, i):
    r = i
    while nxt[r] != r:
        r = nxt[r]
    while nxt[i] != r:
        t = nxt[i]
        nxt[i] = r
        i = t
    return r


@numba.njit(cache=True)
def _greedy_boxes(ptr, lo, hi, sizes, shape, is_pt, delta):
    s0, s1, s2 = shape[0], shape[1], shape[2]
    total = s0 * s1 * s2
    tree = np.zeros((s0 + 1, s1 + 1, s2 + 1), dtype=np.int64)
    nxt = np.empty(total + 1, dtype=np.int64)
    for i in range(total):
        nxt[i] = i if is_pt[i] else i + 1
    nxt[total] = total
    covered = np.zeros(total, dtype=np.bool_)
    m = ptr.shape[0] - 1
    chosen = np.zeros(m, dtype=np.bool_)
    for c in range(m):
        over = 0
        for q in range(ptr[c], ptr[c + 1]):
            a, b, ok = _clip_box(lo[q], hi[q], shape)
            if not ok:
                continue
            x0, y0, z0 = a[0], a[1], a[2]
            x1, y1, z1 = b[0] + 1, b[1] + 1, b[2] + 1
            over += (_bit_prefix(tree, x1, y1, z1) - _bit_prefix(tree, x0, y1, z1)
                     - _bit_prefix(tree, x1, y0, z1) - _bit_prefix(tree, x1, y1, z0)
                     + _bit_prefix(tree, x0, y0, z1) + _bit_prefix(tree, x0, y1, z0)
                     + _bit_prefix(tree, x1, y0, z0) - _bit_prefix(tree, x0, y0, z0))
        if over < delta * sizes[c]:
            chosen[c] = True
            for q in range(ptr[c], ptr[c + 1]):
                a, b, ok = _clip_box(lo[q], hi[q], shape)
                if not ok:
                    continue
                for x in range(a[0], b[0] + 1):
                    for y in range(a[1], b[1] + 1):
                        base = (x * s1 + y) * s2
                        j = _find(nxt, base + a[2])
                        while j <= base + b[2]:
                            covered[j] = True
                            _bit_add(tree, s0, s1, s2, x, y, j - base)
                            nxt[j] = j + 1
                            j = _find(nxt, j + 1)
    return chosen, covered


def _greedy(F: ElementSet, Bpts: np.ndarray, A: ElementSet, delta: float,
            saturated=None, grid: "_LatticeGrid | None" = None):
    """Greedy selection over the rows of Bpts (canonical order).

    Returns the boolean selection mask and the mask over A of covered points.
    """
    m = Bpts.shape[0]
    nA = len(A)
    if m == 0:
        return np.zeros(0, dtype=bool), np.zeros(nA, dtype=bool)
    if saturated is None:
        saturated = saturates(F, A)
    if saturated:
        chosen = np.zeros(m, dtype=bool)
        chosen[0] = nA > 0
        return chosen, np.ones(nA, dtype=bool)
    iv = _interval(F)
    if isinstance(F, BoxSet) or iv is not None:
        grid = grid or _LatticeGrid(A)
        shape = grid.boxes(iv if not isinstance(F, BoxSet) else F, Bpts)
        ptr, lo, hi = shape
        sizes = _Counter(A).counts(F, Bpts).astype(np.float64)
        chosen, cov = _greedy_boxes(ptr, lo, hi, sizes, grid.shape.astype(np.int64), grid.is_pt, float(delta))
        return chosen, cov[grid.flat]
    tiles = build_tiles(F, Bpts, A, False)
    chosen = _greedy_csr(tiles.indptr, tiles.indices, nA, float(delta))
    sel = build_tiles(F, Bpts[chosen], A, False)
    return chosen, sel.union_mask(nA)


# ----------------------------------------------------------------------
# preconditions
# ----------------------------------------------------------------------

COND_NAMES = {
    1: "condition 1 (V^2 inside U)",
    2: "condition 2 (at most c|F_i| disjoint V-translates centered in F_i)",
    3: "condition 3 (|F_i| > 10)",
    4: "condition 4 (A is U-separated)",
    5: "condition 5 (|B| > (1-eps)|A|)",
    6: "condition 6 (|(U_{j<i} F_j)^-1 F_i b ∩ A| < (1+eps)|F_i b ∩ A|)",
    "lemma": "lemma hypothesis (|F b ∩ A| > |F|/2 for b in B)",
}


def packing_number(F: ElementSet, V: ElementSet) -> int:
    """Size of a greedy maximal family of disjoint translates V f, f in F.

    Every family of disjoint translates with distinct centers in F has at
    most |F| members, which is returned directly when V is trivial or F is
    not explicit.
    """
    group = F.group
    if len(V) <= 1 or not F.is_explicit() or len(F) > 20_000:
        return len(F)
    VV = product_set(V.inverse(), V)
    blocked = set()
    count = 0
    for f in F.points:
        key = tuple(f.tolist())
        if key in blocked:
            continue
        count += 1
        # f' with V f ∩ V f' nonempty satisfy f' ∈ (V^-1 V) f
        for g in group.mul_arrays(VV.points, f[None, :]):
            blocked.add(tuple(g.tolist()))
    return count


def _union_inverse_product(prev: Sequence[ElementSet], F: ElementSet) -> ElementSet | None:
    """(U prev)^-1 F, using box arithmetic for nested centered Z^d boxes."""
    if not prev:
        return None
    group = F.group
    if isinstance(group, Zd) and isinstance(F, BoxSet) and all(isinstance(p, BoxSet) for p in prev):
        return BoxSet(group, max(p.n for p in prev) + F.n)
    union = prev[0]
    for p in prev[1:]:
        union = union.union(p)
    return product_set(union.inverse(), F)


def condition6_failures(A: ElementSet, pts: np.ndarray, scales: Sequence[ElementSet], eps: float,
                        counter: _Counter | None = None, only: Sequence[int] | None = None) -> np.ndarray:
    """Boolean mask over ``pts`` of centers violating condition 6 at some scale."""
    counter = counter or _Counter(A)
    bad = np.zeros(pts.shape[0], dtype=bool)
    wanted = set(range(len(scales))) if only is None else set(only)
    done = set()
    prev_keys: list = []
    has_e = False
    for i, F in enumerate(scales):
        key = _scale_key(F)
        sig = (key, tuple(sorted(set(prev_keys), key=repr)))
        if i in wanted and sig not in done:
            done.add(sig)
            prev = list(scales[:i])
            if not prev:
                rhs = counter.counts(F, pts)
                bad |= ~(0 < (1 + eps) * rhs)
            elif not (has_e and saturates(F, A)):  # else both sides equal |A|
                K = _union_inverse_product(_distinct(prev), F)
                lhs = counter.counts(K, pts)
                rhs = counter.counts(F, pts)
                bad |= ~(lhs < (1 + eps) * rhs)
        if key not in prev_keys:
            prev_keys.append(key)
            has_e = has_e or F.group.identity in F
    return bad


def _scale_key(F: ElementSet):
    return ("box", F.n) if isinstance(F, BoxSet) else ("set", F.keys.tobytes())


def _distinct(sets: Sequence[ElementSet]) -> list[ElementSet]:
    seen, out = set(), []
    for s in sets:
        k = _scale_key(s)
        if k not in seen:
            seen.add(k)
            out.append(s)
    return out


@dataclass(frozen=True)
class TilingInstance:
    """Input to the multi-scale tiling.

    ``scales[0]`` is the smallest scale F_1; ``scales[-1]`` is F_N.
    """

    group: GroupModel
    A: ElementSet
    B: ElementSet
    scales: tuple
    U: ElementSet
    V: ElementSet
    meta: dict = field(default_factory=dict, compare=False)

    def check(self, params: TilingParams) -> Report:
        """Evaluate the six conditions of the multi-scale tiling."""
        rep = Report()
        g = self.group
        VV = product_set(self.V, self.V)
        rep.add(COND_NAMES[1], VV.issubset(self.U))
        worst = ""
        ok2 = True
        for i, F in enumerate(self.scales):
            if packing_number(F, self.V) > params.c * len(F):
                ok2, worst = False, f"scale {i + 1}"
                break
        rep.add(COND_NAMES[2], ok2, worst)
        small = [i + 1 for i, F in enumerate(self.scales) if len(F) <= 10]
        rep.add(COND_NAMES[3], not small, f"scales {small}" if small else "")
        from .group import is_separated
        rep.add(COND_NAMES[4], is_separated(self.A, self.U))
        subset = self.B.issubset(self.A)
        rep.add("B is a subset of A", subset)
        rep.add(COND_NAMES[5], len(self.B) > (1 - params.eps) * len(self.A),
                f"|B|={len(self.B)}, |A|={len(self.A)}")
        bad = condition6_failures(self.A, self.B.points, self.scales, params.eps)
        rep.add(COND_NAMES[6], not bad.any(), f"{int(bad.sum())} violating centers")
        if len(self.scales) < params.N:
            rep.add("number of scales", False, f"{len(self.scales)} < N={params.N}")
        return rep


@dataclass(frozen=True)
class TilingResult:
    """Centers per scale (index 0 is F_1) and the achieved coverage."""

    centers: tuple
    coverage: float

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "scales": [{"index": i + 1, "centers": c.tolist()} for i, c in enumerate(self.centers)],
        }


# ----------------------------------------------------------------------
# single scale
# ----------------------------------------------------------------------

def select_tile_centers(A: ElementSet, B: ElementSet, F: ElementSet, delta: float,
                        U: ElementSet | None = None, V: ElementSet | None = None,
                        c: int = 1, check: bool = True) -> ElementSet:
    """Greedy delta-disjoint selection of tile centers from B.

    Scans B in canonical order and keeps b when ``|F b ∩ A ∩ covered|`` is
    less than ``delta |F b ∩ A|``.

    Raises
    ------
    TilingError
        Naming the first violated hypothesis when ``check`` is set.
    """
    group = A.group
    U = U if U is not None else ElementSet(group, [group.identity])
    V = V if V is not None else ElementSet(group, [group.identity])
    _check_delta(delta, c)
    if check:
        from .group import is_separated
        if not product_set(V, V).issubset(U):
            raise TilingError(f"{COND_NAMES[1]} fails")
        if packing_number(F, V) > c * len(F):
            raise TilingError(f"{COND_NAMES[2]} fails")
        if len(F) <= 10:
            raise TilingError(f"{COND_NAMES[3]} fails: |F| = {len(F)}")
        if not is_separated(A, U):
            raise TilingError(f"{COND_NAMES[4]} fails")
        if not B.issubset(A):
            raise TilingError("B must be a subset of A")
        if len(B):
            cnt = _Counter(A).counts(F, B.points)
            if np.any(cnt <= len(F) / 2):
                raise TilingError(f"{COND_NAMES['lemma']} fails for {int(np.sum(cnt <= len(F) / 2))} centers")
    if len(B) == 0:
        return ElementSet(group, [])
    chosen, _ = _greedy(F, B.points, A, delta)
    return ElementSet(group, B.points[chosen])


# ----------------------------------------------------------------------
# multi-scale
# ----------------------------------------------------------------------

def quasi_tile(instance: TilingInstance, params: TilingParams, check: bool = True) -> TilingResult:
    """Multi-scale quasi-tiling from the largest scale down.

    Raises
    ------
    TilingError
        If ``check`` is set and a condition of the instance fails.
    TilingInvariantError
        If ``|B_k| > |A_k| / 2`` fails while ``|A_k| > 2 delta |A|`` under
        admissible constants.
    """
    if check:
        rep = instance.check(params)
        if not rep.ok:
            f = rep.failed()[0]
            raise TilingError(f"{f.name} fails {f.detail}".strip())
    A, scales, group = instance.A, instance.scales, instance.group
    delta = params.delta
    nA = len(A)
    a_left = np.ones(nA, dtype=bool)                   # A_k as a mask over A
    b_left = np.zeros(nA, dtype=bool)                  # B_k as a mask over A
    b_left[A.index_of(instance.B.points)] = True
    centers: list[np.ndarray] = [np.zeros((0, group.dim), dtype=np.int64)] * len(scales)
    frozen = False
    # the center-count invariant is only implied when the constants are admissible
    strict = not params.violations() and len(scales) >= params.N
    grid = _LatticeGrid(A) if isinstance(group, (Zd, Heisenberg)) and group.dim <= 3 else None
    for k in range(len(scales) - 1, -1, -1):
        if frozen or a_left.sum() < 2 * delta * nA:
            frozen = True
            continue
        if strict and a_left.sum() > 2 * delta * nA and not b_left.sum() > a_left.sum() / 2:
            raise TilingInvariantError(
                f"|B_k|={int(b_left.sum())} <= |A_k|/2={a_left.sum() / 2} at scale {k + 1}")
        F = scales[k]
        Bk = A.points[b_left]
        chosen, covered = _greedy(F, Bk, A, delta, saturated=saturates(F, A), grid=grid)
        ck = Bk[chosen]
        centers[k] = ck
        if ck.shape[0] == 0:
            continue
        a_left &= ~covered
        if a_left.sum() < 2 * delta * nA or k == 0:
            frozen = True
            continue
        # drop centers b with F_j b meeting F_k B~_k for some j < k
        b_left &= ~_near(_distinct(scales[:k]), F, ck, A.points, b_left)
    union = np.zeros(nA, dtype=bool)
    for k, ck in enumerate(centers):
        if ck.shape[0]:
            union |= build_tiles(scales[k], ck, A).union_mask(nA)
    cov = float(union.sum() / nA) if nA else 0.0
    return TilingResult(tuple(centers), cov)


def _near(prev: Sequence[ElementSet], F: ElementSet, centers: np.ndarray, pts: np.ndarray,
          mask: np.ndarray) -> np.ndarray:
    """Mask of rows b (restricted to ``mask``) lying in (U prev)^-1 F centers."""
    group = F.group
    out = np.zeros(pts.shape[0], dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return out
    q = pts[idx]
    K = _union_inverse_product(prev, F)
    if isinstance(group, Zd) and isinstance(K, BoxSet):
        # b is removed iff it lies within sup-distance K.n of a center
        hits = GridCounter(centers).box_sum(q - K.n, q + K.n)
        out[idx] = hits > 0.5
        return out
    # b lies in K C iff K^-1 b meets the center set C
    hits = _Counter(ElementSet(group, centers)).counts(K.inverse(), q)
    out[idx] = hits > 0
    return out


def verify_tiling(instance: TilingInstance, params: TilingParams, result: TilingResult) -> Report:
    """Check per-scale delta-disjointness, cross-scale disjointness and coverage."""
    A, scales = instance.A, instance.scales
    nA = len(A)
    delta = params.delta
    rep = Report()
    masks = []
    worst = 0.0
    ok1 = True
    for k, ck in enumerate(result.centers):
        m = np.zeros(nA, dtype=bool)
        ck = np.asarray(ck, dtype=np.int64).reshape(-1, instance.group.dim)
        if ck.shape[0]:
            t = build_tiles(scales[k], ck, A)
            for i in range(ck.shape[0]):
                tile = t.tile(i, nA)
                if tile.size == 0:
                    ok1 = False
                    worst = max(worst, float("inf"))
                    continue
                r = float(m[tile].sum() / tile.size)
                worst = max(worst, r)
                if not r < delta:
                    ok1 = False
                m[tile] = True
        masks.append(m)
    rep.add("per-scale delta-disjointness", ok1, f"max overlap ratio {worst:.6g}")
    depth = np.sum(masks, axis=0) if masks else np.zeros(nA)
    clash = int(np.sum(depth > 1))
    rep.add("cross-scale disjointness", clash == 0, f"{clash} points in two scales")
    cov = float(np.sum(depth > 0) / nA) if nA else 0.0
    rep.add("coverage", cov > 1 - 2 * delta, f"coverage {cov:.6g} vs bound {1 - 2 * delta:.6g}")
    return rep


def lemma_bound_holds(A: ElementSet, B: ElementSet, F: ElementSet, centers: ElementSet,
                      delta: float, c: int = 1) -> bool:
    """|F B~ ∩ A| > (delta / 4c) |B| for a single-scale selection."""
    if len(B) == 0:
        return True
    t = build_tiles(F, centers.points, A)
    m = np.zeros(len(A), dtype=bool)
    if t.mode == "all":
        m[:] = True
    else:
        for i in range(len(centers)):
            m[t.tile(i, len(A))] = True
    return m.sum() > delta / (4 * c) * len(B)


# ----------------------------------------------------------------------
# instance generator
# ----------------------------------------------------------------------

def separated_thinning(pts: np.ndarray, group: GroupModel, U: ElementSet) -> np.ndarray:
    """Greedy maximal U-separated subset of ``pts`` in the given order."""
    nontriv = [u for u in U.points if np.any(u != 0)]
    if not nontriv:
        return pts
    Ua = np.array(nontriv, dtype=np.int64)
    Ui = group.inv_array(Ua)
    blocked = set()
    keep = np.zeros(pts.shape[0], dtype=bool)
    keys = group.keys(pts)
    for i in range(pts.shape[0]):
        if int(keys[i]) in blocked:
            continue
        keep[i] = True
        h = pts[i:i + 1]
        for arr in (group.mul_arrays(Ua, h), group.mul_arrays(Ui, h)):
            blocked.update(int(k) for k in group.keys(arr))
    return pts[keep]


def _box_ratio(group: GroupModel, m: int, n: int) -> float:
    """|F_m^-1 F_n| / |F_n| for standard boxes."""
    if isinstance(group, Zd):
        return ((2 * (m + n) + 1) / (2 * n + 1)) ** group.dim
    Fm = group.folner(m)
    return product_size(ElementSet(group, Fm.points).inverse(), group.folner(n)) / len(group.folner(n))


def _saturation_index(group: GroupModel, A: ElementSet) -> int:
    """Smallest n whose box passes the saturation test for A."""
    if saturates(group.folner(1), A):
        return 1
    lo, hi = 1, 2
    while not saturates(group.folner(hi), A):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if saturates(group.folner(mid), A):
            hi = mid
        else:
            lo = mid
    return hi


def folner_ladder(group: GroupModel, A: ElementSet, params: TilingParams, counter: _Counter,
                  growth: float = 1.1) -> tuple[list[BoxSet], np.ndarray]:
    """Nested boxes F_1 ⊂ F_2 ⊂ ... ending at a box that saturates A.

    F_1 is the smallest box with more than 10 points.  Each later box is the
    first candidate, starting where the group-level ratio drops below 1+eps
    and growing geometrically, whose condition-6 failures on A fit a quarter
    of the eps budget.  Returns the distinct scales and the failure mask.
    """
    n = 0
    while len(group.folner(n)) <= 10:
        n += 1
    scales = [group.folner(n)]
    pts = A.points
    bad = condition6_failures(A, pts, scales, params.eps, counter)
    budget = params.eps * len(A) / 4
    n_sat = _saturation_index(group, A)
    while scales[-1].n < n_sat:
        m = scales[-1].n
        lo, hi = m + 1, n_sat
        if _box_ratio(group, m, hi) >= 1 + params.eps:
            scales.append(group.folner(n_sat))
            break
        while lo < hi:  # smallest n with ratio below 1 + eps
            mid = (lo + hi) // 2
            if _box_ratio(group, m, mid) < 1 + params.eps:
                hi = mid
            else:
                lo = mid + 1
        cand = lo
        while True:
            trial = scales + [group.folner(cand)]
            f = condition6_failures(A, pts, trial, params.eps, counter, only=[len(scales)])
            if cand >= n_sat or f.sum() <= budget:
                scales.append(group.folner(min(cand, n_sat)))
                bad |= f
                break
            cand = min(n_sat, max(cand + 1, int(cand * growth)))
    return scales, bad


def make_instance(group: GroupModel, window_scale: int, density: float, seed: int,
                  params: TilingParams | None = None, U: ElementSet | None = None,
                  V: ElementSet | None = None, saturate: bool = True) -> TilingInstance:
    """Seeded instance satisfying every condition of the multi-scale tiling.

    A is a greedy U-separated thinning of a density-``density`` random subset
    of the Følner window of index ``window_scale``; B drops the centers that
    violate condition 6; the scales are a Følner ladder padded to N scales
    with its top (saturating) box.  With ``saturate=False`` the saturating
    box is dropped and only the proper ladder is returned, so the recursion
    has to work through every scale (callers then pass N = len(scales)).

    Raises
    ------
    TilingError
        Naming the condition that cannot be met at this window scale.
    """
    params = params or params_for(0.1, 1)
    if not 0 < density <= 1:
        raise TilingError("density must lie in (0, 1]")
    U = U if U is not None else ElementSet(group, [group.identity])
    V = V if V is not None else ElementSet(group, [group.identity])
    window = group.folner(window_scale)
    if len(window) <= 10:
        raise TilingError(f"{COND_NAMES[3]} cannot hold inside a window of {len(window)} points; "
                          "use a larger window")
    rng = make_rng(seed, "tiling", group.name)
    pts = window.points
    if density < 1:
        pts = pts[rng.random(pts.shape[0]) < density]
    pts = separated_thinning(pts, group, U)
    A = ElementSet(group, pts)
    if len(A) <= 10:
        raise TilingError(f"{COND_NAMES[3]} cannot hold: only {len(A)} points survive; use a larger window")
    counter = _Counter(A)
    ladder, bad = folner_ladder(group, A, params, counter)
    if not saturate:
        if len(ladder) > 1 and saturates(ladder[-1], A):
            ladder = ladder[:-1]
        scales = tuple(ladder)
    else:
        if len(ladder) > params.N:
            raise TilingError(f"the Følner ladder needs {len(ladder)} > N={params.N} scales")
        scales = tuple(ladder + [ladder[-1]] * (params.N - len(ladder)))
    B = ElementSet(group, A.points[~bad])
    if not len(B) > (1 - params.eps) * len(A):
        raise TilingError(f"{COND_NAMES[5]} fails ({len(B)} of {len(A)}); use a larger window")
    meta = {"window_scale": int(window_scale), "density": float(density), "seed": int(seed),
            "ladder": [int(F.n) for F in ladder]}
    return TilingInstance(group, A, B, scales, U, V, meta)
