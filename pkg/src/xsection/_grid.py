"""Prefix-sum counters for lattice point sets."""

from __future__ import annotations

import itertools

import numpy as np


class GridCounter:
    """Weighted point counts in axis-aligned boxes of Z^d (inclusive bounds)."""

    def __init__(self, pts: np.ndarray, weights: np.ndarray | None = None, axes=None):
        pts = np.asarray(pts, dtype=np.int64)
        self.d = pts.shape[1]
        self.axes = tuple(range(self.d)) if axes is None else tuple(axes)
        if pts.shape[0] == 0:
            self.lo = np.zeros(self.d, dtype=np.int64)
            self.shape = np.zeros(self.d, dtype=np.int64)
        else:
            self.lo = pts.min(axis=0)
            self.shape = pts.max(axis=0) - self.lo + 1
        w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        grid = np.zeros(tuple(int(s) + 1 for s in self.shape), dtype=float)
        if pts.shape[0]:
            np.add.at(grid, tuple((pts - self.lo + 1).T), w)
        for ax in self.axes:
            np.cumsum(grid, axis=ax, out=grid)
        self.grid = grid

    def box_sum(self, lo: np.ndarray, hi: np.ndarray, fixed: np.ndarray | None = None) -> np.ndarray:
        """Sum over [lo, hi] on the summed axes; ``fixed`` gives exact coordinates
        on the remaining axes (queries outside the grid count zero)."""
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        m = lo.shape[0]
        out = np.zeros(m)
        idx_fixed = []
        valid = np.ones(m, dtype=bool)
        if fixed is not None:
            for j, ax in enumerate(a for a in range(self.d) if a not in self.axes):
                f = fixed[:, j] - self.lo[ax] + 1
                valid &= (f >= 1) & (f <= self.shape[ax])
                idx_fixed.append((ax, np.clip(f, 0, self.shape[ax])))
        for corner in itertools.product((0, 1), repeat=len(self.axes)):
            sign = (-1) ** (len(self.axes) - sum(corner))
            index = [None] * self.d
            for j, ax in enumerate(self.axes):
                q = hi[:, j] if corner[j] else lo[:, j] - 1
                index[ax] = np.clip(q - self.lo[ax] + 1, 0, self.shape[ax])
            for ax, f in idx_fixed:
                index[ax] = f
            out += sign * self.grid[tuple(index)]
        out[~valid] = 0
        return out


def runs(pts: np.ndarray) -> np.ndarray:
    """Maximal runs of consecutive last coordinates in lexicographically sorted rows.

    Returns rows (prefix..., lo, hi).
    """
    pts = np.asarray(pts, dtype=np.int64)
    n, d = pts.shape
    if n == 0:
        return np.zeros((0, d + 1), dtype=np.int64)
    brk = np.ones(n, dtype=bool)
    brk[1:] = pts[1:, d - 1] != pts[:-1, d - 1] + 1
    if d > 1:
        brk[1:] |= np.any(pts[1:, : d - 1] != pts[:-1, : d - 1], axis=1)
    starts = np.flatnonzero(brk)
    ends = np.append(starts[1:], n) - 1
    return np.hstack([pts[starts, : d - 1], pts[starts, d - 1:], pts[ends, d - 1:]])


class LineCounter:
    """Counts of a 3-d point set on segments {(x, y, z) : lo <= z <= hi}."""

    def __init__(self, pts3: np.ndarray):
        pts3 = np.asarray(pts3, dtype=np.int64)
        if pts3.shape[0] == 0:
            self.lo = np.zeros(3, dtype=np.int64)
            self.shape = np.ones(3, dtype=np.int64)
        else:
            self.lo = pts3.min(axis=0)
            self.shape = pts3.max(axis=0) - self.lo + 1
        s = tuple(int(v) for v in self.shape)
        if s[0] * s[1] * (s[2] + 1) > 60_000_000:
            raise ValueError("point set too sparse for a dense line counter")
        c = np.zeros((s[0], s[1], s[2] + 1), dtype=np.int64)
        if pts3.shape[0]:
            g = pts3 - self.lo
            np.add.at(c, (g[:, 0], g[:, 1], g[:, 2] + 1), 1)
        np.cumsum(c, axis=2, out=c)
        self.c = c

    def count(self, x, y, lo, hi) -> np.ndarray:
        x = np.asarray(x) - self.lo[0]
        y = np.asarray(y) - self.lo[1]
        lo = np.clip(np.asarray(lo) - self.lo[2], 0, self.shape[2])
        hi = np.clip(np.asarray(hi) - self.lo[2] + 1, 0, self.shape[2])
        ok = (x >= 0) & (x < self.shape[0]) & (y >= 0) & (y < self.shape[1]) & (hi > lo)
        xs, ys = np.where(ok, x, 0), np.where(ok, y, 0)
        val = self.c[xs, ys, hi] - self.c[xs, ys, lo]
        return np.where(ok, val, 0)
