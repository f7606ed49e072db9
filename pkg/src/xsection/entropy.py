"""Castle entropy, ball covers and block-entropy estimators.

All entropies are in bits.  The castle entropy ``h_T^eps(P | G)`` is the
infimum of the relative logarithmic size over covers of the castle base by
balls; :func:`castle_entropy_exact` computes it by enumerating set partitions
of small bases and :func:`castle_entropy_upper` bounds it by grouping base
points with identical trimmed names.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._report import Report
from ._rng import make_rng
from .group import ElementSet, GroupModel, Zd
from .section import Castle, SectionSample, SectionError, tiling_castle, validate
from .systems import Bernoulli, Induced, SymbolicSystem, Tower, analytic_entropy, induce

LN2 = math.log(2.0)


class EntropyError(ValueError):
    """A precondition of an entropy operation is violated."""


# ----------------------------------------------------------------------
# partitions
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """A labeling of the section points by ``{0, ..., k-1}``."""

    labels: np.ndarray
    k: int | None = None

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", lab)
        k = int(lab.max()) + 1 if self.k is None and lab.size else (self.k or 1)
        if k < 1 or (lab.size and (lab.min() < 0 or lab.max() >= k)):
            raise EntropyError("partition labels must lie in {0, ..., k-1} with k >= 1")
        object.__setattr__(self, "k", k)


@dataclass(frozen=True, eq=False)
class FiberPartition:
    """Fiber ids of the section points; the atoms of the conditioning algebra."""

    ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))

    @classmethod
    def trivial(cls, n: int) -> "FiberPartition":
        return cls(np.zeros(n, dtype=np.int64))

    def join(self, other: "FiberPartition") -> "FiberPartition":
        pairs = np.stack([self.ids, other.ids], axis=1)
        _, inv = np.unique(pairs, axis=0, return_inverse=True)
        return FiberPartition(inv.ravel())


def spectra_consistent(sample: SectionSample, fibers: FiberPartition, K: ElementSet | None = None,
                       exclude: np.ndarray | None = None) -> bool:
    """Whether fiber-mates carry identical address spectra.

    The spectrum of ``x`` is the multiset ``{alpha(x, y)}`` over its class,
    restricted to ``K`` when given.  Points flagged in ``exclude`` (a window
    collar) are skipped.
    """
    G = sample.group
    keep = np.ones(len(sample), dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    seen: dict[int, bytes] = {}
    for c in sample.class_ids:
        mem = sample.members(int(c))
        for x in mem[keep[mem]]:
            if K is None:
                addr = sample.alpha(np.full(mem.shape[0], x), mem)
                spec = np.sort(G.keys(addr)).tobytes()
            else:
                present = sample.resolve(np.full(len(K), x), K.points) >= 0
                spec = present.tobytes()
            f = int(fibers.ids[x])
            if seen.setdefault(f, spec) != spec:
                return False
    return True


def shape_fibers(castle: Castle) -> FiberPartition:
    """Fibers generated by tower shapes.

    A range point's fiber is the address set of its tower together with its
    own address; points outside the range are singleton fibers.  With these
    fibers every address map used by a ball is measurable.
    """
    s = castle.sample
    G = s.group
    n = len(s)
    ids = np.full(n, -1, dtype=np.int64)
    table: dict[bytes, int] = {}
    nxt = 0
    for slot, t in enumerate(castle.towers):
        addr = G.keys(castle.addresses(slot))
        order = np.argsort(addr)
        shape = addr[order].tobytes()
        for pos, p in zip(order, t):
            key = shape + int(pos).to_bytes(4, "little")
            if key not in table:
                table[key] = nxt
                nxt += 1
            ids[p] = table[key]
    rest = ids < 0
    ids[rest] = nxt + np.arange(int(rest.sum()))
    return FiberPartition(ids)


# ----------------------------------------------------------------------
# rls and balls
# ----------------------------------------------------------------------

def rls(cover: Sequence[np.ndarray], fibers: FiberPartition, A: np.ndarray, mu: np.ndarray) -> float:
    """Relative logarithmic size: sum over x in A of mu(x) log2+ (#cover sets meeting fiber(x))."""
    A = np.asarray(A, dtype=np.int64)
    inA = np.zeros(fibers.ids.shape[0], dtype=bool)
    inA[A] = True
    met: dict[int, int] = Counter()
    for C in cover:
        C = np.asarray(C, dtype=np.int64)
        if C.size and not inA[C].all():
            raise EntropyError("every cover set must be contained in A")
        for f in np.unique(fibers.ids[C]):
            met[int(f)] += 1
    cnt = np.array([met.get(int(f), 0) for f in fibers.ids[A]], dtype=float)
    return float(np.sum(np.asarray(mu)[A] * np.log2(np.maximum(cnt, 1.0))))


@dataclass(frozen=True, eq=False)
class Ball:
    """Base points ``B``, alphabet size ``|E|`` and per-fiber address maps.

    ``address[f]`` is an ``(|E|, dim)`` array; ``phi(x, e)`` is the point y of
    x's class with ``alpha(x, y) = address[fiber(x)][e]``.
    """

    B: np.ndarray
    address: dict

    @property
    def size_E(self) -> int:
        return next(iter(self.address.values())).shape[0] if self.address else 0


def _drop_ok(kept: int, size: int, eps: float) -> bool:
    """Condition 2 for ``kept`` of ``size`` tower points; a full tower always qualifies."""
    return kept >= size or kept > (1 - eps) * size


def validate_ball(ball: Ball, P: Partition, castle: Castle, eps: float,
                  fibers: FiberPartition) -> tuple[bool, str]:
    """Check the three ball conditions plus injectivity; returns (ok, first violation)."""
    s = castle.sample
    B = np.asarray(ball.B, dtype=np.int64)
    if not np.isin(B, castle.base).all():
        raise EntropyError("ball points must lie in the castle base")
    nE = ball.size_E
    phi = np.empty((B.shape[0], nE), dtype=np.int64)
    for r, x in enumerate(B):
        f = int(fibers.ids[x])
        if f not in ball.address:
            return False, f"no address map for fiber {f}"
        addr = np.asarray(ball.address[f], dtype=np.int64).reshape(nE, s.group.dim)
        phi[r] = s.resolve(np.full(nE, x), addr) if nE else phi[r]
    slots = np.array([castle.slot(int(x)) for x in B])
    for r, x in enumerate(B):
        y = phi[r]
        if np.any(y < 0) or np.any(castle.owner[np.maximum(y, 0)] != slots[r]):
            return False, f"condition 1: phi({x}, .) leaves the tower of {x}"
    for r, x in enumerate(B):
        size = castle.towers[slots[r]].shape[0]
        if not _drop_ok(np.unique(phi[r]).shape[0], size, eps):
            return False, f"condition 2: phi({x}, E) covers too little of its tower"
    if nE and B.shape[0]:
        lab = P.labels[phi]
        if np.any(lab != lab[0]):
            e = int(np.flatnonzero(np.any(lab != lab[0], axis=0))[0])
            return False, f"condition 3: P(phi(x, {e})) is not constant on B"
    if np.unique(phi).shape[0] != phi.size:
        return False, "phi is not one-to-one"
    return True, ""


# ----------------------------------------------------------------------
# castle entropy
# ----------------------------------------------------------------------

@dataclass
class _Names:
    addr: list          # per slot: sorted address keys
    lab: list           # per slot: labels aligned with addr
    fib: np.ndarray     # per slot fiber id
    w: np.ndarray       # per slot weight
    sizes: np.ndarray


def _names(P: Partition, castle: Castle, fibers: FiberPartition) -> _Names:
    G = castle.sample.group
    addr, lab = [], []
    for slot, t in enumerate(castle.towers):
        k = G.keys(castle.addresses(slot))
        o = np.argsort(k)
        addr.append(k[o])
        lab.append(P.labels[t][o])
    return _Names(addr, lab, fibers.ids[castle.base], castle.sample.weights[castle.base], castle.sizes)


def _rls_from_groups(groups: np.ndarray, fib: np.ndarray, w: np.ndarray) -> float:
    pairs = np.unique(np.stack([fib, groups], axis=1), axis=0)
    uf, cnt = np.unique(pairs[:, 0], return_counts=True)
    per = cnt[np.searchsorted(uf, fib)]
    return float(np.sum(w * np.log2(per)))


def max_drops(size: int, eps: float) -> int:
    """Largest k with k < eps * size (zero when none)."""
    k = math.ceil(eps * size) - 1
    while k > 0 and not k < eps * size:
        k -= 1
    return max(k, 0)


def greedy_cover(P: Partition, castle: Castle, eps: float, fibers: FiberPartition) -> np.ndarray:
    """Ball id per base slot from identical trimmed names.

    Each tower drops its ``max_drops`` addresses of highest cross-tower
    disagreement (the number of towers not carrying the address's most common
    label there), ties broken by canonical address order.
    """
    nm = _names(P, castle, fibers)
    nb = len(nm.addr)
    if nb == 0:
        return np.zeros(0, dtype=np.int64)
    allk = np.concatenate(nm.addr)
    alll = np.concatenate(nm.lab)
    pairs, cnt = np.unique(np.stack([allk, alll], axis=1), axis=0, return_counts=True)
    uk, first = np.unique(pairs[:, 0], return_index=True)
    best = np.maximum.reduceat(cnt, first)
    score_of = dict(zip(uk.tolist(), (nb - best).tolist()))
    names: dict[bytes, int] = {}
    out = np.empty(nb, dtype=np.int64)
    for i in range(nb):
        a, l = nm.addr[i], nm.lab[i]
        k = max_drops(int(nm.sizes[i]), eps)
        if k:
            sc = np.array([score_of[v] for v in a.tolist()])
            order = np.lexsort((a, -sc))
            keep = np.sort(order[k:])
            a, l = a[keep], l[keep]
        key = a.tobytes() + b"|" + l.tobytes()
        out[i] = names.setdefault(key, len(names))
    return out


def castle_entropy_upper(P: Partition, castle: Castle, eps: float, fibers: FiberPartition) -> float:
    """rls of the greedy name-clustering cover; an upper bound for h_T^eps(P | G) in bits."""
    if castle.base.shape[0] == 0:
        return 0.0
    groups = greedy_cover(P, castle, eps, fibers)
    return _rls_from_groups(groups, fibers.ids[castle.base], castle.sample.weights[castle.base])


def per_unit(value: float, castle: Castle) -> float:
    """Castle entropy per unit of mu_T mass."""
    m = castle.measure()
    return value / m if m > 0 else 0.0


def exactly_clusterable(castle: Castle, eps: float) -> bool:
    """True when no tower may drop an address, so balls need identical full names."""
    return all(max_drops(int(s), eps) == 0 for s in castle.sizes)


def _ball_capacity(nm: _Names, members: Sequence[int], k: int) -> int:
    """Largest |E| for a ball over the given base slots."""
    by_fiber: dict[int, list[int]] = {}
    for i in members:
        by_fiber.setdefault(int(nm.fib[i]), []).append(i)
    per_label = None
    for idx in by_fiber.values():
        common = nm.addr[idx[0]]
        for i in idx[1:]:
            common = np.intersect1d(common, nm.addr[i], assume_unique=True)
        labs = []
        for i in idx:
            labs.append(nm.lab[i][np.searchsorted(nm.addr[i], common)])
        labs = np.array(labs)
        agree = np.all(labs == labs[0], axis=0) if common.size else np.zeros(0, dtype=bool)
        counts = np.bincount(labs[0][agree], minlength=k) if common.size else np.zeros(k, dtype=np.int64)
        per_label = counts if per_label is None else np.minimum(per_label, counts)
    return int(per_label.sum()) if per_label is not None else 0


def _set_partitions(m: int):
    """Restricted growth strings of length m."""
    a = [0] * m

    def rec(i, mx):
        if i == m:
            yield list(a)
            return
        for v in range(mx + 2):
            a[i] = v
            yield from rec(i + 1, max(mx, v))

    if m == 0:
        yield []
        return
    yield from rec(1, 0)


def castle_entropy_exact(P: Partition, castle: Castle, eps: float, fibers: FiberPartition,
                         cap: int = 8) -> float:
    """Minimum rls over all covers of the base by valid balls (brute force).

    Partitions of the base suffice: a subset of a ball is a ball, and
    shrinking sets never increases rls.
    """
    m = castle.base.shape[0]
    if m > cap:
        raise EntropyError(f"base of {m} points exceeds the brute-force cap {cap}")
    if m == 0:
        return 0.0
    nm = _names(P, castle, fibers)
    valid: dict[int, bool] = {}

    def ok(mask: int) -> bool:
        if mask not in valid:
            mem = [i for i in range(m) if mask >> i & 1]
            cap_E = _ball_capacity(nm, mem, P.k)
            valid[mask] = all(_drop_ok(cap_E, int(nm.sizes[i]), eps) for i in mem)
        return valid[mask]

    best = math.inf
    for rgs in _set_partitions(m):
        masks = [0] * (max(rgs) + 1)
        for i, b in enumerate(rgs):
            masks[b] |= 1 << i
        if all(ok(mk) for mk in masks):
            best = min(best, _rls_from_groups(np.array(rgs), nm.fib, nm.w))
    return float(best)


def comparison_check(P: Partition, T: Castle, T2: Castle, eps: float, fibers: FiberPartition,
                     cap: int = 8) -> dict:
    """Evaluate ``h_{T2}^{4 eps} <= h_T^eps + 2 eps + eps log2 |P|``.

    Both sides use the exact oracle when both bases fit under ``cap`` and the
    greedy bound otherwise (reported as ``method = 'bound-vs-bound'``).
    """
    for name, c in (("T", T), ("T'", T2)):
        cov = c.range_measure()
        if not cov > 1 - eps:
            raise EntropyError(f"castle {name} covers {cov:.6g}, which must exceed 1 - eps = {1 - eps:.6g}")
    exact = T.base.shape[0] <= cap and T2.base.shape[0] <= cap
    f = castle_entropy_exact if exact else castle_entropy_upper
    lhs = f(P, T2, 4 * eps, fibers)
    h = f(P, T, eps, fibers)
    rhs = h + 2 * eps + eps * math.log2(P.k)
    return {"ok": bool(lhs <= rhs), "lhs": lhs, "rhs": rhs, "h_small": h,
            "method": "exact" if exact else "bound-vs-bound", "eps": eps}


# ----------------------------------------------------------------------
# block entropy
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """An estimator output with its seed-split standard error."""

    estimate: float
    stderr: float
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "params": self.params, "seed": self.seed,
                "estimate_nats": self.estimate * LN2}


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """One int64 code per row, equal exactly when the rows are equal."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0], dtype=np.int64)
    lo = rows.min()
    k = int(rows.max() - lo) + 1
    if rows.shape[1] * math.log2(max(k, 2)) > 62:
        # sparse alphabets: compress symbols to dense ranks first
        _, dense = np.unique(rows, return_inverse=True)
        rows = dense.reshape(rows.shape).astype(np.int64)
        lo, k = 0, int(rows.max()) + 1
        if rows.shape[1] * math.log2(max(k, 2)) > 62:
            _, inv = np.unique(rows, axis=0, return_inverse=True)
            return inv.ravel().astype(np.int64)
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(rows.shape[1]):
        code = code * k + (rows[:, j] - lo)
    return code


def plugin_entropy(codes: np.ndarray) -> float:
    """Plug-in entropy of the rows of ``codes`` with the Miller-Madow correction, in bits."""
    codes = np.asarray(codes)
    n = codes.shape[0]
    if n == 0:
        return 0.0
    if codes.ndim == 2:
        codes = pack_rows(codes)
    _, cnt = np.unique(codes, return_counts=True)
    p = cnt / n
    h = -float(np.sum(p * np.log2(p)))
    return h + (cnt.shape[0] - 1) / (2 * n * LN2)


def _patterns(system: SymbolicSystem, F: ElementSet, n: int, rng) -> np.ndarray:
    """n samples of the process read on F, as rows in F's canonical order."""
    if isinstance(system, Bernoulli):
        # distinct sites of an i.i.d. field are independent
        return system.draw(n * len(F), rng).reshape(n, len(F))
    if F.group.dim != 1:
        raise EntropyError(f"{system.kind} only supports one-dimensional pattern shapes")
    off = F.points[:, 0]
    off = off - off.min()
    path = system.sample_path(n + int(off.max()), rng)
    idx = np.arange(n)[:, None] + off[None, :]
    return path[idx]


def _shards(sample_size: int, n_shards: int) -> list[int]:
    base = sample_size // n_shards
    return [base + (1 if i < sample_size % n_shards else 0) for i in range(n_shards)]


def block_entropy(system: SymbolicSystem, F: ElementSet, sample_size: int, seed: int,
                  n_shards: int = 10, method: str = "increment") -> Estimate:
    """Entropy rate estimate in bits per point from F-patterns.

    ``method='increment'`` returns ``H(F) - H(F minus its last element)``;
    ``method='block'`` returns ``H(F) / |F|``.  Both use Miller-Madow
    corrected plug-in entropies on pooled shards; the standard error comes
    from the spread of the per-shard estimates.
    """
    k = system.alphabet_size
    if len(F) * math.log2(max(k, 2)) > 40:
        raise EntropyError(f"|F| log2|alphabet| = {len(F) * math.log2(max(k, 2)):.4g} exceeds 40")
    if sample_size < 10_000:
        raise EntropyError("sample_size must be at least 10^4")
    if method not in ("increment", "block"):
        raise EntropyError(f"unknown method {method!r}")
    pats = [_patterns(system, F, m, make_rng(seed, "block", i)) for i, m in enumerate(_shards(sample_size, n_shards))]

    def est(rows):
        h = plugin_entropy(rows)
        if method == "block":
            return h / rows.shape[1]
        return h - (plugin_entropy(rows[:, :-1]) if rows.shape[1] > 1 else 0.0)

    per = np.array([est(p) for p in pats])
    pooled = est(np.concatenate(pats))
    se = float(per.std(ddof=1) / math.sqrt(n_shards)) if n_shards > 1 else float("nan")
    return Estimate(float(pooled), se, {"F_size": len(F), "sample_size": sample_size, "method": method,
                                        "shards": n_shards}, int(seed))


def pattern_table(system: SymbolicSystem, F: ElementSet, sample_size: int, seed: int, path: str) -> int:
    """Write pattern counts to CSV (pattern, count); returns the number of rows."""
    rows = _patterns(system, F, sample_size, make_rng(seed, "block", 0))
    uniq, cnt = np.unique(rows, axis=0, return_counts=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pattern", "count"])
        for u, c in zip(uniq, cnt):
            w.writerow([" ".join(map(str, u.tolist())), int(c)])
    return int(uniq.shape[0])


# ----------------------------------------------------------------------
# Abramov and Kac
# ----------------------------------------------------------------------

def _cylinder_measure(system: SymbolicSystem, cylinder: Sequence[int]) -> float:
    m = system.marginal()
    return float(np.sum(m[np.asarray(list(cylinder), dtype=np.int64)]))


def abramov_check(base_system: SymbolicSystem, roof_or_set, sample_size: int, seed: int,
                  window: int = 2, n_shards: int = 10) -> dict:
    """Compare the entropy of an induced map (or a suspension) with the Abramov prediction.

    ``roof_or_set`` is either a collection of base symbols (the cylinder
    ``{x_0 in A}``, giving the induced map with target ``h / mu(A)``) or a
    :class:`~xsection.systems.Tower` over ``base_system`` (target
    ``h(base) / E[roof]``).  For cylinders the report also carries the Kac
    check of the mean return time against ``1 / mu(A)``.
    """
    h = analytic_entropy(base_system)
    F = ElementSet(Zd(1), np.arange(window)[:, None])
    if isinstance(roof_or_set, Tower):
        tower = roof_or_set
        est = block_entropy(tower, F, sample_size, seed, n_shards)
        target = h / tower.mean_roof()
        return {"kind": "suspension", "estimate": est.estimate, "stderr": est.stderr, "target": target,
                "ratio": est.estimate / target, "mean_roof": tower.mean_roof()}
    cyl = sorted(int(a) for a in roof_or_set)
    nu = _cylinder_measure(base_system, cyl)
    if nu <= 0:
        raise EntropyError("the cylinder has probability 0")
    ind = induce(base_system, cyl)
    rows, times = [], []
    for i, m in enumerate(_shards(sample_size, n_shards)):
        rng = make_rng(seed, "abramov", i)
        rs = ind.sample_returns(m + window - 1, rng)
        sym = rs.symbols
        rows.append(sym[np.arange(m)[:, None] + np.arange(window)[None, :]])
        times.append(rs.return_times[:m])

    def est(r):
        return plugin_entropy(r) - (plugin_entropy(r[:, :-1]) if r.shape[1] > 1 else 0.0)

    per = np.array([est(r) for r in rows])
    value = est(np.concatenate(rows))
    se = float(per.std(ddof=1) / math.sqrt(n_shards))
    rt = np.concatenate(times).astype(float)
    target = h / nu
    return {"kind": "induced", "estimate": float(value), "stderr": se, "target": target,
            "ratio": float(value / target), "measure": nu,
            "kac_mean": float(rt.mean()), "kac_stderr": float(rt.std(ddof=1) / math.sqrt(rt.size)),
            "kac_target": 1.0 / nu}


# ----------------------------------------------------------------------
# transfer
# ----------------------------------------------------------------------

def lex_rank_sample(sample: SectionSample) -> SectionSample:
    """The same relation with the Z-cocycle given by lexicographic rank inside each class."""
    ranks = np.zeros(len(sample), dtype=np.int64)
    for c in sample.class_ids:
        mem = sample.members(int(c))
        ranks[mem] = np.arange(mem.shape[0])
    return sample.with_cocycle(Zd(1), ranks[:, None])


def transfer_check(sample: SectionSample, beta_sample: SectionSample, P: Partition, fibers: FiberPartition | None,
                   alpha_F: ElementSet, beta_F: ElementSet, eps: float, delta: float = 0.05,
                   tol: float = 0.1) -> dict:
    """Castle entropy per unit mass under two cocycles of the same relation.

    Castles come from the greedy tiling by ``alpha_F`` (for ``sample``) and
    ``beta_F`` (for ``beta_sample``).  With ``fibers=None`` each castle is
    measured against its own shape fibers.  Passes when the relative gap is
    within ``tol``.
    """
    if len(sample) != len(beta_sample) or not np.array_equal(sample.classes, beta_sample.classes):
        raise EntropyError("both cocycles must live on the same relation")
    for name, s in (("alpha", sample), ("beta", beta_sample)):
        U = ElementSet(s.group, [s.group.identity])
        rep = validate(s, U)
        if not rep.ok:
            raise EntropyError(f"{name} cocycle fails validation: {rep.failed()[0].name}")
    out = {}
    for name, s, F in (("alpha", sample, alpha_F), ("beta", beta_sample, beta_F)):
        castle = tiling_castle(s, F, delta)
        cov = castle.range_measure()
        if not cov > 1 - eps:
            raise EntropyError(f"{name} castles cover {cov:.6g}, which must exceed 1 - eps = {1 - eps:.6g}")
        fib = shape_fibers(castle) if fibers is None else fibers
        val = castle_entropy_upper(P, castle, eps, fib)
        out[name] = {"estimate": per_unit(val, castle), "coverage": cov,
                     "mean_tower": float(castle.sizes.mean()) if castle.sizes.size else 0.0}
    a, b = out["alpha"]["estimate"], out["beta"]["estimate"]
    scale = max(abs(a), abs(b))
    gap = abs(a - b) / scale if scale > 0 else 0.0
    out.update({"gap": gap, "ok": bool(gap <= tol), "tol": tol})
    return out


# ----------------------------------------------------------------------
# fattening
# ----------------------------------------------------------------------

def fatten(P: Partition, sample: SectionSample, U: ElementSet) -> np.ndarray:
    """U-fattening of P onto the sampled window, one row per class.

    Entry ``[r, j]`` is ``P(s)`` when window point j equals ``u g_s`` for a
    section point s of the r-th class and u in U, and ``P.k`` otherwise.

    Raises
    ------
    EntropyError
        If two translates ``u s`` land on the same window point.
    """
    W = sample.window
    if W is None:
        raise EntropyError("the sample carries no window")
    G = sample.group
    out = np.full((sample.class_ids.shape[0], len(W)), P.k, dtype=np.int64)
    hit = np.zeros_like(out, dtype=bool)
    for r, c in enumerate(sample.class_ids):
        mem = sample.members(int(c))
        for u in U.points:
            q = G.mul_arrays(u[None], sample.positions[mem])
            j = W.index_of(q)
            ok = j >= 0
            if np.any(hit[r, j[ok]]) or np.unique(j[ok]).shape[0] != int(ok.sum()):
                raise EntropyError("U-translates of the section overlap")
            hit[r, j[ok]] = True
            out[r, j[ok]] = P.labels[mem[ok]]
    return out
