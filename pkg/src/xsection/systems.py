"""Symbolic systems with closed-form entropy.

Four kinds are supported:

* :class:`Bernoulli` i.i.d. fields on any group model,
* :class:`Markov` stationary chains on Z,
* :class:`Tower` discrete suspensions of a Z-system under an integer roof
  that depends on the current base symbol,
* :class:`Induced` first-return processes on a cylinder ``{x_0 in A}``.

All Z-systems expose ``sample_path(n, rng)``, which returns a stationary path
of length ``n`` as an int64 array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from ._rng import make_rng
from .group import ElementSet, GroupModel, Zd


class SystemError_(ValueError):
    """Invalid system parameters or an unsupported system/group pair."""


def shannon(p: np.ndarray) -> float:
    """Entropy in bits of a probability vector (zero entries ignored)."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@numba.njit(cache=True)
def _markov_walk(x0, cum, u):
    n = u.shape[0] + 1
    out = np.empty(n, dtype=np.int64)
    out[0] = x0
    k = cum.shape[1]
    for t in range(1, n):
        row = cum[out[t - 1]]
        v = u[t - 1]
        j = 0
        while j < k - 1 and v >= row[j]:
            j += 1
        out[t] = j
    return out


@dataclass(frozen=True)
class LabeledWindow:
    """A finite window of group elements with one symbol per element."""

    window: ElementSet
    labels: np.ndarray

    def label_of(self, x: np.ndarray) -> np.ndarray:
        idx = self.window.index_of(x)
        if np.any(idx < 0):
            raise SystemError_("query outside the sampled window")
        return self.labels[idx]


class SymbolicSystem:
    """Common interface; concrete kinds override the sampling hooks."""

    group: GroupModel
    kind: str

    @property
    def alphabet_size(self) -> int:
        raise NotImplementedError

    def marginal(self) -> np.ndarray:
        """Stationary one-site distribution."""
        raise NotImplementedError

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise SystemError_(f"{self.kind} has no Z-path sampler")

    def sample_window(self, window: ElementSet, seed: int) -> LabeledWindow:
        """Exact sample of the process over a finite window."""
        rng = make_rng(seed, "window")
        if window.group != self.group:
            raise SystemError_(f"{self.kind} acts on {self.group.name}, window is over {window.group.name}")
        if len(window) == 0:
            return LabeledWindow(window, np.zeros(0, dtype=np.int64))
        if isinstance(self, Bernoulli):
            labels = self.draw(len(window), rng)
            return LabeledWindow(window, labels)
        pts = window.points[:, 0]
        lo, hi = int(pts.min()), int(pts.max())
        path = self.sample_path(hi - lo + 1, rng)
        return LabeledWindow(window, path[pts - lo])

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Bernoulli(SymbolicSystem):
    probs: tuple
    group: GroupModel = field(default_factory=lambda: Zd(1))
    kind: str = "bernoulli"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise SystemError_("Bernoulli probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @property
    def alphabet_size(self) -> int:
        return len(self.probs)

    def marginal(self):
        return np.array(self.probs)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)

    def sample_path(self, n, rng):
        return self.draw(n, rng)

    def to_config(self):
        return {"kind": "bernoulli", "probs": list(self.probs)}


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Left Perron vector of a stochastic matrix, normalized to sum 1."""
    P = np.asarray(matrix, dtype=float)
    k = P.shape[0]
    # solve pi (P - I) = 0 with sum(pi) = 1 in least squares
    A = np.vstack([P.T - np.eye(k), np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


@dataclass(frozen=True, eq=False)
class Markov(SymbolicSystem):
    matrix: tuple
    group: GroupModel = field(default_factory=lambda: Zd(1))
    kind: str = "markov"

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise SystemError_("Markov matrix must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
            raise SystemError_("Markov matrix rows must be probability vectors")
        if self.group != Zd(1):
            raise SystemError_("Markov systems act on Z only")
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in P))

    @property
    def P(self) -> np.ndarray:
        return np.array(self.matrix)

    @property
    def stationary(self) -> np.ndarray:
        pi = stationary_distribution(self.P)
        if np.max(np.abs(pi @ self.P - pi)) > 1e-12:
            raise SystemError_("stationary vector does not satisfy pi P = pi")
        return pi

    @property
    def alphabet_size(self):
        return len(self.matrix)

    def marginal(self):
        return self.stationary

    def sample_path(self, n, rng):
        if n <= 0:
            return np.zeros(0, dtype=np.int64)
        pi = self.stationary
        cum0 = np.cumsum(pi)
        cum0[-1] = 1.0
        x0 = int(np.searchsorted(cum0, rng.random(), side="right"))
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        return _markov_walk(x0, cum, rng.random(n - 1))

    def to_config(self):
        return {"kind": "markov", "matrix": [list(r) for r in self.matrix]}


def symmetric_markov(stay: float, k: int = 2) -> Markov:
    """k-state chain that keeps its state with probability ``stay``."""
    off = (1 - stay) / (k - 1)
    P = np.full((k, k), off)
    np.fill_diagonal(P, stay)
    return Markov(tuple(map(tuple, P)))


def periodic(period: int) -> Markov:
    """Deterministic rotation on a cycle of the given length."""
    P = np.roll(np.eye(period), 1, axis=1)
    return Markov(tuple(map(tuple, P)))


@dataclass(frozen=True, eq=False)
class Tower(SymbolicSystem):
    """Discrete suspension: base symbol s is followed by roof[s] - 1 upper levels.

    Tower symbols enumerate the pairs (s, level) in lexicographic order.
    """

    base: SymbolicSystem
    roof: tuple
    kind: str = "tower"

    def __post_init__(self):
        r = tuple(int(v) for v in self.roof)
        if len(r) == 1 and self.base.alphabet_size > 1:
            r = r * self.base.alphabet_size
        if len(r) != self.base.alphabet_size:
            raise SystemError_("roof needs one value per base symbol")
        if min(r) < 1:
            raise SystemError_("roof must be >= 1 everywhere")
        if isinstance(self.base, (Tower, Induced)) or self.base.group != Zd(1):
            raise SystemError_("towers are built over Bernoulli or Markov Z-systems")
        object.__setattr__(self, "roof", r)

    @property
    def group(self):
        return Zd(1)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.roof)[:-1]]).astype(np.int64)

    @property
    def alphabet_size(self):
        return int(sum(self.roof))

    def mean_roof(self) -> float:
        return float(np.dot(self.base.marginal(), self.roof))

    def marginal(self):
        pi = self.base.marginal()
        out = np.concatenate([np.full(r, p) for p, r in zip(pi, self.roof)])
        return out / self.mean_roof()

    def level0_symbols(self) -> tuple:
        return tuple(int(v) for v in self.offsets)

    def sample_path(self, n, rng):
        roof = np.array(self.roof, dtype=np.int64)
        pi = self.base.marginal()
        w = pi * roof
        cum = np.cumsum(w / w.sum())
        cum[-1] = 1.0
        s0 = int(np.searchsorted(cum, rng.random(), side="right"))
        start = int(rng.integers(roof[s0]))
        m = n // int(roof.min()) + 2
        base = self._base_path_from(s0, m, rng)
        r = roof[base]
        sym = np.repeat(self.offsets[base], r) + (np.arange(r.sum()) - np.repeat(np.cumsum(r) - r, r))
        return sym[start:start + n].astype(np.int64)

    def _base_path_from(self, s0: int, m: int, rng) -> np.ndarray:
        if isinstance(self.base, Markov):
            cum = np.cumsum(self.base.P, axis=1)
            cum[:, -1] = 1.0
            return _markov_walk(s0, cum, rng.random(m - 1))
        rest = self.base.draw(m - 1, rng)
        return np.concatenate([[s0], rest]).astype(np.int64)

    def to_config(self):
        return {"kind": "tower", "base": self.base.to_config(), "roof": list(self.roof)}


@dataclass(frozen=True)
class ReturnStream:
    """Induced symbols (excursion words, integer-coded) and return times."""

    symbols: np.ndarray
    return_times: np.ndarray


@dataclass(frozen=True, eq=False)
class Induced(SymbolicSystem):
    """First-return process on the cylinder {x_0 in cylinder}.

    The induced symbol at a visit is the base word read from that visit up to
    (not including) the next one, so the induced process generates the same
    information as the base process restricted to visits.
    """

    base: SymbolicSystem
    cylinder: tuple
    kind: str = "induced"

    def __post_init__(self):
        cyl = tuple(sorted({int(s) for s in self.cylinder}))
        if not cyl or min(cyl) < 0 or max(cyl) >= self.base.alphabet_size:
            raise SystemError_("cylinder symbols must lie in the base alphabet")
        if isinstance(self.base, Induced) or self.base.group != Zd(1):
            raise SystemError_("inducing is supported over Bernoulli, Markov and tower Z-systems")
        if self.measure() <= 0:
            raise SystemError_("cylinder has probability 0")
        object.__setattr__(self, "cylinder", cyl)

    @property
    def group(self):
        return Zd(1)

    @property
    def alphabet_size(self):
        raise SystemError_("induced alphabets are countable; use the observed alphabet")

    def measure(self) -> float:
        return float(np.sum(self.base.marginal()[list(self.cylinder)]))

    def sample_returns(self, n_returns: int, rng: np.random.Generator) -> ReturnStream:
        """``n_returns`` consecutive excursions from a stationary start."""
        mu = self.measure()
        chunk = int(np.ceil((n_returns + 1) / mu * 1.2)) + 64
        path = self.base.sample_path(chunk, rng)
        hits = np.flatnonzero(np.isin(path, self.cylinder))
        while hits.shape[0] < n_returns + 1:
            chunk *= 2
            path = self.base.sample_path(chunk, rng)
            hits = np.flatnonzero(np.isin(path, self.cylinder))
        hits = hits[: n_returns + 1]
        rt = np.diff(hits)
        codes = _encode_words(path, hits, self.base.alphabet_size)
        return ReturnStream(codes, rt.astype(np.int64))

    def sample_path(self, n, rng):
        return self.sample_returns(n, rng).symbols

    def sample_window(self, window, seed):
        raise SystemError_("induced processes have no fixed alphabet window sampler")

    def to_config(self):
        return {"kind": "induced", "base": self.base.to_config(), "cylinder": list(self.cylinder)}


def _encode_words(path: np.ndarray, hits: np.ndarray, k: int) -> np.ndarray:
    """Integer ids for the words path[hits[i]:hits[i+1]], ordered by (length, content)."""
    starts, ends = hits[:-1], hits[1:]
    lengths = ends - starts
    seg = path[hits[0]:hits[-1]].astype(np.int64)
    owner = np.repeat(np.arange(starts.shape[0]), lengths)
    pos = np.arange(seg.shape[0]) - np.repeat(starts - hits[0], lengths)
    cap = max(1, int(62 // max(1.0, np.log2(max(k, 2)))))
    short = lengths <= cap
    code = np.zeros(starts.shape[0], dtype=np.int64)
    mask = pos < cap
    np.add.at(code, owner[mask], seg[mask] * (np.int64(k) ** pos[mask]))
    keys = np.stack([lengths, code], axis=1)
    out = np.empty(starts.shape[0], dtype=np.int64)
    if np.all(short):
        _, out[:] = np.unique(keys, axis=0, return_inverse=True)
        return out
    _, inv = np.unique(keys[short], axis=0, return_inverse=True)
    out[short] = inv
    nxt = int(inv.max()) + 1 if inv.size else 0
    table: dict = {}
    for i in np.flatnonzero(~short):
        w = tuple(path[starts[i]:ends[i]].tolist())
        if w not in table:
            table[w] = nxt + len(table)
        out[i] = table[w]
    return out


def induce(system: SymbolicSystem, cylinder: Sequence[int]) -> Induced:
    return Induced(system, tuple(cylinder))


def suspend(base: SymbolicSystem, roof) -> Tower:
    if np.isscalar(roof):
        roof = (int(roof),)
    return Tower(base, tuple(roof))


def analytic_entropy(system: SymbolicSystem) -> float:
    """Closed-form entropy in bits per group element."""
    if isinstance(system, Bernoulli):
        return shannon(np.array(system.probs))
    if isinstance(system, Markov):
        P = system.P
        pi = system.stationary
        return float(sum(pi[i] * shannon(P[i]) for i in range(P.shape[0])))
    if isinstance(system, Tower):
        return analytic_entropy(system.base) / system.mean_roof()
    if isinstance(system, Induced):
        return analytic_entropy(system.base) / system.measure()
    raise SystemError_(f"no closed form for {type(system).__name__}")


def parse_system(spec, group: GroupModel | None = None) -> SymbolicSystem:
    """Build a system from ``"bernoulli:0.3"``, ``"markov:0.9"``,
    ``"periodic:3"`` or a config mapping such as
    ``{"kind": "markov", "matrix": [[0.9, 0.1], [0.1, 0.9]]}``.
    """
    group = group or Zd(1)
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        kind = kind.strip().lower()
        vals = [float(v) for v in arg.split(",")] if arg else []
        if kind == "bernoulli":
            if len(vals) == 1:
                vals = [vals[0], 1 - vals[0]]
            return Bernoulli(tuple(vals), group)
        if kind == "markov":
            if len(vals) != 1:
                raise SystemError_("markov:<stay> takes one value")
            return symmetric_markov(vals[0])
        if kind == "periodic":
            return periodic(int(vals[0]))
        raise SystemError_(f"unknown system kind {kind!r}")
    kind = str(spec.get("kind", "")).lower()
    if kind == "bernoulli":
        if "probs" in spec:
            return Bernoulli(tuple(spec["probs"]), group)
        p = float(spec["p"])
        return Bernoulli((p, 1 - p), group)
    if kind == "markov":
        if "matrix" in spec:
            return Markov(tuple(map(tuple, spec["matrix"])))
        return symmetric_markov(float(spec["stay"]), int(spec.get("states", 2)))
    if kind == "periodic":
        return periodic(int(spec["period"]))
    if kind == "tower":
        return suspend(parse_system(spec["base"]), spec["roof"])
    if kind == "induced":
        return induce(parse_system(spec["base"]), spec["cylinder"])
    raise SystemError_(f"unknown system kind {kind!r}")
