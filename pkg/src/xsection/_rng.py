"""Counter-based random streams.

Every stochastic routine draws from ``make_rng(seed, *stream)``: a Philox
generator keyed by a SeedSequence over the user seed and an integer path
naming the sub-stream.  Shards and scales get their own path, so outputs do
not depend on how work is scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np


def _word(label) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode())
    v = int(label)
    if v < 0:
        raise ValueError("stream labels must be nonnegative")
    return v


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Philox generator for ``seed`` on the named sub-stream."""
    if seed is None:
        raise ValueError("a seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence([seed, *(_word(s) for s in stream)])
    return np.random.Generator(np.random.Philox(ss))
