"""Random-stream helpers: splittable counter-based generators and fast uniforms.

All randomized routines take a ``numpy.random.Generator``. Replications derive
independent substreams with ``Generator.spawn`` (SeedSequence-backed, so results
do not depend on execution order), and hot loops pull uniforms from prefetched
blocks to amortize the per-call overhead.
"""

from __future__ import annotations

import numpy as np


def master_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator for a 64-bit master seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent stream addressed by (seed, path), e.g. (master, replication)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


class Uniforms:
    """Scalar uniforms drawn in blocks from one generator.

    ``next()`` costs a list pop in the common case; the block size trades a
    little memory for far fewer Generator calls in tight sampling loops.
    """

    __slots__ = ("_rng", "_block", "_buf")

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf: list[float] = []

    def next(self) -> float:
        if not self._buf:
            self._buf = self._rng.random(self._block).tolist()
        return self._buf.pop()
