"""Seeded, splittable random number generation.

Every stochastic routine in this package takes an explicit ``SeededRng``.
A stream is identified by a single 64-bit seed; child streams are derived
by a counter-based mix of (seed, index), so record i of a dataset can be
regenerated from its stored seed alone, and workers can draw in parallel
without coordinating.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(seed: int, index: int) -> int:
    """Derive a child seed from (seed, index) with a splitmix64 finalizer."""
    if index < 0:
        raise ValueError(f"derivation index must be >= 0, got {index}")
    z = (int(seed) + _GOLDEN * (int(index) + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class SeededRng:
    """Deterministic pseudo-random stream backed by a Philox counter generator.

    The same seed always yields a bit-identical sample stream, and
    ``derive(index)`` produces statistically independent child streams for
    distinct indices.
    """

    __slots__ = ("seed", "generator")

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.Philox(key=seed))

    def derive(self, index: int) -> "SeededRng":
        """Independent child stream for the given index."""
        return SeededRng(mix64(self.seed, index))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"
