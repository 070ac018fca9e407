from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int], "CounterRNG"]


class CounterRNG:
    """Counter-based random stream (Philox) seeded by a SeedSequence.

    Normals come from the Box-Muller transform of the stream's uniforms, so a stream
    reproduces bit for bit on any platform with the same numpy.
    """

    def __init__(self, entropy: Union[int, Sequence[int]]) -> None:
        self.entropy = [int(entropy)] if np.ndim(entropy) == 0 else [int(e) for e in entropy]  # type: ignore
        self.generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.entropy)))

    @classmethod
    def for_replication(cls, master_seed: int, rep_index: int) -> CounterRNG:
        """Independent stream for replication rep_index, unaffected by execution order."""
        return cls([master_seed, rep_index])

    def uniform(self, size: int) -> np.ndarray:
        """Uniforms on [0, 1)."""
        return self.generator.random(size)

    def standard_normal(self, size: Union[int, Sequence[int]]) -> np.ndarray:
        shape = (size,) if np.ndim(size) == 0 else tuple(size)  # type: ignore
        count = int(np.prod(shape))
        half = (count + 1) // 2
        u1 = 1.0 - self.generator.random(half)  # (0, 1], keeps the log finite
        u2 = self.generator.random(half)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        normals = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
        return normals.reshape(shape)

    def choice(self, m: int, k: int) -> np.ndarray:
        """k distinct indices out of range(m), uniformly."""
        return self.generator.choice(m, size=k, replace=False)

    def signs(self, size: int) -> np.ndarray:
        return np.where(self.generator.random(size) < 0.5, -1.0, 1.0)


def as_rng(seed: Seed) -> CounterRNG:
    if isinstance(seed, CounterRNG):
        return seed
    return CounterRNG(seed)
