"""Seeded randomness shared by every protocol and the Monte Carlo harness.

Each trial draws from its own substream, identified by ``(seed, stream_id)``,
so trial-level parallelism never changes results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Rng:
    """A reproducible random stream.

    Identical ``(seed, stream_id)`` pairs yield identical draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_id < 0:
            raise ValueError(f"stream_id must be nonnegative, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng: Rng | np.random.Generator | int | None) -> np.random.Generator:
    """Coerce an ``Rng``, a seed or an existing generator into a generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Rng):
        return rng.generator()
    if rng is None:
        return np.random.default_rng()
    return Rng(int(rng)).generator()


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``rng`` into ``n`` independent child generators."""
    return [np.random.Generator(bg) for bg in rng.bit_generator.spawn(n)]


def trial_generator(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Generator for trial ``index`` of a given ``purpose`` under ``seed``.

    Depends only on its arguments, so trials can run in any order or process.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(purpose, index))
    return np.random.Generator(np.random.PCG64(ss))
