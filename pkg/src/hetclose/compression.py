"""Random-partition domain compression for the public-coin protocols."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from hetclose.dist import Distribution, SampleSet, tv_distance
from hetclose.rng import Rng, as_generator


@dataclass(frozen=True, eq=False)
class Partition:
    """Map from ``range(k)`` onto ``range(parts)``; empty parts are allowed."""

    k: int
    parts: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (self.k,):
            raise ValueError(f"assignment must have length k={self.k}")
        if not 2 <= self.parts <= self.k:
            raise ValueError(f"parts must lie in [2, {self.k}], got {self.parts}")
        if a.min() < 0 or a.max() >= self.parts:
            raise ValueError("assignment entries out of range")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.parts == other.parts and np.array_equal(self.assignment, other.assignment)

    def to_json(self) -> str:
        return json.dumps({"parts": self.parts, "assignment": self.assignment.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        obj = json.loads(text)
        if isinstance(obj, list):
            assignment = obj
            parts = max(2, max(assignment) + 1)
        else:
            assignment, parts = obj["assignment"], obj["parts"]
        return cls(len(assignment), parts, np.asarray(assignment))


def random_partition(k: int, parts: int, rng: Rng | np.random.Generator) -> Partition:
    """Assign each symbol independently to a uniformly random part."""
    if not 2 <= parts <= k:
        raise ValueError(f"parts must lie in [2, {k}], got {parts}")
    return Partition(k, parts, as_generator(rng).integers(0, parts, size=k))


def induce(p: Distribution, pi: Partition) -> Distribution:
    """Pushforward of ``p`` through the partition: mass of each part."""
    if p.k != pi.k:
        raise ValueError(f"dimension mismatch: {p.k} vs {pi.k}")
    return Distribution(np.bincount(pi.assignment, weights=p.pmf, minlength=pi.parts))


def compress_samples(samples: SampleSet, pi: Partition) -> SampleSet:
    if samples.k != pi.k:
        raise ValueError(f"dimension mismatch: {samples.k} vs {pi.k}")
    return SampleSet(pi.assignment[samples.values], pi.parts, samples.source)


def shrinkage_constants(
    p: Distribution,
    q: Distribution,
    parts: int,
    n_partitions: int,
    rng: Rng | np.random.Generator,
    coverage: float = 0.5,
) -> tuple[float, float]:
    """Empirical ``(c1, c2)`` for the distance-shrinkage guarantee.

    ``c1`` is the largest constant such that a ``coverage`` fraction of random
    partitions keep ``TV(p_pi, q_pi) >= c1 * sqrt(parts/k) * TV(p, q)``; ``c2`` is
    the achieved fraction.
    """
    tv = tv_distance(p, q)
    if tv == 0:
        raise ValueError("shrinkage is undefined for identical distributions")
    gen = as_generator(rng)
    scale = math.sqrt(parts / p.k) * tv
    ratios = np.empty(n_partitions)
    for i in range(n_partitions):
        pi = random_partition(p.k, parts, gen)
        ratios[i] = tv_distance(induce(p, pi), induce(q, pi)) / scale
    c1 = float(np.quantile(ratios, 1.0 - coverage, method="lower"))
    c2 = float(np.mean(ratios >= c1))
    return c1, c2
