"""Discrete distributions, samples, distances and repeat-and-vote.

Symbols are 0-based throughout: a distribution over ``k`` symbols draws
values in ``range(k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from hetclose.rng import Rng, as_generator, spawn

PMF_ATOL = 1e-12

FAMILIES = ("uniform", "paninski-far", "zipf", "two-spike")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability mass function over ``range(k)``.

    Invalid vectors are rejected, never renormalised.
    """

    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1:
            raise ValueError("pmf must be one-dimensional")
        if pmf.size < 2:
            raise ValueError(f"domain size must be at least 2, got {pmf.size}")
        if not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
            raise ValueError("pmf entries must be finite and nonnegative")
        total = float(pmf.sum())
        if abs(total - 1.0) > PMF_ATOL:
            raise ValueError(f"pmf sums to {total!r}, not 1")
        object.__setattr__(self, "pmf", _frozen(pmf))

    @property
    def k(self) -> int:
        return int(self.pmf.size)

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, symbol: int) -> "Distribution":
        pmf = np.zeros(k)
        pmf[symbol] = 1.0
        return cls(pmf)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.k == other.k and bool(np.array_equal(self.pmf, other.pmf))

    def __hash__(self):
        return hash(self.pmf.tobytes())

    def __repr__(self):
        return f"Distribution(k={self.k}, pmf={np.array2string(self.pmf, precision=4)})"


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def pure(self) -> bool:
        return self.delta == 0


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Samples from one group: ``source`` is 1 for draws from p, 2 for q."""

    values: np.ndarray
    k: int
    source: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 1:
            raise ValueError("sample values must be one-dimensional")
        if values.size and (values.min() < 0 or values.max() >= self.k):
            raise ValueError(f"sample symbols must lie in range({self.k})")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self):
        return int(self.values.size)

    def histogram(self) -> "Histogram":
        return Histogram(np.bincount(self.values, minlength=self.k))


@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray
    total: int = field(default=-1)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or not np.issubdtype(counts.dtype, np.integer):
            counts = np.asarray(counts, dtype=float)
            if not np.all(counts == np.round(counts)):
                raise ValueError("histogram counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("histogram counts must be nonnegative")
        counts = counts.astype(np.int64)
        total = int(counts.sum())
        if self.total not in (-1, total):
            raise ValueError(f"total {self.total} does not match sum of counts {total}")
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "total", total)

    @property
    def k(self) -> int:
        return int(self.counts.size)


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of one test run.

    ``statistic`` and ``threshold`` are whatever the procedure compared; for
    repeat-and-vote they are the fraction of rejecting runs and 1/2.
    """

    __test__ = False  # not a pytest class

    accept: bool
    statistic: float = math.nan
    threshold: float = math.nan

    @property
    def reject(self) -> bool:
        return not self.accept


def sample(dist: Distribution, n: int, rng: Rng | np.random.Generator, source: int = 1) -> SampleSet:
    """Draw ``n`` i.i.d. symbols from ``dist``."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    gen = as_generator(rng)
    values = gen.choice(dist.k, size=n, p=dist.pmf) if n else np.empty(0, dtype=np.int64)
    return SampleSet(values, dist.k, source)


def poisson_sample_count(n: float, rng: Rng | np.random.Generator) -> int:
    """Draw from Poisson(n).

    numpy uses inversion below mean 10 and transformed rejection above it.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return int(as_generator(rng).poisson(n))


def _check_same_k(p: Distribution, q: Distribution):
    if p.k != q.k:
        raise ValueError(f"dimension mismatch: {p.k} vs {q.k}")


def tv_distance(p: Distribution, q: Distribution) -> float:
    _check_same_k(p, q)
    return 0.5 * float(np.abs(p.pmf - q.pmf).sum())


def l2_distance_sq(u, v) -> float:
    """Squared Euclidean distance between vectors or distributions."""
    u = np.asarray(u.pmf if isinstance(u, Distribution) else u, dtype=float)
    v = np.asarray(v.pmf if isinstance(v, Distribution) else v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.sum((u - v) ** 2))


def make_family(kind: str, k: int, alpha: float) -> tuple[Distribution, Distribution]:
    """Build a test instance ``(p, q)``.

    ``uniform`` gives two copies of the uniform distribution. The other kinds
    give pairs at total variation distance exactly ``alpha``:

    * ``paninski-far``: uniform vs. the alternating perturbation
      ``(1 + 2 alpha)/k, (1 - 2 alpha)/k, ...`` (needs even ``k``, ``alpha <= 1/2``).
    * ``two-spike``: ``(1 - alpha)`` uniform background plus an ``alpha`` spike
      on symbol 0 for p and on symbol 1 for q.
    * ``zipf``: Zipf(1) vs. its mixture with a point mass on the lightest
      symbol, weighted so the distance is ``alpha``.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if kind == "uniform":
        u = Distribution.uniform(k)
        return u, u
    if kind == "paninski-far":
        if k % 2:
            raise ValueError("paninski-far needs an even domain size")
        if alpha > 0.5:
            raise ValueError("paninski-far needs alpha <= 1/2")
        signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
        return Distribution.uniform(k), Distribution((1.0 + 2.0 * alpha * signs) / k)
    if kind == "two-spike":
        base = np.full(k, (1.0 - alpha) / k)
        p, q = base.copy(), base.copy()
        p[0] += alpha
        q[1] += alpha
        return Distribution(p), Distribution(q)
    if kind == "zipf":
        w = 1.0 / np.arange(1, k + 1)
        p = w / w.sum()
        gap = 1.0 - p[-1]
        if alpha > gap:
            raise ValueError(f"zipf family supports alpha <= {gap:.4f} at k={k}")
        lam = alpha / gap
        r = np.zeros(k)
        r[-1] = 1.0
        q = (1.0 - lam) * p + lam * r
        # exact mass balance keeps the distance at alpha to rounding
        q[-1] = 1.0 - q[:-1].sum()
        return Distribution(p), Distribution(q)
    raise ValueError(f"unknown family {kind!r}; expected one of {FAMILIES}")


def majority_repeat(
    test: Callable[[np.random.Generator], TestVerdict],
    t: int,
    rng: Rng | np.random.Generator,
) -> TestVerdict:
    """Run ``test`` ``t`` times on independent substreams and take the majority."""
    if t < 1 or t % 2 == 0:
        raise ValueError(f"t must be a positive odd integer, got {t}")
    rejects = sum(test(g).reject for g in spawn(as_generator(rng), t))
    return TestVerdict(accept=rejects * 2 < t, statistic=rejects / t, threshold=0.5)
