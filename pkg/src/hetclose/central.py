"""Central-model closeness testing with a sigmoid-privatised verdict.

A trusted analyzer sees raw samples. It computes an absolute-difference
statistic over two halves of each group, shifts it and draws the verdict from
a logistic coin. Group 2 gets the stronger guarantee by subsampling: only
``n1`` of its ``n2`` samples ever reach the core tester.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hetclose import kernels
from hetclose.dist import Distribution, Histogram, SampleSet, TestVerdict, sample
from hetclose.rng import Rng, as_generator

# Largest change of the statistic when one sample is replaced by another.
REPLACE_SENSITIVITY = 4
# Largest change when one sample is added or removed.
ADD_REMOVE_SENSITIVITY = 2


def central_statistic(x: Histogram, x2: Histogram, y: Histogram, y2: Histogram) -> int:
    """Sum over bins of ``|X-Y| + |X'-Y'| - |X-X'| - |Y-Y'|``."""
    k = x.k
    if not (x2.k == y.k == y2.k == k):
        raise ValueError(f"dimension mismatch: {[h.k for h in (x, x2, y, y2)]}")
    return int(kernels.central_z(x.counts, x2.counts, y.counts, y2.counts))


def _as_counts(h) -> np.ndarray:
    return np.asarray(h.counts if isinstance(h, Histogram) else h, dtype=np.int64)


def sensitivity_check(x, x2, y, y2, adjacency: str = "replace") -> int:
    """Largest ``|dZ|`` over all single-sample changes to one of the histograms.

    ``adjacency="replace"`` moves one unit of count between every ordered pair
    of symbols inside one histogram. ``"add-remove"`` adds or removes one unit
    in any bin.
    """
    h = [_as_counts(a) for a in (x, x2, y, y2)]
    k = h[0].size
    if any(a.shape != (k,) for a in h):
        raise ValueError("dimension mismatch")
    if adjacency == "replace":
        return int(kernels.max_sensitivity(*h))
    if adjacency != "add-remove":
        raise ValueError(f"unknown adjacency {adjacency!r}")
    base = int(kernels.central_z(*h))
    best = 0
    for which in range(4):
        for i in range(k):
            for step in (1, -1):
                if h[which][i] + step < 0:
                    continue
                moved = [a.copy() for a in h]
                moved[which][i] += step
                best = max(best, abs(int(kernels.central_z(*moved)) - base))
    return best


def sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@dataclass(frozen=True)
class CentralStatistic:
    """Raw statistic, its shifted value and the probability of rejecting."""

    z: int
    z_shifted: float
    reject_prob: float

    @property
    def accept_prob(self) -> float:
        return 1.0 - self.reject_prob


def shift(z: float, n: float, eps: float, C1: float, C2: float, sensitivity: float = REPLACE_SENSITIVITY) -> float:
    """``(z - C1 sqrt(n) - C2/eps) / sensitivity``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return (z - C1 * math.sqrt(n) - C2 / eps) / sensitivity


def privatize(z: int, n: float, eps: float, C1: float, C2: float, sensitivity: float = REPLACE_SENSITIVITY) -> CentralStatistic:
    zs = shift(z, n, eps, C1, C2, sensitivity)
    return CentralStatistic(int(z), zs, sigmoid(eps * zs))


def privatized_verdict(
    z: int,
    n: float,
    eps: float,
    C1: float,
    C2: float,
    rng: Rng | np.random.Generator,
    sensitivity: float = REPLACE_SENSITIVITY,
) -> TestVerdict:
    """Reject with probability ``sigmoid(eps * z')``.

    With the default divisor the verdict is ``eps``-DP under replace-one
    adjacency. ``sensitivity=2`` gives the divisor that is only valid under
    add/remove adjacency.
    """
    stat = privatize(z, n, eps, C1, C2, sensitivity)
    reject = as_generator(rng).random() < stat.reject_prob
    return TestVerdict(not reject, stat.z_shifted, 0.0)


def subsample(samples: SampleSet, m: int, rng: Rng | np.random.Generator) -> SampleSet:
    """Uniform ``m``-subset of the samples, without replacement."""
    if m < 0 or m > len(samples):
        raise ValueError(f"cannot draw {m} of {len(samples)} samples")
    idx = as_generator(rng).choice(len(samples), size=m, replace=False)
    return SampleSet(samples.values[idx], samples.k, samples.source)


def amplified_epsilon(eps1: float, n1: int, n2: int) -> float:
    """``ln(1 + (n1/n2)(e^eps1 - 1))``: privacy of running on an n1-of-n2 subsample."""
    if n1 > n2:
        raise ValueError(f"n1={n1} exceeds n2={n2}")
    if n1 < 0 or n2 <= 0:
        raise ValueError("sample counts must be positive")
    return math.log1p(n1 / n2 * math.expm1(eps1))


def amplified_delta(delta1: float, n1: int, n2: int) -> float:
    if n1 > n2:
        raise ValueError(f"n1={n1} exceeds n2={n2}")
    return n1 / n2 * delta1


def min_group2_size(eps1: float, eps2: float, n1: int) -> int:
    """Smallest ``n2 >= n1`` with ``amplified_epsilon(eps1, n1, n2) <= eps2``."""
    if not 0 < eps2 <= eps1:
        raise ValueError("need 0 < eps2 <= eps1")
    n2 = max(n1, math.ceil(n1 * math.expm1(eps1) / math.expm1(eps2)))
    # guard against rounding in the closed form
    while n2 > n1 and amplified_epsilon(eps1, n1, n2 - 1) <= eps2:
        n2 -= 1
    while amplified_epsilon(eps1, n1, n2) > eps2:
        n2 += 1
    return n2


@dataclass(frozen=True)
class CentralConfig:
    """Central protocol parameters; ``C1``, ``C2`` come from calibration."""

    k: int
    alpha: float
    eps1: float
    eps2: float
    n1: int
    n2: int
    C1: float
    C2: float
    seed: int | None = None
    sensitivity: float = REPLACE_SENSITIVITY

    def __post_init__(self):
        if not 0 < self.eps2 <= self.eps1:
            raise ValueError("need 0 < eps2 <= eps1")
        if self.n1 < 2:
            raise ValueError("n1 must be at least 2 so each group splits in halves")
        if self.n2 < self.n1:
            raise ValueError(f"n2={self.n2} is below n1={self.n1}")
        if amplified_epsilon(self.eps1, self.n1, self.n2) > self.eps2 + 1e-12:
            raise ValueError(
                f"subsampling gives eps {amplified_epsilon(self.eps1, self.n1, self.n2):.4f} > eps2={self.eps2}"
            )

    @classmethod
    def minimal(cls, k, alpha, eps1, eps2, n1, C1, C2, **kw) -> "CentralConfig":
        return cls(k, alpha, eps1, eps2, n1, min_group2_size(eps1, eps2, n1), C1, C2, **kw)


def _halves(s: SampleSet) -> tuple[Histogram, Histogram]:
    h = len(s) // 2
    a = SampleSet(s.values[:h], s.k, s.source).histogram()
    b = SampleSet(s.values[h : 2 * h], s.k, s.source).histogram()
    return a, b


def central_raw_statistic(config: CentralConfig, p: Distribution, q: Distribution, rng) -> int:
    """Draw both groups, subsample group 2 to ``n1`` and return the statistic."""
    gen = as_generator(rng)
    sp = sample(p, config.n1, gen, source=1)
    sq = subsample(sample(q, config.n2, gen, source=2), config.n1, gen)
    x, x2 = _halves(sp)
    y, y2 = _halves(sq)
    return central_statistic(x, x2, y, y2)


def run_central(config: CentralConfig, p: Distribution, q: Distribution, rng: Rng | np.random.Generator) -> TestVerdict:
    if p.k != config.k or q.k != config.k:
        raise ValueError("distribution domain does not match config.k")
    gen = as_generator(rng)
    z = central_raw_statistic(config, p, q, gen)
    return privatized_verdict(z, config.n1, config.eps1, config.C1, config.C2, gen, config.sensitivity)


def null_reject_rate(z_null: np.ndarray, n: float, eps: float, C1: float, C2: float, sensitivity: float = REPLACE_SENSITIVITY) -> float:
    """Mean sigmoid reject probability over simulated null statistics."""
    t = eps * (np.asarray(z_null, dtype=float) - C1 * math.sqrt(n) - C2 / eps) / sensitivity
    return float(np.mean(0.5 * (1.0 + np.tanh(t / 2))))


def fit_c2(z_null: np.ndarray, n: float, eps: float, C1: float, target: float = 1 / 3,
           sensitivity: float = REPLACE_SENSITIVITY, tol: float = 1e-6) -> float:
    """Smallest ``C2 >= 0`` whose mean null reject probability is at most ``target``."""
    if null_reject_rate(z_null, n, eps, C1, 0.0, sensitivity) <= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while null_reject_rate(z_null, n, eps, C1, hi, sensitivity) > target:
        hi *= 2
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if null_reject_rate(z_null, n, eps, C1, mid, sensitivity) > target:
            lo = mid
        else:
            hi = mid
    return hi
