"""Shuffle-model closeness testing with the distributed Poisson mechanism.

Each group reports through its own shuffler. Every symbol receives
Poisson(mu) decoy messages in aggregate, so the analyzer sees a histogram that
is distributed as ``N = n + k*mu`` Poissonised samples from the mixture
``(1 - gamma) p + gamma U``. Matching ``gamma`` across groups reduces private
closeness testing to a non-private test with unequal sample sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from hetclose import kernels
from hetclose.compression import induce, random_partition
from hetclose.dist import Distribution, Histogram, TestVerdict, majority_repeat
from hetclose.rng import Rng, as_generator


def poisson_mu_bound(eps: float, delta: float, sensitivity: int = 1) -> float:
    """Real-valued lower bound on the per-bin Poisson noise mean."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if sensitivity < 1:
        raise ValueError(f"sensitivity must be at least 1, got {sensitivity}")
    shrink = -math.expm1(-eps / sensitivity)
    return 16 * math.log(10 / delta) / shrink**2 + 2 * sensitivity / shrink


def poisson_mu(eps: float, delta: float, sensitivity: int = 1) -> int:
    """Smallest integer noise mean that makes the Poisson mechanism (eps, delta)-DP."""
    return math.ceil(poisson_mu_bound(eps, delta, sensitivity))


@dataclass(frozen=True)
class PoissonMechanismParams:
    eps: float
    delta: float
    sensitivity: int
    mu: int

    def __post_init__(self):
        if self.mu < poisson_mu_bound(self.eps, self.delta, self.sensitivity):
            raise ValueError(
                f"mu={self.mu} is below the privacy bound "
                f"{poisson_mu_bound(self.eps, self.delta, self.sensitivity):.3f}"
            )


@dataclass(frozen=True, eq=False)
class ShuffledHistogram:
    """Message counts per symbol: everything a shuffler reveals."""

    counts: np.ndarray
    group: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or np.any(c < 0):
            raise ValueError("counts must be a nonnegative integer vector")
        if self.group not in (1, 2):
            raise ValueError("group must be 1 or 2")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def to_json(self) -> str:
        return json.dumps(self.counts.tolist())

    @classmethod
    def from_json(cls, text: str, group: int) -> "ShuffledHistogram":
        counts = json.loads(text)
        if not isinstance(counts, list) or not all(isinstance(c, int) for c in counts):
            raise ValueError("expected a JSON array of integers")
        return cls(np.asarray(counts, dtype=np.int64), group)

    def as_histogram(self) -> Histogram:
        return Histogram(self.counts)


def simulate_shuffler(
    dist: Distribution,
    n: float,
    mu: float,
    rng: Rng | np.random.Generator,
    *,
    group: int = 1,
    poissonize: bool = True,
    per_user: bool = False,
) -> ShuffledHistogram:
    """Simulate one group's shuffler output.

    By default each bin is drawn independently as Poisson(n p_j + mu), which is
    the law of Poisson(n) users plus Poisson(mu) decoys per symbol. With
    ``poissonize=False`` exactly ``n`` users report. ``per_user=True`` (fixed
    ``n`` only) materialises every message: each user sends its sample and
    Poisson(mu/n) decoys per symbol, and the shuffler permutes the lot.
    """
    if n < 0 or mu < 0:
        raise ValueError("n and mu must be nonnegative")
    gen = as_generator(rng)
    k = dist.k
    if per_user:
        if poissonize:
            raise ValueError("the per-user message path needs a fixed user count")
        n = int(n)
        if n == 0:
            raise ValueError("the per-user message path needs at least one user")
        data = gen.choice(k, size=n, p=dist.pmf)
        decoys = gen.poisson(mu / n, size=(n, k))
        messages = np.concatenate([data, np.repeat(np.tile(np.arange(k), n), decoys.ravel())])
        gen.shuffle(messages)
        return ShuffledHistogram(np.bincount(messages, minlength=k), group)
    if poissonize:
        counts = gen.poisson(n * dist.pmf + mu)
    else:
        if n != int(n):
            raise ValueError("a fixed user count must be an integer")
        counts = gen.multinomial(int(n), dist.pmf) + gen.poisson(mu, size=k)
    return ShuffledHistogram(counts, group)


@dataclass(frozen=True)
class MixtureParams:
    """Coupled sample sizes and noise levels with equal mixture weights."""

    k: int
    n1: int
    n2: int
    mu1: int
    mu2: int

    def __post_init__(self):
        if self.n1 * self.mu2 != self.n2 * self.mu1:
            raise ValueError("mixture weights differ: n1*mu2 != n2*mu1")

    @property
    def N1(self) -> int:
        return self.n1 + self.k * self.mu1

    @property
    def N2(self) -> int:
        return self.n2 + self.k * self.mu2

    @property
    def gamma1(self) -> Fraction:
        return Fraction(self.k * self.mu1, self.N1)

    @property
    def gamma2(self) -> Fraction:
        return Fraction(self.k * self.mu2, self.N2)


def couple(n1: int, mu1: int, mu2: int) -> tuple[int, int, int]:
    """Smallest-cost integers ``(n1', n2, mu2')`` with ``n1'*mu2' == n2*mu1``.

    ``n1' >= n1`` and ``mu2' >= mu2``; raising ``mu2`` only adds noise, so
    privacy is kept. Among all candidates the one minimising ``n2`` wins, ties
    going to the smaller ``n1'``.
    """
    if n1 < 1 or mu1 < 1 or mu2 < 1:
        raise ValueError("n1, mu1 and mu2 must be positive")
    best = None
    for m2 in range(mu2, mu2 + mu1):
        step = mu1 // math.gcd(mu1, m2)
        cand_n1 = -(-n1 // step) * step
        cand_n2 = cand_n1 * m2 // mu1
        key = (cand_n2, cand_n1, m2)
        if best is None or key < best:
            best = key
    n2, n1_adj, m2 = best
    return n1_adj, n2, m2


def mixture_params(k: int, n1: int, eps1: float, eps2: float, delta: float, delta2: float | None = None) -> MixtureParams:
    """Noise levels for both groups and the coupled group-2 user count."""
    if eps2 > eps1:
        raise ValueError("expected eps2 <= eps1 (relabel the groups)")
    mu1 = poisson_mu(eps1, delta)
    mu2 = poisson_mu(eps2, delta if delta2 is None else delta2)
    if n1 < 1:
        raise ValueError(f"n1 must be positive, got {n1}")
    n1_adj, n2, mu2_adj = couple(n1, mu1, mu2)
    return MixtureParams(k, n1_adj, n2, mu1, mu2_adj)


def mixture(dist: Distribution, gamma: float) -> Distribution:
    """``(1 - gamma) dist + gamma U``."""
    return Distribution((1.0 - gamma) * dist.pmf + gamma / dist.k)


def uneven_closeness_statistic(x: Histogram, y: Histogram, N1: float, N2: float) -> float:
    """Sum over bins of ``((N2 X - N1 Y)^2 - N2^2 X - N1^2 Y) / (X + Y)``.

    Each numerator has expectation ``N1^2 N2^2 (p_i - q_i)^2`` when ``X`` and ``Y``
    are Poissonised histograms of sizes ``N1`` and ``N2``.
    """
    if N1 <= 0 or N2 <= 0:
        raise ValueError("N1 and N2 must be positive")
    if x.k != y.k:
        raise ValueError(f"dimension mismatch: {x.k} vs {y.k}")
    return float(kernels.uneven_stat(x.counts, y.counts, float(N1), float(N2)))


def bin_numerators(x: np.ndarray, y: np.ndarray, N1: float, N2: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (N2 * x - N1 * y) ** 2 - N2**2 * x - N1**2 * y


@dataclass(frozen=True)
class ShuffleConfig:
    """Shuffle protocol parameters.

    ``n1`` is the expected group-1 user count; ``n2`` (and the noise levels) come
    from :func:`mixture_params`. ``threshold`` must be calibrated before a run.
    For the public-coin variant ``n1``/``n2`` are per repetition.
    """

    k: int
    alpha: float
    eps1: float
    eps2: float
    delta: float
    n1: int
    threshold: float | None = None
    public_coin: bool = False
    compressed_size: int | None = None
    repetitions: int = 1
    delta2: float | None = None
    poissonize: bool = True

    def __post_init__(self):
        if not 0 < self.eps2 <= self.eps1:
            raise ValueError("need 0 < eps2 <= eps1")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError("repetitions must be a positive odd integer")
        if self.n1 < 1:
            raise ValueError("n1 must be positive")

    @property
    def domain(self) -> int:
        if not self.public_coin:
            return self.k
        if self.compressed_size is not None:
            return self.compressed_size
        return compressed_domain_size(self.k, self.alpha, poisson_mu(self.eps1, self.delta))

    @property
    def mixture(self) -> MixtureParams:
        return mixture_params(self.domain, self.n1, self.eps1, self.eps2, self.delta, self.delta2)


def compressed_domain_size(k: int, alpha: float, mu1: float) -> int:
    """``min(k, max(2, k^(2/3) / (alpha^(4/3) mu1^(2/3))))``, floored."""
    raw = k ** (2 / 3) / (alpha ** (4 / 3) * mu1 ** (2 / 3))
    return int(min(k, max(2, math.floor(raw))))


def shuffle_statistic(
    p: Distribution, q: Distribution, mp: MixtureParams, rng: np.random.Generator, poissonize: bool = True
) -> float:
    """Simulate both shufflers on ``p``, ``q`` and return the uneven statistic."""
    x = simulate_shuffler(p, mp.n1, mp.mu1, rng, group=1, poissonize=poissonize)
    y = simulate_shuffler(q, mp.n2, mp.mu2, rng, group=2, poissonize=poissonize)
    return uneven_closeness_statistic(x.as_histogram(), y.as_histogram(), mp.N1, mp.N2)


def _require_threshold(config: ShuffleConfig) -> float:
    if config.threshold is None:
        raise ValueError("shuffle threshold is not calibrated; run calibration first")
    return config.threshold


def run_shuffle_private_coin(
    config: ShuffleConfig, p: Distribution, q: Distribution, rng: Rng | np.random.Generator
) -> TestVerdict:
    if p.k != config.k or q.k != config.k:
        raise ValueError("distribution domain does not match config.k")
    threshold = _require_threshold(config)
    z = shuffle_statistic(p, q, config.mixture, as_generator(rng), config.poissonize)
    return TestVerdict(z <= threshold, z, threshold)


def shuffle_public_statistic(config: ShuffleConfig, p: Distribution, q: Distribution, rng) -> float:
    """One repetition: fresh shared partition, then the private-coin statistic on it."""
    gen = as_generator(rng)
    pi = random_partition(config.k, config.domain, gen)
    return shuffle_statistic(induce(p, pi), induce(q, pi), config.mixture, gen, config.poissonize)


def run_shuffle_public_coin(
    config: ShuffleConfig, p: Distribution, q: Distribution, rng: Rng | np.random.Generator
) -> TestVerdict:
    if p.k != config.k or q.k != config.k:
        raise ValueError("distribution domain does not match config.k")
    threshold = _require_threshold(config)

    def once(gen):
        z = shuffle_public_statistic(config, p, q, gen)
        return TestVerdict(z <= threshold, z, threshold)

    return majority_repeat(once, config.repetitions, rng)
