"""Local-model closeness testing via Hadamard response.

Each user holds one sample, is assigned to one of ``K`` Hadamard columns, and
sends a single randomized-response bit saying whether its sample lies in that
column's +1 set. Bits are in {0, 1} throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from hetclose import kernels
from hetclose.compression import compress_samples, random_partition
from hetclose.dist import Distribution, SampleSet, TestVerdict, majority_repeat, sample
from hetclose.rng import Rng, as_generator

MAX_ORDER = 2**16


def hadamard_order(k: int) -> int:
    """Smallest power of two that is at least ``k + 1``."""
    return 1 << math.ceil(math.log2(k + 1))


@dataclass(frozen=True)
class HadamardDesign:
    """Sylvester Hadamard matrix of order ``K`` for a domain of size ``k``.

    Entries are never stored: ``H[x, j] = +1`` iff ``popcount(x & j)`` is even.
    Column 0 is the all-ones column.
    """

    k: int
    K: int

    def column_set(self, j: int) -> np.ndarray:
        """Rows (0-based) holding +1 in column ``j``."""
        rows = np.arange(self.K)
        return rows[kernels.hadamard_bits(rows, np.full(self.K, j)) == 1]

    @property
    def column_sets(self) -> list[np.ndarray]:
        return [self.column_set(j) for j in range(self.K)]

    def column_masses(self, p: Distribution) -> np.ndarray:
        """``p(C_j)`` for every column, via the fast Walsh-Hadamard transform."""
        if p.k != self.k:
            raise ValueError(f"dimension mismatch: {p.k} vs {self.k}")
        return 0.5 * (1.0 + fwht(np.pad(p.pmf, (0, self.K - self.k))))


def build_design(k: int) -> HadamardDesign:
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    K = hadamard_order(k)
    if K > MAX_ORDER:
        raise ValueError(f"Hadamard order {K} exceeds the supported maximum {MAX_ORDER}")
    return HadamardDesign(k, K)


def fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform in Sylvester order."""
    a = np.array(v, dtype=float)
    n = a.size
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1).reshape(n)
        h *= 2
    return a


def parseval_gap(design: HadamardDesign, p: Distribution, q: Distribution) -> float:
    """Sum over all ``K`` columns of ``(p(C_j) - q(C_j))**2``.

    Equals ``K/4 * ||p - q||_2**2``.
    """
    if p.k != q.k:
        raise ValueError(f"dimension mismatch: {p.k} vs {q.k}")
    d = design.column_masses(p) - design.column_masses(q)
    return float(d @ d)


# -- randomized response ----------------------------------------------------


def flip_probability(eps: float) -> float:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return 1.0 / (math.exp(eps) + 1.0)


def rr_flip(bit: int, eps: float, rng: Rng | np.random.Generator) -> int:
    """Keep ``bit`` with probability e^eps/(e^eps+1), otherwise flip it."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    return bit ^ int(as_generator(rng).random() < flip_probability(eps))


def randomized_response(bits: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(np.shape(bits)) < flip_probability(eps)
    return (np.asarray(bits, dtype=np.uint8) ^ flips).astype(np.uint8)


def rr_channel(eps: float) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
    """The 2x2 channel ``P[out | in]`` in exact rational arithmetic.

    Entries are rational functions of ``t = e^eps``, with ``t`` taken as the
    exact binary value of ``math.exp(eps)``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = Fraction(math.exp(eps))
    keep, flip = t / (t + 1), 1 / (t + 1)
    return (keep, flip), (flip, keep)


def channel_ratio(eps: float) -> Fraction:
    """Worst-case likelihood ratio of the channel over outputs and input pairs."""
    ch = rr_channel(eps)
    return max(ch[a][o] / ch[b][o] for a in (0, 1) for b in (0, 1) for o in (0, 1))


# -- encoding ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """Rows are product-Bernoulli samples of dimension ``K``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError("bit matrix must be two-dimensional")
        if b.size and not ((b == 0) | (b == 1)).all():
            raise ValueError("bit matrix entries must be 0 or 1")
        b = b.astype(np.uint8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    def mean(self) -> np.ndarray:
        return self.bits.mean(axis=0)

    def split(self) -> tuple["BitMatrix", "BitMatrix"]:
        """First and second halves of equal size (an odd last row is dropped)."""
        h = self.rows // 2
        return BitMatrix(self.bits[:h]), BitMatrix(self.bits[h : 2 * h])


def encode_users(
    samples: SampleSet,
    design: HadamardDesign,
    eps: float,
    rng: Rng | np.random.Generator,
) -> BitMatrix:
    """Privatise users' samples into ``floor(n/K)`` rows of ``K`` bits.

    User ``j*m + r`` belongs to group ``j`` and contributes entry ``(r, j)``;
    the ``n mod K`` leftover users are discarded.
    """
    if samples.k != design.k:
        raise ValueError(f"dimension mismatch: {samples.k} vs {design.k}")
    m = len(samples) // design.K
    if m < 1:
        raise ValueError(f"need at least K={design.K} users, got {len(samples)}")
    users = samples.values[: m * design.K].reshape(design.K, m).T
    columns = np.broadcast_to(np.arange(design.K), users.shape)
    clean = kernels.hadamard_bits(users, columns)
    return BitMatrix(randomized_response(clean, eps, as_generator(rng)))


# -- statistics ---------------------------------------------------------------


def _check_dims(*mats: BitMatrix):
    if len({m.cols for m in mats}) != 1:
        raise ValueError("dimension mismatch between bit matrices")


def z1_statistic(x: BitMatrix, x2: BitMatrix, y: BitMatrix, y2: BitMatrix) -> float:
    """``<mean(x) - mean(y), mean(x2) - mean(y2)>``."""
    _check_dims(x, x2, y, y2)
    return float((x.mean() - y.mean()) @ (x2.mean() - y2.mean()))


def z1_rows_needed(d: int, alpha: float) -> int:
    return math.ceil(100 * math.sqrt(d) / alpha**2)


def z1_test(p_rows: BitMatrix, q_rows: BitMatrix, alpha: float, n: int | None = None) -> TestVerdict:
    """Non-private product-distribution closeness test.

    Each group supplies ``2n`` rows, ``n`` defaulting to ``100 sqrt(d)/alpha**2``.
    """
    _check_dims(p_rows, q_rows)
    if n is None:
        n = z1_rows_needed(p_rows.cols, alpha)
    if p_rows.rows < 2 * n or q_rows.rows < 2 * n:
        raise ValueError(f"need {2 * n} rows per group, got {p_rows.rows} and {q_rows.rows}")
    x, x2 = BitMatrix(p_rows.bits[:n]), BitMatrix(p_rows.bits[n : 2 * n])
    y, y2 = BitMatrix(q_rows.bits[:n]), BitMatrix(q_rows.bits[n : 2 * n])
    z = z1_statistic(x, x2, y, y2)
    threshold = alpha**2 / 2
    return TestVerdict(z <= threshold, z, threshold)


def debias_factor(eps: float) -> float:
    """``(e^eps + 1)/(e^eps - 1)``, inverting the randomized-response contraction."""
    return (math.exp(eps) + 1.0) / math.expm1(eps)


def debiased_means(x: BitMatrix, eps: float) -> np.ndarray:
    """Unbiased estimate of the clean column masses ``p(C_j)``."""
    return debias_factor(eps) * (x.mean() - flip_probability(eps))


def z2_statistic(
    x: BitMatrix, x2: BitMatrix, y: BitMatrix, y2: BitMatrix, eps1: float, eps2: float
) -> float:
    """Debiased cross statistic for groups privatised at different levels."""
    _check_dims(x, x2, y, y2)
    g1, g2 = debias_factor(eps1), debias_factor(eps2)
    d = g1 * (x.mean() - 0.5) - g2 * (y.mean() - 0.5)
    d2 = g1 * (x2.mean() - 0.5) - g2 * (y2.mean() - 0.5)
    return float(d @ d2)


# -- protocols ------------------------------------------------------------------


@dataclass(frozen=True)
class LocalConfig:
    """Parameters of the local protocols.

    ``threshold`` defaults to ``alpha**2 / 2``. For the public-coin variant,
    ``n1``/``n2`` are users per repetition and the inner test runs at distance
    ``c1 * sqrt(L/k) * alpha`` on the compressed domain of size ``L``.
    """

    k: int
    alpha: float
    eps1: float
    eps2: float
    n1: int
    n2: int
    threshold: float | None = None
    public_coin: bool = False
    compressed_size: int = 2
    repetitions: int = 1
    c1: float = 1.0

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            eps = getattr(self, name)
            if not 0 < eps <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {eps}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError("repetitions must be a positive odd integer")
        domain = self.compressed_size if self.public_coin else self.k
        if self.public_coin and not 2 <= self.compressed_size <= self.k:
            raise ValueError(f"compressed_size must lie in [2, {self.k}]")
        K = hadamard_order(domain)
        for name in ("n1", "n2"):
            if getattr(self, name) < 2 * K:
                raise ValueError(f"{name}={getattr(self, name)} leaves fewer than two rows per group (K={K})")

    @property
    def compressed_alpha(self) -> float:
        return self.c1 * math.sqrt(self.compressed_size / self.k) * self.alpha

    @property
    def effective_threshold(self) -> float:
        if self.threshold is not None:
            return self.threshold
        a = self.compressed_alpha if self.public_coin else self.alpha
        return a**2 / 2


def local_statistic(
    samples_p: SampleSet, samples_q: SampleSet, eps1: float, eps2: float, rng: np.random.Generator
) -> float:
    """Encode both groups and return the heterogeneous statistic on their halves."""
    design = build_design(samples_p.k)
    x, x2 = encode_users(samples_p, design, eps1, rng).split()
    y, y2 = encode_users(samples_q, design, eps2, rng).split()
    return z2_statistic(x, x2, y, y2, eps1, eps2)


def local_private_statistic(config: LocalConfig, p: Distribution, q: Distribution, rng) -> float:
    gen = as_generator(rng)
    sp = sample(p, config.n1, gen, source=1)
    sq = sample(q, config.n2, gen, source=2)
    return local_statistic(sp, sq, config.eps1, config.eps2, gen)


def run_local_private_coin(
    config: LocalConfig, p: Distribution, q: Distribution, rng: Rng | np.random.Generator
) -> TestVerdict:
    if p.k != config.k or q.k != config.k:
        raise ValueError("distribution domain does not match config.k")
    z = local_private_statistic(config, p, q, rng)
    threshold = config.alpha**2 / 2 if config.threshold is None else config.threshold
    return TestVerdict(z <= threshold, z, threshold)


def local_public_statistic(config: LocalConfig, p: Distribution, q: Distribution, rng) -> float:
    """One repetition: fresh shared partition, fresh users, compressed statistic."""
    gen = as_generator(rng)
    pi = random_partition(config.k, config.compressed_size, gen)
    sp = compress_samples(sample(p, config.n1, gen, source=1), pi)
    sq = compress_samples(sample(q, config.n2, gen, source=2), pi)
    return local_statistic(sp, sq, config.eps1, config.eps2, gen)


def run_local_public_coin(
    config: LocalConfig, p: Distribution, q: Distribution, rng: Rng | np.random.Generator
) -> TestVerdict:
    if p.k != config.k or q.k != config.k:
        raise ValueError("distribution domain does not match config.k")
    threshold = config.effective_threshold

    def once(gen):
        z = local_public_statistic(config, p, q, gen)
        return TestVerdict(z <= threshold, z, threshold)

    return majority_repeat(once, config.repetitions, rng)
