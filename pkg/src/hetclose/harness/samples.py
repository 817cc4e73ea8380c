"""Closed-form sample sizes for every model, scaled by a constant multiplier."""

from __future__ import annotations

import math

from hetclose.central import min_group2_size
from hetclose.shuffle import compressed_domain_size, mixture_params, poisson_mu

MODELS = ("local-private", "local-public", "shuffle-private", "shuffle-public", "central")


def _check(model, k, alpha, eps1, eps2, delta, multiplier):
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    for name, eps in (("eps1", eps1), ("eps2", eps2)):
        if not 0 < eps <= 1:
            raise ValueError(f"{name} must lie in (0, 1], got {eps}")
    if eps2 > eps1:
        raise ValueError("expected eps2 <= eps1 (relabel the groups)")
    if model.startswith("shuffle") and not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not multiplier > 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")


def base_rate(model: str, k: int, alpha: float, eps1: float, eps2: float, delta: float) -> float:
    """Group-1 sample size before the constant multiplier."""
    if model == "local-private":
        return k**1.5 / (alpha**2 * eps1**2)
    if model == "local-public":
        return k / (alpha**2 * eps1**2)
    if model == "shuffle-private":
        log_d = math.log(1 / delta)
        tail = min(
            eps1**2 * eps2**2 / (alpha**4 * log_d**2),
            k ** (2 / 3) / alpha ** (4 / 3) * (eps2 / eps1) ** (2 / 3),
        )
        return math.sqrt(k) / alpha**2 + k**0.75 * math.sqrt(log_d) / (alpha * eps1) + tail
    if model == "shuffle-public":
        log_d = math.log(1 / delta)
        return (
            math.sqrt(k) / alpha**2
            + k ** (2 / 3) / (alpha ** (4 / 3) * eps1 ** (2 / 3)) * log_d ** (1 / 3)
            + math.sqrt(k) / (alpha * eps1) * math.sqrt(log_d)
        )
    return max(
        math.sqrt(k) / alpha**2,
        math.sqrt(k) / (math.sqrt(eps1) * alpha),
        k ** (2 / 3) / alpha ** (4 / 3),
        k ** (1 / 3) / (eps1 ** (2 / 3) * alpha ** (4 / 3)),
        1 / (eps1 * alpha),
    )


def shuffle_domain(model: str, k: int, alpha: float, eps1: float, delta: float) -> int:
    """Domain size seen by the shufflers (compressed for the public-coin variant)."""
    if model == "shuffle-public":
        return compressed_domain_size(k, alpha, poisson_mu(eps1, delta))
    return k


def required_samples(
    model: str, k: int, alpha: float, eps1: float, eps2: float, delta: float = 1e-6, multiplier: float = 1.0
) -> tuple[int, int]:
    """Group sizes ``(n1, n2)`` for ``model``.

    Local models size each group independently with its own epsilon. Shuffle
    models couple ``n2`` to ``n1`` through the noise ratio ``mu2/mu1``, rounding
    both so the mixture weights match exactly. The central model picks the
    smallest ``n2`` whose subsampling amplification reaches ``eps2``.

    Example:
        >>> required_samples("local-private", 8, 0.5, 1.0, 1.0)
        (91, 91)
    """
    _check(model, k, alpha, eps1, eps2, delta, multiplier)
    n1 = math.ceil(multiplier * base_rate(model, k, alpha, eps1, eps2, delta))
    if model.startswith("local"):
        n2 = math.ceil(multiplier * base_rate(model, k, alpha, eps2, eps2, delta))
        return n1, n2
    if model.startswith("shuffle"):
        mp = mixture_params(shuffle_domain(model, k, alpha, eps1, delta), n1, eps1, eps2, delta)
        return mp.n1, mp.n2
    return n1, min_group2_size(eps1, eps2, n1)


def predicted_n2_factor(model: str, eps1: float, eps2: float, delta: float = 1e-6) -> float:
    """Factor by which ``n2`` should grow when ``eps2`` is halved."""
    if model.startswith("local"):
        return 4.0
    if model.startswith("shuffle"):
        return poisson_mu(eps2 / 2, delta) / poisson_mu(eps2, delta)
    return math.expm1(eps2) / math.expm1(eps2 / 2)
