"""Uniform wrapper around the five protocols for calibration and experiments."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from hetclose import central, hadamard, shuffle
from hetclose.dist import Distribution, TestVerdict, make_family
from hetclose.harness.samples import MODELS, required_samples, shuffle_domain

DEFAULT_REPETITIONS = 9
LOCAL_PUBLIC_PARTS = 2


@dataclass(frozen=True)
class GridPoint:
    """Problem parameters shared by every run at one point of a sweep."""

    model: str
    k: int
    alpha: float
    eps1: float
    eps2: float
    delta: float = 1e-6
    family: str = "two-spike"
    repetitions: int = DEFAULT_REPETITIONS

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.family == "uniform":
            raise ValueError("the far pair must differ; choose a non-uniform family")
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError("repetitions must be a positive odd integer")
        # fail early on bad parameters
        make_family(self.family, self.k, self.alpha)
        required_samples(self.model, self.k, self.alpha, self.eps1, self.eps2, self.delta, 1.0)

    def to_dict(self) -> dict:
        return asdict(self)

    def pairs(self) -> tuple[tuple[Distribution, Distribution], tuple[Distribution, Distribution]]:
        """``((U, U), (p, q))``: the null pair and the far pair."""
        u = Distribution.uniform(self.k)
        return (u, u), make_family(self.family, self.k, self.alpha)


# Names of the constants each model needs from calibration.
CONSTANTS = {
    "local-private": (),
    "local-public": ("threshold",),
    "shuffle-private": ("threshold",),
    "shuffle-public": ("threshold",),
    "central": ("C1", "C2"),
}


@dataclass(frozen=True)
class Protocol:
    """One model at one grid point and multiplier.

    ``statistic`` draws a single (per-repetition) test statistic; ``verdict``
    turns calibrated constants into a full run of the protocol.
    """

    point: GridPoint
    multiplier: float

    @property
    def sizes(self) -> tuple[int, int]:
        p = self.point
        return required_samples(p.model, p.k, p.alpha, p.eps1, p.eps2, p.delta, self.multiplier)

    def local_config(self, threshold=None) -> hadamard.LocalConfig:
        p = self.point
        n1, n2 = self.sizes
        public = p.model == "local-public"
        return hadamard.LocalConfig(
            p.k, p.alpha, p.eps1, p.eps2, n1, n2,
            threshold=threshold,
            public_coin=public,
            compressed_size=LOCAL_PUBLIC_PARTS,
            repetitions=p.repetitions if public else 1,
        )

    def shuffle_config(self, threshold=None) -> shuffle.ShuffleConfig:
        p = self.point
        public = p.model == "shuffle-public"
        return shuffle.ShuffleConfig(
            p.k, p.alpha, p.eps1, p.eps2, p.delta, self.sizes[0],
            threshold=threshold,
            public_coin=public,
            compressed_size=shuffle_domain(p.model, p.k, p.alpha, p.eps1, p.delta) if public else None,
            repetitions=p.repetitions if public else 1,
        )

    def central_config(self, C1=0.0, C2=0.0) -> central.CentralConfig:
        p = self.point
        n1, n2 = self.sizes
        return central.CentralConfig(p.k, p.alpha, p.eps1, p.eps2, n1, n2, C1, C2)

    def statistic(self, p: Distribution, q: Distribution, gen: np.random.Generator) -> float:
        model = self.point.model
        if model == "local-private":
            return hadamard.local_private_statistic(self.local_config(), p, q, gen)
        if model == "local-public":
            return hadamard.local_public_statistic(self.local_config(), p, q, gen)
        if model == "shuffle-private":
            cfg = self.shuffle_config()
            return shuffle.shuffle_statistic(p, q, cfg.mixture, gen, cfg.poissonize)
        if model == "shuffle-public":
            return shuffle.shuffle_public_statistic(self.shuffle_config(), p, q, gen)
        return float(central.central_raw_statistic(self.central_config(), p, q, gen))

    def verdict(self, constants: dict, p: Distribution, q: Distribution, gen: np.random.Generator) -> TestVerdict:
        model = self.point.model
        missing = [c for c in CONSTANTS[model] if c not in constants]
        if missing:
            raise KeyError(f"{model} needs calibrated constants {missing}")
        if model == "local-private":
            return hadamard.run_local_private_coin(self.local_config(), p, q, gen)
        if model == "local-public":
            return hadamard.run_local_public_coin(self.local_config(constants["threshold"]), p, q, gen)
        if model == "shuffle-private":
            return shuffle.run_shuffle_private_coin(self.shuffle_config(constants["threshold"]), p, q, gen)
        if model == "shuffle-public":
            return shuffle.run_shuffle_public_coin(self.shuffle_config(constants["threshold"]), p, q, gen)
        return central.run_central(self.central_config(constants["C1"], constants["C2"]), p, q, gen)

    def fit_constants(self, null_stats: np.ndarray, quantile: float) -> dict:
        """Constants from simulated null statistics.

        Threshold models take the ``quantile`` of the null statistic. The
        central model sets ``C1`` to the ``quantile`` of ``Z/sqrt(n1)`` and then
        the smallest ``C2`` holding the mean null reject probability at 1/3.
        """
        model = self.point.model
        if model == "local-private":
            return {"threshold": self.point.alpha**2 / 2}
        if model in ("local-public", "shuffle-private", "shuffle-public"):
            t = float(np.quantile(null_stats, quantile))
            out = {"threshold": t}
            if model == "local-public":
                # threshold = (c1 sqrt(L/k) alpha)^2 / 2
                k, a = self.point.k, self.point.alpha
                out["c1"] = math.sqrt(2 * t * k / (LOCAL_PUBLIC_PARTS * a**2)) if t > 0 else float("nan")
            return out
        n1 = self.sizes[0]
        C1 = float(np.quantile(np.asarray(null_stats) / math.sqrt(n1), quantile))
        C2 = central.fit_c2(null_stats, n1, self.point.eps1, C1)
        return {"C1": C1, "C2": C2}
