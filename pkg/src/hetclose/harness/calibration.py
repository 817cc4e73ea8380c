"""Monte Carlo calibration of thresholds, shift constants and multipliers.

Calibration is a separate phase whose output is cached as JSON. Experiments
look records up by key and refuse to run when none exists.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from hetclose.harness.protocols import CONSTANTS, GridPoint, Protocol
from hetclose.rng import trial_generator

MIN_TRIALS = 500
TARGET = 2 / 3
DEFAULT_GRID = (1, 1.5, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 14, 16, 20, 25, 32, 40, 50, 64)

# SeedSequence purposes; experiments use 0 and 1.
NULL_STREAM = 2
CHECK_NULL_STREAM = 3
CHECK_FAR_STREAM = 4


class CalibrationMissing(LookupError):
    """No cached calibration matches the requested run."""


def default_quantile(model: str) -> float:
    return 0.9 if model == "central" else TARGET


@dataclass(frozen=True)
class CalibrationRecord:
    """Calibrated constants plus the evidence that produced them."""

    point: dict
    multiplier: float
    constants: dict
    trials: int
    quantile: float
    seed: int
    evidence: dict = field(default_factory=dict)

    @property
    def model(self) -> str:
        return self.point["model"]

    @property
    def key(self) -> str:
        return record_key(GridPoint(**self.point))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationRecord":
        return cls(**d)


def record_key(point: GridPoint) -> str:
    p = point
    return f"{p.model}|k={p.k}|alpha={p.alpha!r}|eps1={p.eps1!r}|eps2={p.eps2!r}|delta={p.delta!r}|family={p.family}|reps={p.repetitions}"


def null_statistics(proto: Protocol, trials: int, seed: int, stream: int = NULL_STREAM) -> np.ndarray:
    (u, _), _ = proto.point.pairs()
    return np.array([proto.statistic(u, u, trial_generator(seed, stream, i)) for i in range(trials)])


def binomial_se(rate: float, trials: int) -> float:
    return math.sqrt(max(rate * (1 - rate), 0.0) / trials)


def check_rates(proto: Protocol, constants: dict, trials: int, seed: int) -> dict:
    """Accept rate on the null pair and reject rate on the far pair, on fresh streams."""
    (u, _), (p, q) = proto.point.pairs()
    acc = sum(proto.verdict(constants, u, u, trial_generator(seed, CHECK_NULL_STREAM, i)).accept for i in range(trials))
    rej = sum(proto.verdict(constants, p, q, trial_generator(seed, CHECK_FAR_STREAM, i)).reject for i in range(trials))
    a, r = acc / trials, rej / trials
    return {
        "accept_rate_null": a,
        "reject_rate_far": r,
        "se_null": binomial_se(a, trials),
        "se_far": binomial_se(r, trials),
        "check_trials": trials,
    }


def calibrate(
    point: GridPoint,
    trials: int,
    quantile: float | None = None,
    seed: int = 0,
    multiplier: float | None = None,
    grid=DEFAULT_GRID,
    check_trials: int | None = None,
    slack_se: float = 2.0,
) -> CalibrationRecord:
    """Calibrate the model's constants at ``point``.

    With a fixed ``multiplier`` this simulates ``trials`` null statistics and
    stores the requested quantile (see :meth:`Protocol.fit_constants`). Without
    one, it walks ``grid`` and keeps the smallest multiplier whose fresh null
    accept rate and far reject rate both reach ``2/3 - slack_se * SE`` over
    ``check_trials`` trials. Deterministic given ``seed``.

    Raises:
        ValueError: if ``trials`` is below 500, if ``multiplier`` is fixed for a
            model with no calibratable constant, or if no grid multiplier works.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"calibration needs at least {MIN_TRIALS} trials, got {trials}")
    q = default_quantile(point.model) if quantile is None else quantile
    if not 0 < q < 1:
        raise ValueError(f"quantile must lie in (0, 1), got {q}")
    check_trials = trials if check_trials is None else check_trials
    if multiplier is not None:
        if not CONSTANTS[point.model]:
            raise ValueError(f"{point.model} has no calibratable constant at a fixed multiplier")
        return _calibrate_at(point, multiplier, trials, q, seed, check_trials)
    if not grid:
        raise ValueError("multiplier grid is empty")
    tried = []
    for m in grid:
        rec = _calibrate_at(point, m, trials, q, seed, check_trials)
        ev = rec.evidence
        tried.append((m, ev["accept_rate_null"], ev["reject_rate_far"]))
        if passes_target(ev["accept_rate_null"], ev["se_null"], slack_se) and passes_target(
            ev["reject_rate_far"], ev["se_far"], slack_se
        ):
            return CalibrationRecord(rec.point, m, rec.constants, trials, q, seed, {**ev, "grid_tried": tried})
    raise ValueError(f"no multiplier in {tuple(grid)} reaches 2/3 on both pairs: {tried}")


def passes_target(rate: float, se: float, slack_se: float = 2.0) -> bool:
    return rate >= TARGET - slack_se * se


def _calibrate_at(point: GridPoint, multiplier: float, trials: int, q: float, seed: int, check_trials: int):
    proto = Protocol(point, multiplier)
    stats = null_statistics(proto, trials, seed) if point.model != "local-private" else np.empty(0)
    constants = proto.fit_constants(stats, q)
    n1, n2 = proto.sizes
    evidence = {"n1": n1, "n2": n2, **check_rates(proto, constants, check_trials, seed)}
    if stats.size:
        evidence["null_quantile_se"] = quantile_se(stats, q)
    return CalibrationRecord(point.to_dict(), float(multiplier), constants, trials, q, seed, evidence)


def quantile_se(stats: np.ndarray, q: float) -> float:
    """Standard error of an empirical quantile via the binomial order-statistic band."""
    n = stats.size
    s = math.sqrt(q * (1 - q) / n)
    lo, hi = np.quantile(stats, [max(q - s, 0.0), min(q + s, 1.0)])
    return float(hi - lo) / 2


class CalibrationCache:
    """JSON file mapping record keys to calibration records."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)

    def load(self) -> dict:
        if not os.path.exists(self.path):
            return {}
        with open(self.path) as fh:
            return json.load(fh)

    def get(self, point: GridPoint) -> CalibrationRecord:
        data = self.load()
        key = record_key(point)
        if key not in data:
            raise CalibrationMissing(f"no calibration for {key} in {self.path}; run `hetclose calibrate` first")
        return CalibrationRecord.from_dict(data[key])

    def put(self, record: CalibrationRecord) -> None:
        data = self.load()
        data[record.key] = record.to_dict()
        tmp = self.path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
        os.replace(tmp, self.path)
