"""Monte Carlo experiments: null and far pairs, rates, reports and CSV rows."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from hetclose.harness.audit import privacy_audit
from hetclose.harness.calibration import TARGET, CalibrationRecord, binomial_se, record_key
from hetclose.harness.protocols import CONSTANTS, GridPoint, Protocol
from hetclose.rng import trial_generator

NULL_STREAM = 0
FAR_STREAM = 1

CSV_COLUMNS = (
    "model", "k", "alpha", "eps1", "eps2", "delta", "n1", "n2",
    "accept_rate_null", "reject_rate_far", "se_null", "se_far", "seed",
)


@dataclass(frozen=True)
class ExperimentSpec:
    model: str
    family: str
    k: int
    alpha: float
    eps1: float
    eps2: float
    delta: float = 1e-6
    trials: int = 500
    seed: int = 0
    constant_multiplier: float | None = None
    output_path: str | None = None
    repetitions: int = 9

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.constant_multiplier is not None and not self.constant_multiplier > 0:
            raise ValueError("constant_multiplier must be positive")
        self.point  # validates the model parameters

    @property
    def point(self) -> GridPoint:
        return GridPoint(self.model, self.k, self.alpha, self.eps1, self.eps2, self.delta, self.family, self.repetitions)


@dataclass(frozen=True)
class TrialReport:
    spec: dict
    n1: int
    n2: int
    accept_rate_null: float
    reject_rate_far: float
    se_null: float
    se_far: float
    calibrated_constants: dict
    calibration_key: str | None
    multiplier: float
    privacy: dict
    wall_time: float
    null_verdicts: list = field(default_factory=list)
    far_verdicts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Both rates reach 2/3 once two standard errors are allowed."""
        return (
            self.accept_rate_null >= TARGET - 2 * self.se_null
            and self.reject_rate_far >= TARGET - 2 * self.se_far
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        s = self.spec
        return {
            "model": s["model"], "k": s["k"], "alpha": s["alpha"], "eps1": s["eps1"],
            "eps2": s["eps2"], "delta": s["delta"], "n1": self.n1, "n2": self.n2,
            "accept_rate_null": self.accept_rate_null, "reject_rate_far": self.reject_rate_far,
            "se_null": self.se_null, "se_far": self.se_far, "seed": s["seed"],
        }


def resolve(spec: ExperimentSpec, record: CalibrationRecord | None) -> tuple[float, dict, str | None]:
    """Multiplier and constants for a run; never recalibrates.

    Raises:
        LookupError: constants are needed but no matching record was given.
    """
    point = spec.point
    needs = CONSTANTS[spec.model]
    if record is not None and record.key != record_key(point):
        raise LookupError(f"calibration record {record.key} does not match {record_key(point)}")
    if record is None:
        if needs or spec.constant_multiplier is None:
            raise LookupError(f"{spec.model} at {record_key(point)} is not calibrated; run calibrate first")
        return spec.constant_multiplier, {}, None
    m = record.multiplier if spec.constant_multiplier is None else spec.constant_multiplier
    if needs and m != record.multiplier:
        raise LookupError(
            f"constants were calibrated at multiplier {record.multiplier}, not {m}; recalibrate explicitly"
        )
    return m, dict(record.constants), record.key


def _run_chunk(args):
    point, multiplier, constants, seed, stream, start, stop = args
    proto = Protocol(point, multiplier)
    (u, _), (p, q) = point.pairs()
    a, b = (u, u) if stream == NULL_STREAM else (p, q)
    return [bool(proto.verdict(constants, a, b, trial_generator(seed, stream, i)).accept) for i in range(start, stop)]


def _chunks(n, jobs):
    size = max(1, -(-n // (4 * jobs)))
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def audit_for(proto: Protocol) -> dict:
    """Privacy audit for the exact sizes and noise levels a run uses."""
    point = proto.point
    n1, n2 = proto.sizes
    if point.model.startswith("shuffle"):
        mp = proto.shuffle_config().mixture
        return privacy_audit(point.model, point.eps1, point.eps2, point.delta, mu1=mp.mu1, mu2=mp.mu2).to_dict()
    return privacy_audit(point.model, point.eps1, point.eps2, point.delta, n1=n1, n2=n2).to_dict()


def run_experiment(
    spec: ExperimentSpec, record: CalibrationRecord | None = None, jobs: int = 1, keep_verdicts: bool = False
) -> TrialReport:
    """Run ``spec.trials`` trials on the null pair and on the far pair.

    Trial ``i`` of each pair draws from its own substream, so ``jobs`` only
    changes speed. If ``spec.output_path`` is set the report is written there
    as JSON and a summary row is appended to the CSV beside it.
    """
    t0 = time.perf_counter()
    multiplier, constants, key = resolve(spec, record)
    point = spec.point
    proto = Protocol(point, multiplier)
    n1, n2 = proto.sizes
    privacy = audit_for(proto)
    if not privacy["passed"]:
        raise RuntimeError(f"privacy audit failed: {privacy}")

    results = {}
    for stream in (NULL_STREAM, FAR_STREAM):
        tasks = [(point, multiplier, constants, spec.seed, stream, a, b) for a, b in _chunks(spec.trials, jobs)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                parts = list(ex.map(_run_chunk, tasks))
        else:
            parts = [_run_chunk(t) for t in tasks]
        results[stream] = [v for part in parts for v in part]

    accepts_null = results[NULL_STREAM]
    rejects_far = [not a for a in results[FAR_STREAM]]
    an = sum(accepts_null) / spec.trials
    rf = sum(rejects_far) / spec.trials
    report = TrialReport(
        spec=asdict(spec),
        n1=n1,
        n2=n2,
        accept_rate_null=an,
        reject_rate_far=rf,
        se_null=binomial_se(an, spec.trials),
        se_far=binomial_se(rf, spec.trials),
        calibrated_constants=constants,
        calibration_key=key,
        multiplier=multiplier,
        privacy=privacy,
        wall_time=time.perf_counter() - t0,
        null_verdicts=accepts_null if keep_verdicts else [],
        far_verdicts=[not r for r in rejects_far] if keep_verdicts else [],
    )
    if spec.output_path:
        write_report(report, spec.output_path)
    return report


def output_paths(output_path: str) -> tuple[str, str]:
    """``(json_path, csv_path)`` sharing the stem of ``output_path``."""
    root, ext = os.path.splitext(output_path)
    if ext == ".csv":
        return root + ".json", output_path
    return output_path, root + ".csv"


def write_report(report: TrialReport, output_path: str) -> None:
    """Write the JSON report and append its CSV summary row."""
    json_path, csv_path = output_paths(output_path)
    with open(json_path, "w") as fh:
        fh.write(report.to_json())
    append_csv(report, csv_path)


def append_csv(report: TrialReport, path: str) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        w.writerow(report.csv_row())
