"""Command-line interface: ``hetclose <subcommand> ...``.

Exit codes: 0 success, 1 statistical-criterion failure, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys

from hetclose.harness.audit import privacy_audit
from hetclose.harness.calibration import DEFAULT_GRID, CalibrationCache, CalibrationMissing, calibrate
from hetclose.harness.experiment import ExperimentSpec, append_csv, run_experiment
from hetclose.harness.protocols import CONSTANTS, GridPoint
from hetclose.harness.samples import MODELS, required_samples
from hetclose.kernels import BACKEND

EXIT_OK, EXIT_STAT, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
DEFAULT_CACHE = "hetclose_calibration.json"

log = logging.getLogger("hetclose")


class ConfigError(Exception):
    pass


def _model_args(p, need_alpha=True, need_k=True):
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--k", type=int, required=need_k)
    p.add_argument("--alpha", type=float, required=need_alpha, default=0.5)
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--eps2", type=float, required=True)
    p.add_argument("--delta", type=float, default=1e-6)


def _point_args(p):
    _model_args(p)
    p.add_argument("--family", default="two-spike", help="far-pair family (default: two-spike)")
    p.add_argument("--repetitions", type=int, default=9, help="majority repetitions for public-coin models")
    p.add_argument("--cache", default=DEFAULT_CACHE, help="calibration cache file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetclose", description="Closeness testing under heterogeneous privacy.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run null and far trials with cached calibration")
    _point_args(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--multiplier", type=float)
    p.add_argument("--out", required=True, help="JSON report path; the CSV row goes beside it")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("calibrate", help="calibrate constants and store them in the cache")
    _point_args(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--quantile", type=float)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--multiplier", type=float, help="calibrate at this multiplier instead of searching")
    p.add_argument("--grid", type=float, nargs="+", help="multiplier grid to search")
    p.add_argument("--check-trials", type=int)

    p = sub.add_parser("sweep", help="grid of simulate runs from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("privacy-audit", help="print the certified (eps, delta) per group")
    _model_args(p, need_alpha=False, need_k=False)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--mu1", type=int)
    p.add_argument("--mu2", type=int)
    p.add_argument("--sensitivity", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("samples", help="evaluate the sample-size formulas")
    _model_args(p)
    p.add_argument("--multiplier", type=float, default=1.0)
    return parser


def _point(a) -> GridPoint:
    return GridPoint(a.model, a.k, a.alpha, a.eps1, a.eps2, a.delta, a.family, a.repetitions)


def cmd_simulate(a) -> int:
    spec = ExperimentSpec(
        a.model, a.family, a.k, a.alpha, a.eps1, a.eps2, a.delta, a.trials, a.seed,
        a.multiplier, a.out, a.repetitions,
    )
    record = _lookup(a.cache, spec.point, spec.model, spec.constant_multiplier)
    report = run_experiment(spec, record, jobs=a.jobs)
    print(
        f"{a.model} n1={report.n1} n2={report.n2} "
        f"accept_null={report.accept_rate_null:.4f}±{report.se_null:.4f} "
        f"reject_far={report.reject_rate_far:.4f}±{report.se_far:.4f} "
        f"{'PASS' if report.passed else 'FAIL'}"
    )
    return EXIT_OK if report.passed else EXIT_STAT


def _lookup(cache_path, point, model, multiplier):
    try:
        return CalibrationCache(cache_path).get(point)
    except CalibrationMissing:
        if CONSTANTS[model] or multiplier is None:
            raise
        return None


def cmd_calibrate(a) -> int:
    point = _point(a)
    rec = calibrate(
        point, a.trials, a.quantile, a.seed, a.multiplier,
        grid=tuple(a.grid) if a.grid else DEFAULT_GRID, check_trials=a.check_trials,
    )
    CalibrationCache(a.cache).put(rec)
    print(json.dumps(rec.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


SWEEP_KEYS = {"model", "family", "k", "alpha", "eps1", "eps2", "delta", "repetitions", "multiplier"}


def sweep_points(config: dict) -> list[dict]:
    """Expand ``grid`` (lists) over ``fixed`` (scalars) into run parameter dicts."""
    fixed = dict(config.get("fixed", {}))
    grid = dict(config.get("grid", {}))
    unknown = (set(fixed) | set(grid)) - SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid entry {key!r} must be a nonempty list")
    names = sorted(grid)
    points = []
    for combo in itertools.product(*(grid[n] for n in names)):
        d = {"family": "two-spike", "delta": 1e-6, "repetitions": 9, **fixed, **dict(zip(names, combo))}
        missing = {"model", "k", "alpha", "eps1", "eps2"} - set(d)
        if missing:
            raise ConfigError(f"sweep point lacks {sorted(missing)}")
        points.append(d)
    return points


def cmd_sweep(a) -> int:
    try:
        with open(a.config) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad JSON in {a.config}: {e}") from e
    for key in ("trials", "seed", "out"):
        if key not in config:
            raise ConfigError(f"sweep config needs {key!r}")
    cache = CalibrationCache(config.get("cache", DEFAULT_CACHE))
    auto = config.get("calibrate", False)
    status = EXIT_OK
    for d in sweep_points(config):
        spec = ExperimentSpec(
            d["model"], d["family"], d["k"], d["alpha"], d["eps1"], d["eps2"], d["delta"],
            config["trials"], config["seed"], d.get("multiplier"), None, d["repetitions"],
        )
        try:
            record = _lookup(cache.path, spec.point, spec.model, spec.constant_multiplier)
        except LookupError:
            if not auto:
                raise
            record = calibrate(
                spec.point, config.get("calibration_trials", 500), None, config["seed"], d.get("multiplier")
            )
            cache.put(record)
        report = run_experiment(spec, record, jobs=a.jobs)
        append_csv(report, config["out"])
        print(
            f"{spec.model} k={spec.k} eps=({spec.eps1},{spec.eps2}) n1={report.n1} n2={report.n2} "
            f"accept_null={report.accept_rate_null:.3f} reject_far={report.reject_rate_far:.3f}"
        )
        if not report.passed:
            status = EXIT_STAT
    return status


def cmd_privacy_audit(a) -> int:
    report = privacy_audit(
        a.model, a.eps1, a.eps2, a.delta, n1=a.n1, n2=a.n2, mu1=a.mu1, mu2=a.mu2,
        sensitivity=a.sensitivity, seed=a.seed,
    )
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_STAT


def cmd_samples(a) -> int:
    n1, n2 = required_samples(a.model, a.k, a.alpha, a.eps1, a.eps2, a.delta, a.multiplier)
    print(f"n1={n1} n2={n2}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "privacy-audit": cmd_privacy_audit,
    "samples": cmd_samples,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    log.debug("kernel backend: %s", BACKEND)
    try:
        return COMMANDS[a.command](a)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, KeyError, LookupError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
