"""Command-line front end.

Subcommands: ``generate-data``, ``calibrate``, ``cdf-sweep``, ``coverage``,
``table1`` and ``validate-config``.  Exit status is 0 on success, 2 when some
solver run did not converge (results are still written), and 1 on input
errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibration import CalibrationSpec, calibrate_bounds, cdf_sweep, coverage_experiment
from .config import ConfigError, RunConfig, load_config
from .models import make_distribution, simulate_continuous
from .report import COVERAGE_COLUMNS, coverage_rows, write_csv, write_report_files
from .rng import Purpose, RngStream
from .uncertainty import OutputSample, load_output_sample

__all__ = ["main"]

log = logging.getLogger("simcal")

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2
SEED_ENV = "SIMCAL_SEED"


class InputError(Exception):
    pass


def _seed(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV}={env!r} is not an integer") from None
    return cfg.spec.seed


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(spec=CalibrationSpec())
    senses = None
    if getattr(args, "sense", None):
        senses = ("min", "max") if args.sense == "both" else (args.sense,)
    workers = args.workers if args.workers is not None else (cfg.workers or os.cpu_count() or 1)
    try:
        return cfg.with_overrides(
            seed=_seed(args, cfg),
            algorithm=args.algorithm.replace("-", "_") if getattr(args, "algorithm", None) else None,
            senses=senses,
            delta=getattr(args, "delta", None),
            workers=workers,
            data_path=getattr(args, "data", None),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load_data(cfg: RunConfig):
    if cfg.data_path is None:
        raise InputError("no output data: pass --data or set [data].path")
    path = Path(cfg.data_path)
    if not path.is_file():
        raise InputError(f"data file not found: {path}")
    try:
        return load_output_sample(path)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _truth(cfg: RunConfig):
    if cfg.truth is None:
        raise InputError(f"{cfg.source}: truth: this command needs a [truth] section")
    return make_distribution(cfg.truth)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _status(report) -> int:
    return EXIT_OK if report.all_converged else EXIT_PARTIAL


def _summarize(report):
    for o in report.objectives:
        flags = [name for name, bad in (("not converged", not o.converged), ("crossed", o.crossed),
                                        ("infeasible", not o.feasible)) if bad]
        note = f"  ({', '.join(flags)})" if flags else ""
        print(f"{o.name}: [{o.z_min:.6g}, {o.z_max:.6g}]{note}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def simulate_data(cfg: RunConfig, n: int) -> np.ndarray:
    """``n`` outputs under the configured truth, keyed on the run seed."""
    rng = RngStream(cfg.spec.seed).generator(5, Purpose.DATA, n)
    return simulate_continuous(cfg.spec.output_map(), _truth(cfg), n, rng)


def cmd_generate_data(args) -> int:
    cfg = _resolve(args)
    n = args.n if args.n is not None else cfg.n
    if n is None or n < 1:
        raise InputError("n must be a positive integer (--n or [data].n)")
    y = simulate_data(cfg, n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {cfg.spec.output_model} outputs, truth={cfg.truth}, n={n}, seed={cfg.spec.seed}"]
    lines += [repr(float(v)) for v in y]
    out.write_text("\n".join(lines) + "\n", newline="\n")
    print(f"wrote {n} observations to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _resolve(args)
    data = _load_data(cfg)
    report = calibrate_bounds(cfg.spec, data)
    write_report_files(report, _out_dir(args))
    _summarize(report)
    return _status(report)


def cmd_cdf_sweep(args) -> int:
    cfg = _resolve(args)
    if not cfg.levels:
        raise InputError(f"{cfg.source}: sweep: no levels configured")
    data = _load_data(cfg)
    report = cdf_sweep(cfg.spec, data, cfg.levels)
    out = _out_dir(args)
    write_report_files(report, out)
    truth = make_distribution(cfg.truth) if cfg.truth is not None else None
    rows = []
    for a, o in zip(cfg.levels, report.objectives):
        rows.append((a, o.z_min, o.z_max, float(truth.cdf(a)) if truth is not None and hasattr(truth, "cdf") else ""))
    write_csv(out / "cdf_sweep.csv", ("a", "min", "max", "true"), rows)
    _summarize(report)
    return _status(report)


def cmd_coverage(args) -> int:
    cfg = _resolve(args)
    truth = _truth(cfg)
    n = args.n if args.n is not None else cfg.n
    if n is None:
        raise InputError("coverage needs the data size: --n or [data].n")
    R = args.replications if args.replications is not None else cfg.replications
    tv = None
    if cfg.truth_value is not None:
        tv = {o.name: cfg.truth_value for o in cfg.spec.objectives}
    rng = RngStream(cfg.spec.seed)
    summaries = coverage_experiment(cfg.spec, truth, n, R, rng, truth_value=tv, oracle_reps=cfg.oracle_reps)
    write_csv(_out_dir(args) / "coverage.csv", COVERAGE_COLUMNS, coverage_rows(summaries))
    bad = 0
    for s in summaries:
        print(f"{s.objective}: {s.hits}/{s.valid} cover {s.truth:.4g}; CI [{s.ci_lo:.3f}, {s.ci_hi:.3f}]"
              f"; {s.non_converged} not converged")
        bad += s.non_converged
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_table1(args) -> int:
    cfg = _resolve(args)
    cells = cfg.table1_cells or ((100, 30), (200, 30))
    rows, partial = [], False
    for m, n in cells:
        y = simulate_data(cfg, n)
        solver = cfg.spec.solver
        a = cfg.table1_a.get(f"{m}x{n}")
        if a is not None:
            solver = solver.with_(a=a)
        spec = replace(cfg.spec, m=m, solver=solver)
        report = calibrate_bounds(spec, OutputSample(y))
        o = report.objectives[0]
        rows.append((m, n, o.z_min, o.z_max))
        partial |= not report.all_converged
        print(f"m={m} n={n}: [{o.z_min:.6g}, {o.z_max:.6g}]")
    write_csv(_out_dir(args) / "table1.csv", ("m", "n", "min", "max"), rows)
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_validate_config(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: ok ({len(cfg.spec.objectives)} objective(s), algorithm={cfg.spec.solver.algorithm})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 so that status 2 always means partial convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, config_required: bool = False):
    p.add_argument("--config", required=config_required, help="TOML run configuration")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then the config)")
    p.add_argument("--workers", type=int, help="worker processes (default: config, else logical cores)")


def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--algorithm", choices=("mdsa", "alt-mdsa", "rspg", "two-phase-rspg"))
    p.add_argument("--sense", choices=("min", "max", "both"))
    p.add_argument("--delta", type=float, help="extra KS half-width (interval inflation)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simcal", description="Calibrate simulation input models from output data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="simulate output data under a truth model")
    _common(p, config_required=True)
    p.add_argument("--n", type=int, help="number of observations (default [data].n)")
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("calibrate", help="bound each objective from below and above")
    _common(p, config_required=True)
    _solver_flags(p)
    p.add_argument("--data", help="one-column output data file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("cdf-sweep", help="simultaneous bounds on the input CDF at [sweep] levels")
    _common(p, config_required=True)
    _solver_flags(p)
    p.add_argument("--data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cdf_sweep)

    p = sub.add_parser("coverage", help="repeated fresh-data calibrations against the truth")
    _common(p, config_required=True)
    _solver_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--replications", "-R", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("table1", help="bounds over a grid of (m, n) cells")
    _common(p, config_required=True)
    _solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("validate-config", help="parse and check a configuration file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
