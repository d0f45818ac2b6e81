"""JSON and CSV serialization of calibration reports.

The JSON document carries a ``schema_version`` and everything needed to
replay the run: the full spec, the seed and substream path, the support
points and the per-run distributions.  CSV files use ``.`` decimals, LF
line endings and a header row.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .calibration import CalibrationReport, CalibrationSpec, CoverageSummary, ObjectiveResult, RunResult
from .models import SupportSet
from .solvers import TraceRecord
from .uncertainty import KsBounds

__all__ = [
    "SCHEMA_VERSION",
    "TRACE_COLUMNS",
    "read_report_json",
    "report_from_dict",
    "report_to_dict",
    "write_csv",
    "write_distribution_csv",
    "write_report_files",
    "write_report_json",
    "write_trace_csv",
]

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("k", "objective_est", "penalty_est", "step_sup_norm", "lambda_k", "gamma_k", "beta_k")


def _num(x):
    """JSON has no NaN/inf; encode them as strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _unnum(x) -> float:
    return float(x)


def _run_to_dict(run: RunResult) -> dict:
    return {
        "sense": run.sense,
        "value": _num(run.value),
        "se": _num(run.se),
        "penalty": _num(run.penalty),
        "p": run.p.tolist(),
        "status": run.status,
        "converged": run.converged,
        "feasible": run.feasible,
        "iterations": run.iterations,
        "replications": run.replications,
        "clip_events": run.clip_events,
        "wall_time": run.wall_time,
        "trace": {col: [_num(getattr(t, col)) if col != "k" else t.k for t in run.trace] for col in TRACE_COLUMNS},
        "info": run.info,
    }


def _run_from_dict(d: dict) -> RunResult:
    tr = d["trace"]
    trace = [TraceRecord(int(tr["k"][i]), *(_unnum(tr[c][i]) for c in TRACE_COLUMNS[1:])) for i in range(len(tr["k"]))]
    return RunResult(d["sense"], _unnum(d["value"]), _unnum(d["se"]), _unnum(d["penalty"]), np.asarray(d["p"], dtype=float),
                     d["status"], bool(d["converged"]), int(d["iterations"]), int(d["replications"]),
                     int(d["clip_events"]), trace, float(d["wall_time"]), dict(d.get("info", {})))


def report_to_dict(report: CalibrationReport) -> dict:
    b = report.bounds
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": report.spec.to_dict(),
        "rng_path": list(report.rng_path),
        "eps": report.eps,
        "wall_time": report.wall_time,
        "bounds": {
            "mode": b.mode, "alpha": b.alpha, "half_width": b.half_width, "delta": b.delta, "n": b.n_obs,
            "thresholds": b.thresholds.tolist(), "lower": b.lower.tolist(), "upper": b.upper.tolist(),
        },
        "support": {"points": report.support.points.tolist(), "generator": report.support.generator_desc},
        "objectives": [
            {"name": o.name, "z_min": _num(o.z_min), "z_max": _num(o.z_max), "gap": _num(o.gap),
             "converged": o.converged, "crossed": o.crossed, "feasible": o.feasible,
             "runs": {sense: _run_to_dict(r) for sense, r in o.runs.items()}}
            for o in report.objectives
        ],
        "diagnostics": report.diagnostics,
    }


def report_from_dict(d: dict) -> CalibrationReport:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema_version {version!r}")
    b = d["bounds"]
    bounds = KsBounds(np.asarray(b["thresholds"]), np.asarray(b["lower"]), np.asarray(b["upper"]), b["mode"],
                      float(b["alpha"]), float(b["half_width"]), float(b["delta"]), int(b["n"]))
    support = SupportSet(np.asarray(d["support"]["points"], dtype=float), dict(d["support"]["generator"]))
    objectives = [ObjectiveResult(o["name"], {s: _run_from_dict(r) for s, r in o["runs"].items()}) for o in d["objectives"]]
    return CalibrationReport(CalibrationSpec.from_dict(d["spec"]), objectives, bounds, support, float(d["eps"]),
                             tuple(d["rng_path"]), float(d["wall_time"]), dict(d.get("diagnostics", {})))


def write_report_json(report: CalibrationReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", newline="\n")
    return path


def read_report_json(path) -> CalibrationReport:
    return report_from_dict(json.loads(Path(path).read_text()))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    """Header plus rows, LF endings, shortest round-trip float repr."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue(), newline="\n")
    return path


def write_trace_csv(run: RunResult, path) -> Path:
    return write_csv(path, TRACE_COLUMNS, ((t.k, t.objective_est, t.penalty_est, t.step_sup_norm, t.lambda_k, t.gamma_k,
                                            t.beta_k) for t in run.trace))


def write_distribution_csv(points, weights, path) -> Path:
    return write_csv(path, ("point", "weight"), zip(np.asarray(points, dtype=float), np.asarray(weights, dtype=float)))


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def write_report_files(report: CalibrationReport, out_dir) -> list[Path]:
    """``report.json``, ``support.csv``, and per-run ``trace_*.csv`` / ``dist_*.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_report_json(report, out / "report.json"),
             write_distribution_csv(report.support.points, np.full(report.support.m, 1.0 / report.support.m),
                                    out / "support.csv")]
    for o in report.objectives:
        for sense, run in o.runs.items():
            stem = f"{_safe(o.name)}_{sense}"
            files.append(write_trace_csv(run, out / f"trace_{stem}.csv"))
            files.append(write_distribution_csv(report.support.points, run.p, out / f"dist_{stem}.csv"))
    return files


def coverage_rows(summaries: list[CoverageSummary]):
    return [(s.objective, s.hits, s.valid, s.replications, s.non_converged, s.ci_lo, s.ci_hi, s.truth, s.truth_se)
            for s in summaries]


COVERAGE_COLUMNS = ("objective", "hits", "valid", "R", "non_converged", "ci_lo", "ci_hi", "truth", "truth_se")
