"""End-to-end calibration: support sampling, paired min/max solves, sweeps, coverage.

All objectives of one :func:`calibrate_bounds` call share the same data,
uncertainty set and support points, so their bounds hold simultaneously.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .models import (
    CdfIndicator,
    PointsInput,
    SupportSet,
    as_generator,
    make_distribution,
    make_map,
    simulate_continuous,
)
from .rng import Purpose, RngStream
from .solvers import Problem, RspgParams, SolverConfig, SolverState, TraceRecord, solve, validate_schedule
from .uncertainty import CONTINUOUS_CDF, KsBounds, OutputSample, build_bounds

__all__ = [
    "CalibrationReport",
    "CalibrationSpec",
    "CoverageSummary",
    "ObjectiveResult",
    "ObjectiveSpec",
    "RunResult",
    "calibrate_bounds",
    "cdf_sweep",
    "choose_epsilon",
    "coverage_experiment",
    "sample_support",
    "true_value",
]

log = logging.getLogger(__name__)

ORACLE_REPS = 1_000_000
# report-batch penalty above this marks a run as infeasible (a flag only)
FEASIBILITY_TOL = 1e-3


def choose_epsilon(m: int, n: int) -> float:
    """Simplex floor ``min(m^{-3/2}, 0.1 / (m sqrt(n)))``; always below ``1/m``."""
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    return min(m**-1.5, 0.1 / (m * math.sqrt(n)))


def sample_support(Q: dict, m: int, rng) -> SupportSet:
    """``m`` i.i.d. draws from the support-generating distribution ``Q``.

    ``Q = {"name": "points", "points": [...]}`` uses the listed points as is.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    dist = make_distribution(Q)
    desc = dict(dist.describe())
    if isinstance(rng, RngStream):
        desc["seed"] = rng.seed
    if isinstance(dist, PointsInput):
        points = np.asarray(dist.points, dtype=float)
        if points.size != m:
            raise ValueError(f"point list has {points.size} entries, m={m}")
        return SupportSet(points, desc)
    return SupportSet(dist.sample(as_generator(rng), m), desc)


def true_value(target_map, truth, reps: int = ORACLE_REPS, rng=0) -> tuple[float, float]:
    """``(psi, se)`` of a target under a continuous truth model.

    CDF indicators use the closed-form CDF (``se = 0``); anything else is a
    plain Monte Carlo mean over ``reps`` replications.
    """
    if isinstance(target_map, CdfIndicator) and hasattr(truth, "cdf"):
        return float(truth.cdf(target_map.level)), 0.0
    y = simulate_continuous(target_map, truth, reps, as_generator(rng))
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(reps))


# ---------------------------------------------------------------------------
# specifications and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveSpec:
    """One target map ``g`` selected by registry name."""

    name: str
    model: str
    params: dict = field(default_factory=dict)

    def build(self):
        return make_map(self.model, **self.params)


@dataclass(frozen=True)
class CalibrationSpec:
    output_model: str = "mg1_wait20"
    output_params: dict = field(default_factory=dict)
    objectives: tuple = (ObjectiveSpec("queue_length", "mg1_queuelen20"),)
    support: dict = field(default_factory=lambda: {"name": "lognormal", "mu": 0.0, "sigma": 1.0})
    m: int = 100
    alpha: float = 0.05
    bounds_mode: str = CONTINUOUS_CDF
    delta: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    senses: tuple = ("min", "max")
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "senses", tuple(self.senses))
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.m < 2:
            out.append("m must be at least 2")
        if not 0 < self.alpha < 1:
            out.append("alpha must lie in (0, 1)")
        if not self.objectives:
            out.append("at least one objective is required")
        names = [o.name for o in self.objectives]
        if len(set(names)) != len(names):
            out.append("objective names must be unique")
        if not self.senses or any(s not in ("min", "max") for s in self.senses):
            out.append("senses must be a non-empty subset of {min, max}")
        if self.delta < 0:
            out.append("delta must be nonnegative")
        if self.workers < 1:
            out.append("workers must be at least 1")
        out.extend(v.message for v in validate_schedule(self.solver.with_(sense="min")))
        return out

    def output_map(self):
        return make_map(self.output_model, **self.output_params)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["objectives"] = [asdict(o) for o in self.objectives]
        d["senses"] = list(self.senses)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationSpec":
        d = dict(d)
        solver = dict(d.pop("solver", {}))
        rspg = RspgParams(**solver.pop("rspg", {}))
        objectives = tuple(ObjectiveSpec(o["name"], o["model"], dict(o.get("params", {}))) for o in d.pop("objectives"))
        return cls(objectives=objectives, solver=SolverConfig(rspg=rspg, **solver), **d)


@dataclass
class RunResult:
    """One min or max solve, stripped down to what a report needs."""

    sense: str
    value: float
    se: float
    penalty: float
    p: np.ndarray
    status: str
    converged: bool
    iterations: int
    replications: int
    clip_events: int
    trace: list
    wall_time: float
    info: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return bool(self.penalty <= FEASIBILITY_TOL)

    @classmethod
    def from_state(cls, sense: str, state: SolverState, wall_time: float) -> "RunResult":
        info = {k: v for k, v in state.info.items() if k not in ("sense",)}
        if state.tau is not None:
            info["tau"] = state.tau
        return cls(sense, float(state.objective), float(state.objective_se), float(state.penalty), state.p.copy(),
                   state.status, bool(state.converged), state.k, state.replications, state.clip_events,
                   list(state.trace), wall_time, info)


@dataclass
class ObjectiveResult:
    name: str
    runs: dict

    @property
    def z_min(self) -> float:
        return self.runs["min"].value if "min" in self.runs else float("nan")

    @property
    def z_max(self) -> float:
        return self.runs["max"].value if "max" in self.runs else float("nan")

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.runs.values())

    @property
    def feasible(self) -> bool:
        return all(r.feasible for r in self.runs.values())

    @property
    def crossed(self) -> bool:
        """Both runs converged yet ``z_min > z_max``: a solver failure, flagged not hidden."""
        return self.converged and len(self.runs) == 2 and self.z_min > self.z_max

    @property
    def gap(self) -> float:
        """Identifiability gap ``z_max - z_min`` of the computed bounds."""
        return self.z_max - self.z_min

    def covers(self, psi: float, tol: float = 0.0) -> bool:
        return bool(self.z_min - tol <= psi <= self.z_max + tol)


@dataclass
class CalibrationReport:
    spec: CalibrationSpec
    objectives: list
    bounds: KsBounds
    support: SupportSet
    eps: float
    rng_path: tuple = ()
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def objective(self, name: str) -> ObjectiveResult:
        for o in self.objectives:
            if o.name == name:
                return o
        raise KeyError(name)

    @property
    def all_converged(self) -> bool:
        return all(o.converged and not o.crossed for o in self.objectives)

    def bounds_meta(self) -> dict:
        return {"n": self.bounds.n_obs, "n_thresholds": self.bounds.n, "half_width": self.bounds.half_width,
                "delta": self.bounds.delta, "alpha": self.bounds.alpha, "mode": self.bounds.mode}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _solve_task(task):
    problem, config, rng, sense = task
    t0 = time.perf_counter()
    state = solve(problem, config.with_(sense=sense), rng)
    return RunResult.from_state(sense, state, time.perf_counter() - t0)


def _run_all(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_solve_task, tasks))


def calibrate_bounds(spec: CalibrationSpec, data: OutputSample, rng: RngStream | None = None) -> CalibrationReport:
    """Bound every objective of ``spec`` from below and above on the KS-feasible set.

    The support and the uncertainty set are built once and shared.  Solver
    run ``(objective j, sense)`` draws from the substream ``(2, j, sense)``,
    so results do not depend on the worker count or run order.
    """
    t0 = time.perf_counter()
    rng = RngStream(spec.seed) if rng is None else rng
    bounds = build_bounds(data, spec.alpha, spec.bounds_mode, spec.delta)
    support = sample_support(spec.support, spec.m, rng.generator(3, Purpose.SUPPORT))
    support.generator_desc.update({"seed": rng.seed, "path": list(rng.path)})
    eps = spec.solver.eps if spec.solver.eps is not None else choose_epsilon(spec.m, data.n)
    config = spec.solver.with_(eps=eps)
    h = spec.output_map()

    tasks = []
    for j, obj in enumerate(spec.objectives):
        problem = Problem(h, obj.build(), support, bounds)
        for sense in spec.senses:
            tasks.append((problem, config, rng.substream(2, j, 0 if sense == "min" else 1), sense))
    results = iter(_run_all(tasks, spec.workers))

    objectives = []
    for obj in spec.objectives:
        runs = {sense: next(results) for sense in spec.senses}
        res = ObjectiveResult(obj.name, runs)
        if res.crossed:
            log.warning("objective %s: z_min=%.4f exceeds z_max=%.4f", obj.name, res.z_min, res.z_max)
        objectives.append(res)
    return CalibrationReport(spec, objectives, bounds, support, eps, tuple(rng.path), time.perf_counter() - t0)


def _isotonic_audit(values: np.ndarray) -> dict:
    fit = optimize.isotonic_regression(values).x
    return {"violations": int(np.count_nonzero(np.diff(values) < 0)),
            "max_isotonic_adjustment": float(np.max(np.abs(fit - values))) if values.size else 0.0}


def cdf_sweep(spec: CalibrationSpec, data: OutputSample, levels, rng: RngStream | None = None) -> CalibrationReport:
    """Simultaneous bounds on the input CDF at ``levels`` (strictly increasing).

    Raw bounds are reported unmodified; a monotonicity audit of the lower and
    upper curves goes into ``report.diagnostics``.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 1 or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be strictly increasing")
    objectives = tuple(ObjectiveSpec(f"cdf@{a:g}", "cdf_indicator", {"level": float(a)}) for a in levels)
    report = calibrate_bounds(replace(spec, objectives=objectives), data, rng)
    report.diagnostics["levels"] = levels.tolist()
    for sense in report.spec.senses:
        curve = np.array([o.runs[sense].value for o in report.objectives])
        report.diagnostics[f"monotonicity_{sense}"] = _isotonic_audit(curve)
    return report


@dataclass
class CoverageSummary:
    objective: str
    truth: float
    truth_se: float
    hits: int
    valid: int
    replications: int
    non_converged: int
    ci_lo: float
    ci_hi: float
    intervals: list

    @property
    def rate(self) -> float:
        return self.hits / self.valid if self.valid else float("nan")


def coverage_experiment(spec: CalibrationSpec, truth, n: int, replications: int, rng: RngStream | int = 0,
                        truth_value: dict | None = None, oracle_reps: int = ORACLE_REPS,
                        confidence: float = 0.95) -> list[CoverageSummary]:
    """Repeat data generation, support sampling and calibration ``replications`` times.

    ``truth`` is a continuous input distribution.  Each replication simulates
    ``n`` fresh outputs, builds fresh support, and records whether each
    objective's interval covers its true value (``truth_value[name]`` if
    given, else a Monte Carlo oracle).  Replications with a non-converged or
    crossed pair are excluded from the denominator and counted separately.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    rng = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    truth = make_distribution(truth) if isinstance(truth, dict) else truth
    h = spec.output_map()
    truths = {}
    for j, obj in enumerate(spec.objectives):
        if truth_value is not None and obj.name in truth_value:
            v = truth_value[obj.name]
            truths[obj.name] = (float(v[0]), float(v[1])) if isinstance(v, (tuple, list)) else (float(v), 0.0)
        else:
            truths[obj.name] = true_value(obj.build(), truth, oracle_reps, rng.generator(3, Purpose.ORACLE, j))

    per_obj = {obj.name: [] for obj in spec.objectives}
    for r in range(replications):
        sub = rng.substream(4, r)
        y = simulate_continuous(h, truth, n, sub.generator(3, Purpose.DATA))
        report = calibrate_bounds(spec, OutputSample(y), sub)
        for res in report.objectives:
            per_obj[res.name].append((res.z_min, res.z_max, res.converged and not res.crossed))

    out = []
    for name, rows in per_obj.items():
        psi, se = truths[name]
        valid = [(lo, hi) for lo, hi, ok in rows if ok]
        hits = sum(lo <= psi <= hi for lo, hi in valid)
        if valid:
            ci = stats.binomtest(hits, len(valid)).proportion_ci(confidence_level=confidence, method="exact")
            lo, hi = float(ci.low), float(ci.high)
        else:
            lo = hi = float("nan")
        out.append(CoverageSummary(name, psi, se, hits, len(valid), replications, len(rows) - len(valid), lo, hi,
                                   [(float(a), float(b), bool(ok)) for a, b, ok in rows]))
    return out


def trace_rows(trace: list[TraceRecord]) -> list[tuple]:
    return [(t.k, t.objective_est, t.penalty_est, t.step_sup_norm, t.lambda_k, t.gamma_k, t.beta_k) for t in trace]
