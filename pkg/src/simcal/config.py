"""TOML run configuration with strict validation.

Every key is typed; unknown sections and keys are rejected.  Diagnostics
name the file, the line (when it can be located) and the dotted field.

Example::

    [calibration]
    m = 100
    alpha = 0.05
    seed = 7

    [support]
    name = "lognormal"
    mu = 0.0
    sigma = 1.0

    [[objective]]
    name = "queue_length"
    model = "mg1_queuelen20"

    [solver]
    algorithm = "mdsa"
    a = 0.2
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .calibration import CalibrationSpec, ObjectiveSpec
from .models import BUILTIN_MAPS
from .solvers import ALGORITHMS, RspgParams, SolverConfig
from .uncertainty import MODES

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """A configuration problem, already formatted as ``file:line: field: message``."""

    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


NUM = (int, float)
STR = (str,)
INT = (int,)
BOOL = (bool,)

# section -> key -> accepted python types
SCHEMA: dict[str, dict[str, tuple]] = {
    "calibration": {"m": INT, "alpha": NUM, "bounds_mode": STR, "delta": NUM, "seed": INT, "senses": (list,),
                    "workers": INT},
    "model": {"output": STR, "params": (dict,)},
    "support": {"name": STR, "mu": NUM, "sigma": NUM, "lo": NUM, "hi": NUM, "rate": NUM, "points": (list,),
                "components": (list,), "weights": (list,)},
    "solver": {"algorithm": STR, "a": NUM, "b": NUM, "c": NUM, "alpha1": NUM, "alpha2": NUM, "alpha3": NUM,
               "lambda_schedule": STR, "eps": NUM, "M1": INT, "M2": INT, "M3": INT, "stop_tol": NUM,
               "max_iters": INT, "trace_batch": INT, "report_batch": INT, "clip_factor": NUM,
               "check_invariants": BOOL, "rspg": (dict,)},
    "solver.rspg": {"N": INT, "S": INT, "M": INT, "M_post": INT, "gamma_bar": NUM, "lambda_fixed": NUM},
    "truth": {"name": STR, "rate": NUM, "mu": NUM, "sigma": NUM, "lo": NUM, "hi": NUM, "components": (list,),
              "weights": (list,)},
    "data": {"path": STR, "n": INT},
    "coverage": {"replications": INT, "truth_value": NUM, "oracle_reps": INT},
    "sweep": {"levels": (list,), "start": NUM, "stop": NUM, "step": NUM},
    "table1": {"cells": (list,), "a": (dict,)},
    "objective": {"name": STR, "model": STR, "params": (dict,)},
}
DIST_NAMES = ("exponential", "beta_mixture", "lognormal", "uniform", "points")


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: calibration spec plus experiment parameters."""

    spec: CalibrationSpec
    truth: dict | None = None
    data_path: str | None = None
    n: int | None = None
    replications: int = 20
    truth_value: float | None = None
    oracle_reps: int = 1_000_000
    levels: tuple = ()
    table1_cells: tuple = ()
    table1_a: dict = field(default_factory=dict)
    workers: int | None = None
    source: str = "<config>"

    def with_overrides(self, seed=None, algorithm=None, senses=None, delta=None, workers=None, data_path=None):
        spec = self.spec
        if seed is not None:
            spec = replace(spec, seed=int(seed))
        if algorithm is not None:
            spec = replace(spec, solver=spec.solver.with_(algorithm=algorithm))
        if senses is not None:
            spec = replace(spec, senses=tuple(senses))
        if delta is not None:
            spec = replace(spec, delta=float(delta))
        if workers is not None:
            spec = replace(spec, workers=int(workers))
        return replace(self, spec=spec, data_path=self.data_path if data_path is None else str(data_path),
                       workers=spec.workers if workers is not None else self.workers)


def _line_index(text: str):
    """Map ``(section, key)`` and ``(section, occurrence)`` to 1-based line numbers."""
    keys: dict[tuple, int] = {}
    headers: dict[tuple, int] = {}
    section = ""
    counts: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\[\s*([\w.]+)\s*\]\]", line)
        if m:
            name = m.group(1)
            idx = counts.get(name, 0)
            counts[name] = idx + 1
            section = f"{name}[{idx}]"
            headers[(section,)] = lineno
            continue
        m = re.fullmatch(r"\[\s*([\w.]+)\s*\]", line)
        if m:
            section = m.group(1)
            headers[(section,)] = lineno
            continue
        m = re.match(r"([\w\"'.-]+)\s*=", line)
        if m:
            key = m.group(1).strip("\"'")
            full = section
            if "." in key:
                head, key = key.rsplit(".", 1)
                full = f"{section}.{head}" if section else head
            keys[(full, key)] = lineno
    return keys, headers


class _Diag:
    def __init__(self, source: str, text: str):
        self.source = source
        self.keys, self.headers = _line_index(text)
        self.messages: list[str] = []

    def error(self, section: str, key: str | None, message: str):
        line = self.keys.get((section, key)) if key else None
        if line is None:
            line = self.headers.get((section,))
        where = f"{self.source}:{line}" if line else self.source
        dotted = ".".join(x for x in (section, key) if x)
        self.messages.append(f"{where}: {dotted}: {message}")


def _check_table(diag: _Diag, section: str, schema_key: str, table: dict) -> dict:
    schema = SCHEMA[schema_key]
    out = {}
    for key, value in table.items():
        if key not in schema:
            diag.error(section, key, f"unknown key (expected one of {', '.join(sorted(schema))})")
            continue
        types = schema[key]
        if isinstance(value, bool) and bool not in types:
            diag.error(section, key, f"expected {types[0].__name__}, got bool")
            continue
        if not isinstance(value, types):
            diag.error(section, key, f"expected {types[0].__name__}, got {type(value).__name__}")
            continue
        out[key] = float(value) if types is NUM else value
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate TOML ``text``; raises :class:`ConfigError` listing every problem."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        where = f"{source}:{m.group(1)}" if m else source
        raise ConfigError([f"{where}: syntax error: {exc}"]) from None
    diag = _Diag(source, text)
    for section in raw:
        if section not in SCHEMA or section == "solver.rspg":
            diag.error(section, None, f"unknown section (expected one of {', '.join(s for s in SCHEMA if '.' not in s)})")

    def table(name):
        value = raw.get(name, {})
        if not isinstance(value, dict):
            diag.error(name, None, "expected a table")
            return {}
        return _check_table(diag, name, name, value)

    cal = table("calibration")
    model = table("model")
    support = table("support")
    solver = table("solver")
    truth = table("truth") if "truth" in raw else None
    data = table("data")
    cov = table("coverage")
    sweep = table("sweep")
    t1 = table("table1")

    rspg = _check_table(diag, "solver.rspg", "solver.rspg", solver.pop("rspg", {}))
    for key in ("N", "S", "M", "M_post"):
        if key in rspg and rspg[key] < 1:
            diag.error("solver.rspg", key, "must be a positive integer")

    objectives = []
    obj_raw = raw.get("objective", [])
    if not isinstance(obj_raw, list):
        diag.error("objective", None, "use [[objective]] array-of-tables")
        obj_raw = []
    for i, o in enumerate(obj_raw):
        sec = f"objective[{i}]"
        o = _check_table(diag, sec, "objective", o)
        for req in ("name", "model"):
            if req not in o:
                diag.error(sec, None, f"missing required key {req!r}")
        if "model" in o and o["model"] not in BUILTIN_MAPS:
            diag.error(sec, "model", f"unknown model {o['model']!r} (known: {', '.join(sorted(BUILTIN_MAPS))})")
        if "name" in o and "model" in o:
            objectives.append(ObjectiveSpec(o["name"], o["model"], dict(o.get("params", {}))))

    if "output" in model and model["output"] not in BUILTIN_MAPS:
        diag.error("model", "output", f"unknown model {model['output']!r}")
    if "bounds_mode" in cal and cal["bounds_mode"] not in MODES:
        diag.error("calibration", "bounds_mode", f"must be one of {', '.join(MODES)}")
    if "algorithm" in solver:
        solver["algorithm"] = solver["algorithm"].replace("-", "_")
        if solver["algorithm"] not in ALGORITHMS:
            diag.error("solver", "algorithm", f"must be one of {', '.join(ALGORITHMS)}")
    for name, dist in (("support", support), ("truth", truth)):
        if dist is not None and dist and dist.get("name") not in DIST_NAMES:
            diag.error(name, "name", f"must be one of {', '.join(DIST_NAMES)}")
    if truth is not None and truth.get("name") == "points":
        diag.error("truth", "name", "a truth model must be a continuous distribution")
    if truth is not None and not truth:
        diag.error("truth", None, "empty truth table")
    if "senses" in cal and not all(s in ("min", "max") for s in cal["senses"]):
        diag.error("calibration", "senses", "entries must be 'min' or 'max'")

    levels = ()
    if "levels" in sweep:
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in sweep["levels"]):
            diag.error("sweep", "levels", "levels must be numbers")
        else:
            levels = tuple(float(v) for v in sweep["levels"])
    elif {"start", "stop", "step"} <= sweep.keys():
        count = int(round((sweep["stop"] - sweep["start"]) / sweep["step"])) + 1
        levels = tuple(round(sweep["start"] + i * sweep["step"], 12) for i in range(max(count, 0)))
    elif sweep:
        diag.error("sweep", None, "give either levels or start/stop/step")
    if levels and any(b <= a for a, b in zip(levels, levels[1:])):
        diag.error("sweep", "levels", "levels must be strictly increasing")

    cells = ()
    if "cells" in t1:
        try:
            cells = tuple((int(m), int(n)) for m, n in t1["cells"])
        except (TypeError, ValueError):
            diag.error("table1", "cells", "cells must be a list of [m, n] integer pairs")
    t1_a = {}
    for key, value in t1.get("a", {}).items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            diag.error("table1.a", key, "step constant must be a number")
        else:
            t1_a[key] = float(value)

    spec = None
    if not diag.messages:
        kwargs = {k: cal[k] for k in ("m", "alpha", "bounds_mode", "delta", "seed", "workers") if k in cal}
        if "senses" in cal:
            kwargs["senses"] = tuple(cal["senses"])
        try:
            spec = CalibrationSpec(
                output_model=model.get("output", "mg1_wait20"),
                output_params=dict(model.get("params", {})),
                objectives=tuple(objectives) or CalibrationSpec().objectives,
                support=support or CalibrationSpec().support,
                solver=SolverConfig(rspg=RspgParams(**rspg), **solver),
                **kwargs,
            )
        except (ValueError, TypeError) as exc:
            diag.error("calibration", None, str(exc))
    if "seed" in cal and not 0 <= cal["seed"] < 2**64:
        diag.error("calibration", "seed", "must be a 64-bit unsigned integer")
    if diag.messages:
        raise ConfigError(diag.messages)
    return RunConfig(
        spec=spec,
        truth=truth,
        data_path=data.get("path"),
        n=data.get("n"),
        replications=int(cov.get("replications", 20)),
        truth_value=cov.get("truth_value"),
        oracle_reps=int(cov.get("oracle_reps", 1_000_000)),
        levels=levels,
        table1_cells=cells,
        table1_a=t1_a,
        workers=cal.get("workers"),
        source=source,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config: {exc.strerror or exc}"]) from None
    cfg = parse_config(text, str(path))
    if cfg.data_path is not None and not Path(cfg.data_path).is_absolute():
        cfg = replace(cfg, data_path=str(path.parent / cfg.data_path))
    return cfg
