"""Stochastic quadratic-penalty solvers on the restricted simplex.

The constrained program ``min/max E_p[g]`` s.t. ``lower_j <= E_p[I(h <= y_j)] <= upper_j``
is attacked through the penalised objective

    lambda * E_p[g] + sum_j (E_p[I(h <= y_j)] - s_j)^2,   lower <= s <= upper,

with the penalty coefficient ``lambda`` driven to zero along the iterations.
Four algorithms are provided:

``mdsa``
    Mirror-descent SA with slack variables and decaying schedules
    ``gamma_k = a/k^alpha1``, ``beta_k = b/k^alpha2``, ``lambda_k = c/k^alpha3``.
``alt_mdsa``
    No slacks; the projection ``Pi_j`` is applied to a fresh plug-in estimate
    whose batch grows like ``ceil(b k^alpha2)``.
``rspg``
    Fixed step and penalty, stopped at a uniformly random iteration.
``two_phase_rspg``
    Several independent RSPG runs followed by a large-batch probe step that
    picks the candidate with the smallest generalised gradient.

Maximisation flips the sign of the objective-gradient contribution only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .gradients import (
    GradientSample,
    clip_gradient,
    objective_gradient_from_batch,
    penalty_gradient_p_from_batches,
    penalty_gradient_s_from_batches,
    projected_penalty_gradient_from_batches,
    simulate_batch,
)
from .models import SupportSet, estimate_expectation, estimate_indicator_means
from .rng import Purpose, RngStream
from .simplex import entropic_prox_step, project_to_restricted_simplex, sup_norm_distance
from .uncertainty import KsBounds

__all__ = [
    "ALGORITHMS",
    "Problem",
    "RspgParams",
    "ScheduleViolation",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "alt_mdsa_step",
    "initial_point",
    "mdsa_step",
    "penalty_value",
    "run_alternate_mdsa",
    "run_mdsa",
    "run_multistart",
    "run_rspg",
    "run_two_phase_rspg",
    "score_function_estimator",
    "solve",
    "validate_schedule",
]

ALGORITHMS = ("mdsa", "alt_mdsa", "rspg", "two_phase_rspg")
SENSES = ("min", "max")


@dataclass(frozen=True)
class RspgParams:
    N: int = 30
    S: int = 5
    M: int = 500
    M_post: int = 500
    gamma_bar: float = 0.03
    lambda_fixed: float = 0.03


@dataclass(frozen=True)
class SolverConfig:
    """Schedules, batch sizes and stopping rule.

    For ``alt_mdsa`` the constant ``b`` and exponent ``alpha2`` define the
    growing batch ``M1_k = ceil(b * k**alpha2)`` instead of a slack step size.
    ``eps = None`` lets the caller (usually :mod:`simcal.calibration`) pick
    the simplex floor from ``m`` and ``n``.
    """

    algorithm: str = "mdsa"
    sense: str = "min"
    a: float = 0.2
    b: float = 0.2
    c: float = 1.0
    alpha1: float = 0.8
    alpha2: float = 0.5
    alpha3: float = 0.2
    lambda_schedule: str = "power"
    eps: float | None = None
    M1: int = 100
    M2: int = 100
    M3: int = 100
    stop_tol: float = 5e-4
    max_iters: int = 2000
    trace_batch: int = 1000
    report_batch: int = 100_000
    clip_factor: float = 10.0
    check_invariants: bool = True
    rspg: RspgParams = field(default_factory=RspgParams)

    def gamma(self, k: int) -> float:
        return self.a / k**self.alpha1

    def beta(self, k: int) -> float:
        return self.b / k**self.alpha2

    def lam(self, k: int) -> float:
        if self.lambda_schedule == "log":
            # log(k + 1) keeps the first iterate finite
            return self.c / math.log(k + 1)
        return self.c / k**self.alpha3

    def batch_M1(self, k: int) -> int:
        """Growing residual batch of the alternate MDSA."""
        return int(math.ceil(self.b * k**self.alpha2 - 1e-12))

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScheduleViolation:
    code: str
    message: str


def validate_schedule(config: SolverConfig) -> list[ScheduleViolation]:
    """Check the schedule against the convergence window of the chosen algorithm.

    Returns an empty list when everything is admissible.  Never raises.
    """
    out: list[ScheduleViolation] = []

    def bad(code, message):
        out.append(ScheduleViolation(code, message))

    if config.algorithm not in ALGORITHMS:
        bad("algorithm", f"unknown algorithm {config.algorithm!r}")
        return out
    if config.sense not in SENSES:
        bad("sense", f"unknown sense {config.sense!r}")
    if config.lambda_schedule not in ("power", "log"):
        bad("lambda_schedule", f"unknown lambda schedule {config.lambda_schedule!r}")
    for name in ("M1", "M2", "M3", "max_iters"):
        if getattr(config, name) < 1:
            bad(name, f"{name} must be a positive integer")
    if config.eps is not None and not config.eps > 0:
        bad("eps", "eps must be positive")
    if config.stop_tol < 0:
        bad("stop_tol", "stop_tol must be nonnegative")

    a1, a2, a3 = config.alpha1, config.alpha2, config.alpha3
    if config.algorithm in ("mdsa", "alt_mdsa"):
        for name in ("a", "b", "c"):
            if not getattr(config, name) > 0:
                bad(name, f"{name} must be positive")
        lo1 = 0.75 if config.algorithm == "mdsa" else 0.5
        if not lo1 < a1:
            bad("alpha1", f"alpha1 <= {'3/4' if lo1 == 0.75 else '1/2'}")
        if a1 > 1:
            bad("alpha1", "alpha1 > 1")
        if config.algorithm == "mdsa":
            if not (2 - 2 * a1 < a2 < 2 * a1 - 1):
                bad("alpha2", f"alpha2 outside (2 - 2 alpha1, 2 alpha1 - 1) = ({2 - 2 * a1:g}, {2 * a1 - 1:g})")
        elif not a2 > 2 * (1 - a1):
            bad("alpha2", f"alpha2 <= 2 (1 - alpha1) = {2 * (1 - a1):g}")
        if a1 == 1:
            if config.lambda_schedule != "log":
                bad("lambda_schedule", "alpha1 = 1 requires lambda_k = c / log k")
        elif config.lambda_schedule == "log":
            bad("lambda_schedule", "lambda_k = c / log k is admissible only with alpha1 = 1")
        elif not (0 < a3 <= 1 - a1 + 1e-12):
            bad("alpha3", f"alpha3 outside (0, 1 - alpha1] = (0, {1 - a1:g}]")
    else:
        r = config.rspg
        for name in ("N", "S", "M", "M_post"):
            if getattr(r, name) < 1:
                bad(f"rspg.{name}", f"rspg.{name} must be a positive integer")
        for name in ("gamma_bar", "lambda_fixed"):
            if not getattr(r, name) > 0:
                bad(f"rspg.{name}", f"rspg.{name} must be positive")
    return out


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything a solver run needs besides its configuration."""

    output_map: object
    target_map: object
    support: SupportSet
    bounds: KsBounds

    @property
    def m(self) -> int:
        return self.support.m

    @property
    def n(self) -> int:
        return self.bounds.n


@dataclass(frozen=True)
class TraceRecord:
    k: int
    objective_est: float
    penalty_est: float
    step_sup_norm: float
    lambda_k: float
    gamma_k: float
    beta_k: float


@dataclass
class SolverState:
    """Current iterate ``(p, s)`` after ``k`` completed iterations."""

    p: np.ndarray
    s: np.ndarray | None
    k: int = 0
    trace: list = field(default_factory=list)
    replications: int = 0
    clip_events: int = 0
    converged: bool = False
    status: str = "running"
    objective: float = float("nan")
    objective_se: float = float("nan")
    penalty: float = float("nan")
    tau: int | None = None
    info: dict = field(default_factory=dict)


Estimator = Callable[..., GradientSample]


def _step_gen(rng: RngStream, k: int, purpose: int) -> np.random.Generator:
    """Generator for batch ``purpose`` of iteration ``k``."""
    return rng.generator(0, k, purpose)


def _once_gen(rng: RngStream, purpose: int, index: int = 0) -> np.random.Generator:
    """Generator for draws made once per run (reporting, stopping time, restarts)."""
    return rng.generator(1, purpose, index)


def _bounds_for(problem: Problem, config: SolverConfig) -> float:
    eps = _eps(problem, config)
    return config.clip_factor * max(problem.output_map.horizon, problem.target_map.horizon) / eps


def _eps(problem: Problem, config: SolverConfig) -> float:
    if config.eps is not None:
        eps = config.eps
    else:
        from .calibration import choose_epsilon

        eps = choose_epsilon(problem.m, max(problem.bounds.n_obs, 1))
    if not 0 < eps < 1 / problem.m:
        raise ValueError(f"eps={eps!r} outside (0, 1/m) with m={problem.m}")
    return eps


def score_function_estimator(problem: Problem, p, s, M1: int, M2: int, M3: int, rng: RngStream, k: int,
                             projected: bool = False) -> GradientSample:
    """Draw the three independent batches of iteration ``k`` and form all gradients.

    With ``projected=True`` (alternate MDSA) the penalty gradient uses the
    plug-in projection and no slack gradient is returned.
    """
    first = simulate_batch(problem.output_map, p, problem.support, M1, _step_gen(rng, k, Purpose.X))
    second = simulate_batch(problem.output_map, p, problem.support, M2, _step_gen(rng, k, Purpose.X_TILDE))
    third = simulate_batch(problem.target_map, p, problem.support, M3, _step_gen(rng, k, Purpose.X_TILDE2))
    psi = objective_gradient_from_batch(third)
    if projected:
        phi = projected_penalty_gradient_from_batches(first, second, problem.bounds)
        phi_s = None
    else:
        phi = penalty_gradient_p_from_batches(first, second, problem.bounds, s)
        phi_s = penalty_gradient_s_from_batches(first, second, problem.bounds, s)
    return GradientSample(psi, phi, phi_s, (M1, M2, M3))


def initial_point(problem: Problem, config: SolverConfig, p1=None, s1=None, slack: bool = True):
    """Default start: uniform ``p`` on ``P(eps)`` and slacks at the interval midpoints."""
    eps = _eps(problem, config)
    if p1 is None:
        p = np.full(problem.m, 1.0 / problem.m)
    else:
        p = project_to_restricted_simplex(np.asarray(p1, dtype=float), eps)
    if not slack:
        return p, None
    s = problem.bounds.midpoint() if s1 is None else np.asarray(s1, dtype=float)
    if not problem.bounds.contains(s):
        raise ValueError("initial slacks must lie inside their intervals")
    return p, s.copy()


def _trace_estimates(problem: Problem, config: SolverConfig, p, rng: RngStream, k: int) -> tuple[float, float]:
    if config.trace_batch <= 0:
        return float("nan"), float("nan")
    obj = estimate_expectation(problem.target_map, p, problem.support, config.trace_batch, _step_gen(rng, k, Purpose.TRACE_G))
    u = estimate_indicator_means(problem.output_map, problem.bounds, p, problem.support, config.trace_batch,
                                 _step_gen(rng, k, Purpose.TRACE_H))
    return obj, float(np.sum((u - problem.bounds.project(u)) ** 2))


def _check_state(state: SolverState, problem: Problem, eps: float):
    p = state.p
    if abs(p.sum() - 1.0) > 1e-12 or p.min() < eps - 1e-12:
        raise AssertionError(f"iterate left P(eps) at k={state.k}")
    if state.s is not None and not problem.bounds.contains(state.s, tol=1e-12):
        raise AssertionError(f"slacks left their intervals at k={state.k}")


def _advance(state: SolverState, problem: Problem, config: SolverConfig, rng: RngStream, grads: GradientSample,
             gamma: float, beta: float, lam: float, eps: float) -> SolverState:
    sign = 1.0 if config.sense == "min" else -1.0
    clip_at = _bounds_for(problem, config)
    psi, c1 = clip_gradient(grads.objective_grad, clip_at)
    phi, c2 = clip_gradient(grads.penalty_grad_p, clip_at)
    xi = gamma * (lam * sign * psi + phi)
    p_new = entropic_prox_step(state.p, xi, eps)
    if state.s is not None and grads.penalty_grad_s is not None:
        s_new = problem.bounds.project(state.s - beta * grads.penalty_grad_s)
    else:
        s_new = state.s
    k = state.k + 1
    step = sup_norm_distance(p_new, state.p)
    obj, pen = _trace_estimates(problem, config, p_new, rng, k)
    state.trace.append(TraceRecord(k, obj, pen, step, lam, gamma, beta))
    state.p, state.s, state.k = p_new, s_new, k
    state.replications += sum(grads.batch_sizes)
    state.clip_events += c1 + c2
    if config.check_invariants:
        _check_state(state, problem, eps)
    return state


def mdsa_step(state: SolverState, config: SolverConfig, problem: Problem, rng: RngStream,
              estimator: Estimator = score_function_estimator) -> SolverState:
    """One iteration of slack MDSA (in place; the state is also returned)."""
    k = state.k + 1
    eps = _eps(problem, config)
    grads = estimator(problem, state.p, state.s, config.M1, config.M2, config.M3, rng, k)
    return _advance(state, problem, config, rng, grads, config.gamma(k), config.beta(k), config.lam(k), eps)


def alt_mdsa_step(state: SolverState, config: SolverConfig, problem: Problem, rng: RngStream,
                  estimator: Estimator = score_function_estimator) -> SolverState:
    k = state.k + 1
    eps = _eps(problem, config)
    grads = estimator(problem, state.p, None, config.batch_M1(k), config.M2, config.M3, rng, k, projected=True)
    return _advance(state, problem, config, rng, grads, config.gamma(k), 0.0, config.lam(k), eps)


def _finish(state: SolverState, problem: Problem, config: SolverConfig, rng: RngStream) -> SolverState:
    if state.status == "running":
        state.status = "converged" if state.converged else "max_iters"
    if config.report_batch > 0:
        state.objective, state.objective_se = estimate_expectation(
            problem.target_map, state.p, problem.support, config.report_batch, _once_gen(rng, Purpose.REPORT, 0),
            return_se=True)
        state.penalty = penalty_value(state.p, problem.support, problem.output_map, problem.bounds,
                                      config.report_batch, _once_gen(rng, Purpose.REPORT, 1))
    return state


def _iterate(step, state, config, problem, rng, estimator):
    while state.k < config.max_iters:
        previous = state.p
        step(state, config, problem, rng, estimator)
        if sup_norm_distance(state.p, previous) <= config.stop_tol:
            state.converged = True
            break
    return _finish(state, problem, config, rng)


def _require_valid(config: SolverConfig):
    violations = validate_schedule(config)
    if violations:
        raise ValueError("invalid schedule: " + "; ".join(v.message for v in violations))


def run_mdsa(problem: Problem, config: SolverConfig, rng: RngStream, p1=None, s1=None,
             estimator: Estimator = score_function_estimator) -> SolverState:
    """Slack MDSA until ``||p_{k+1} - p_k||_inf <= stop_tol`` or ``max_iters``.

    Non-convergence is reported through ``state.converged`` and
    ``state.status``, never raised.
    """
    _require_valid(config)
    p, s = initial_point(problem, config, p1, s1)
    state = SolverState(p, s, info={"algorithm": "mdsa", "sense": config.sense})
    return _iterate(mdsa_step, state, config, problem, rng, estimator)


def run_alternate_mdsa(problem: Problem, config: SolverConfig, rng: RngStream, p1=None,
                       estimator: Estimator = score_function_estimator) -> SolverState:
    _require_valid(config)
    p, _ = initial_point(problem, config, p1, slack=False)
    state = SolverState(p, None, info={"algorithm": "alt_mdsa", "sense": config.sense})
    return _iterate(alt_mdsa_step, state, config, problem, rng, estimator)


def _rspg_step(state, config, problem, rng, estimator, M):
    r = config.rspg
    k = state.k + 1
    grads = estimator(problem, state.p, state.s, M, M, M, rng, k)
    return _advance(state, problem, config, rng, grads, r.gamma_bar, r.gamma_bar, r.lambda_fixed, _eps(problem, config))


def run_rspg(problem: Problem, config: SolverConfig, rng: RngStream, p1=None, s1=None,
             estimator: Estimator = score_function_estimator, finish: bool = True) -> SolverState:
    """Single RSPG run: ``tau - 1`` fixed-step iterations with ``tau ~ U{1, ..., N}``."""
    _require_valid(config)
    r = config.rspg
    tau = int(_once_gen(rng, Purpose.TAU).integers(1, r.N + 1))
    p, s = initial_point(problem, config, p1, s1)
    state = SolverState(p, s, tau=tau, info={"algorithm": "rspg", "sense": config.sense})
    for _ in range(tau - 1):
        _rspg_step(state, config, problem, rng, estimator, r.M)
    state.converged = True
    state.status = "converged"
    return _finish(state, problem, config, rng) if finish else state


def run_two_phase_rspg(problem: Problem, config: SolverConfig, rng: RngStream, p1=None, s1=None,
                       estimator: Estimator = score_function_estimator) -> SolverState:
    """``S`` independent RSPG runs, then a probe step of batch ``M_post`` at each output.

    Picks ``argmin ||(p' - p)/gamma||_1^2 + ||(s' - s)/gamma||_2^2``; ties go
    to the lowest run index.
    """
    _require_valid(config)
    r = config.rspg
    candidates = [run_rspg(problem, config, rng.substream(run), p1, s1, estimator, finish=False) for run in range(r.S)]
    scores = []
    for run, cand in enumerate(candidates):
        probe = SolverState(cand.p.copy(), None if cand.s is None else cand.s.copy(), k=cand.k)
        _rspg_step(probe, config, problem, rng.substream(r.S + run), estimator, r.M_post)
        gp = (probe.p - cand.p) / r.gamma_bar
        gs = np.zeros(1) if cand.s is None else (probe.s - cand.s) / r.gamma_bar
        scores.append(float(np.sum(np.abs(gp)) ** 2 + np.sum(gs**2)))
        cand.replications += probe.replications
    best = int(np.argmin(scores))
    chosen = candidates[best]
    chosen.info.update({
        "algorithm": "two_phase_rspg",
        "selection_scores": scores,
        "selected_run": best,
        "taus": [c.tau for c in candidates],
        "candidate_replications": [c.replications for c in candidates],
    })
    chosen.replications = sum(c.replications for c in candidates)
    return _finish(chosen, problem, config, rng)


_RUNNERS = {
    "mdsa": run_mdsa,
    "alt_mdsa": lambda problem, config, rng, p1=None, s1=None, estimator=score_function_estimator:
        run_alternate_mdsa(problem, config, rng, p1, estimator),
    "rspg": run_rspg,
    "two_phase_rspg": run_two_phase_rspg,
}


def solve(problem: Problem, config: SolverConfig, rng: RngStream, p1=None, s1=None,
          estimator: Estimator = score_function_estimator) -> SolverState:
    """Dispatch to the runner named by ``config.algorithm``."""
    try:
        runner = _RUNNERS[config.algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {config.algorithm!r}") from None
    return runner(problem, config, rng, p1, s1, estimator=estimator)


def run_multistart(problem: Problem, config: SolverConfig, rng: RngStream, restarts: int) -> dict:
    """Independent restarts from Dirichlet(1, ..., 1) draws projected onto ``P(eps)``."""
    eps = _eps(problem, config)
    states = []
    for r in range(restarts):
        p1 = project_to_restricted_simplex(_once_gen(rng, Purpose.INIT, r).dirichlet(np.ones(problem.m)) + 1e-300, eps)
        states.append(solve(problem, config, rng.substream(Purpose.INIT, r), p1))
    values = np.array([st.objective for st in states])
    best = int(np.argmin(values) if config.sense == "min" else np.argmax(values))
    return {
        "states": states,
        "best": states[best],
        "best_index": best,
        "values": values,
        "spread": (float(values.min()), float(values.max())),
    }


def penalty_value(p, support: SupportSet, h, bounds: KsBounds, M: int, rng) -> float:
    """Plug-in ``sum_j (u_j - Pi_j(u_j))^2`` with ``u`` from ``M`` replications."""
    if M < 1:
        raise ValueError("M must be at least 1")
    u = estimate_indicator_means(h, bounds, p, support, M, rng)
    return float(np.sum((u - bounds.project(u)) ** 2))
