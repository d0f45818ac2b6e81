"""Simulable input-output maps driven by discrete input distributions.

A :class:`SimulationMap` consumes a batch of i.i.d. input sequences, shape
``(M, horizon)``, together with auxiliary draws from known distributions, and
returns one real output per replication.  The decision variable of every
program is a probability vector over the points of a :class:`SupportSet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .rng import RngStream

__all__ = [
    "BUILTIN_MAPS",
    "BetaMixtureInput",
    "CdfIndicator",
    "ConstantMap",
    "ExponentialInput",
    "FunctionMap",
    "LognormalInput",
    "Mg1QueueLength",
    "Mg1Wait",
    "PointsInput",
    "SimulationMap",
    "SupportSet",
    "SystemModel",
    "UniformInput",
    "as_generator",
    "cdf_indicator_target",
    "draw_input_indices",
    "draw_input_sequence",
    "estimate_expectation",
    "estimate_indicator_means",
    "make_distribution",
    "make_map",
    "mg1_queue_length_target",
    "mg1_waiting_output",
    "score_factor",
    "score_from_indices",
    "simulate_continuous",
    "simulate_discrete",
]

CHUNK = 50_000


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# support sets and discrete draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SupportSet:
    """The ``m`` points on which candidate input distributions live."""

    points: np.ndarray
    generator_desc: dict = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a support set needs at least two points")
        if not np.all(np.isfinite(points)):
            raise ValueError("support points must be finite")
        object.__setattr__(self, "points", points)

    @property
    def m(self) -> int:
        return self.points.size

    def index_of(self, values) -> np.ndarray:
        """Map input values back to support indices; raises if any value is off-support."""
        values = np.asarray(values, dtype=float)
        order = np.argsort(self.points, kind="stable")
        sp = self.points[order]
        pos = np.clip(np.searchsorted(sp, values), 0, sp.size - 1)
        if not np.all(sp[pos] == values):
            raise ValueError("input value not in the support set")
        return order[pos]


def _weights(p, m: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (m,):
        raise ValueError(f"probability vector has shape {p.shape}, support has {m} points")
    return p


def draw_input_indices(p, horizon: int, size: int, rng) -> np.ndarray:
    """``(size, horizon)`` i.i.d. support indices with ``P(index = i) = p_i``."""
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = as_generator(rng).random((size, horizon))
    return np.searchsorted(cdf, u, side="right")


def draw_input_sequence(p, support: SupportSet, horizon: int, rng, size: int | None = None) -> np.ndarray:
    """An i.i.d. input sequence (or ``size`` of them) under ``p`` on ``support``."""
    _weights(p, support.m)
    idx = draw_input_indices(p, horizon, 1 if size is None else size, rng)
    x = support.points[idx]
    return x[0] if size is None else x


def score_from_indices(idx, p) -> np.ndarray:
    """Score factors ``S_i = (#{t: x_t = z_i}) / p_i - T`` for each row of ``idx``."""
    idx = np.atleast_2d(idx)
    M, T = idx.shape
    m = len(p)
    rows = np.repeat(np.arange(M), T)
    counts = np.bincount(idx.ravel() + m * rows, minlength=M * m).reshape(M, m)
    return counts / np.asarray(p, dtype=float) - T


def score_factor(x, p, support: SupportSet) -> np.ndarray:
    """Score factor vector ``(S_1, ..., S_m)`` of one input sequence ``x``."""
    p = _weights(p, support.m)
    if np.any(p <= 0):
        raise ValueError("score factor undefined at a zero weight")
    idx = support.index_of(np.atleast_1d(x))
    return score_from_indices(idx[None, :], p)[0]


# ---------------------------------------------------------------------------
# M/G/1 with unit-rate Poisson arrivals, empty at time zero
# ---------------------------------------------------------------------------


def _check_service(service):
    service = np.asarray(service, dtype=float)
    if np.any(service < 0):
        raise ValueError("negative service time")
    return service


def _lindley(service, interarrivals):
    service = _check_service(service)
    interarrivals = np.asarray(interarrivals, dtype=float)
    T = service.shape[-1]
    if interarrivals.shape[-1] != T - 1:
        raise ValueError(f"need {T - 1} interarrival times for {T} customers")
    waits = np.zeros(service.shape)
    for t in range(T - 1):
        waits[..., t + 1] = np.maximum(waits[..., t] + service[..., t] - interarrivals[..., t], 0.0)
    return service, interarrivals, waits


def mg1_waiting_output(service, interarrivals) -> np.ndarray:
    """Average waiting time in queue of the first ``T`` customers.

    ``W_1 = 0`` and ``W_{t+1} = max(W_t + V_t - A_{t+1}, 0)``.  Works on a
    single sequence or on the last axis of a batch.
    """
    _, _, waits = _lindley(service, interarrivals)
    return waits.mean(axis=-1)


def mg1_queue_length_target(service, interarrivals, count_in_service: bool = True) -> np.ndarray:
    """Average queue length seen at arrival by each of the first ``T`` customers.

    Customer ``j`` counts every earlier customer ``i`` still in the system at
    its arrival epoch ``A_j``, i.e. with departure ``A_i + W_i + V_i > A_j``.
    With ``count_in_service=False`` only the waiting line is counted
    (``A_i + W_i > A_j``).
    """
    service, interarrivals, waits = _lindley(service, interarrivals)
    T = service.shape[-1]
    arrivals = np.zeros(service.shape)
    arrivals[..., 1:] = np.cumsum(interarrivals, axis=-1)
    leave = arrivals + waits
    if count_in_service:
        leave = leave + service
    earlier = np.tril(np.ones((T, T), dtype=bool), k=-1)
    seen = (leave[..., None, :] > arrivals[..., :, None]) & earlier
    return seen.sum(axis=-1).mean(axis=-1)


def cdf_indicator_target(x, a: float) -> np.ndarray:
    """``I(x_1 <= a)`` for a sequence (or the first column of a batch)."""
    x = np.asarray(x, dtype=float)
    return (x[..., 0] <= a).astype(float)


# ---------------------------------------------------------------------------
# simulation maps
# ---------------------------------------------------------------------------


class SimulationMap(Protocol):
    horizon: int

    def draw_auxiliary(self, rng: np.random.Generator, size: int): ...

    def __call__(self, inputs: np.ndarray, aux) -> np.ndarray: ...


@dataclass(frozen=True)
class Mg1Wait:
    """Observed output: average wait of the first ``customers`` customers."""

    customers: int = 20
    arrival_rate: float = 1.0

    @property
    def horizon(self) -> int:
        return self.customers

    def draw_auxiliary(self, rng, size):
        return rng.exponential(1.0 / self.arrival_rate, (size, self.customers - 1))

    def __call__(self, inputs, aux):
        return mg1_waiting_output(inputs, aux)


@dataclass(frozen=True)
class Mg1QueueLength:
    """Target: average queue length seen by the first ``customers`` arrivals."""

    customers: int = 20
    arrival_rate: float = 1.0
    count_in_service: bool = True

    @property
    def horizon(self) -> int:
        return self.customers

    def draw_auxiliary(self, rng, size):
        return rng.exponential(1.0 / self.arrival_rate, (size, self.customers - 1))

    def __call__(self, inputs, aux):
        return mg1_queue_length_target(inputs, aux, self.count_in_service)


@dataclass(frozen=True)
class CdfIndicator:
    """Target ``I(X_1 <= level)``; its expectation is the input CDF at ``level``."""

    level: float
    horizon: int = 1

    def draw_auxiliary(self, rng, size):
        return None

    def __call__(self, inputs, aux):
        return cdf_indicator_target(inputs, self.level)


@dataclass(frozen=True)
class ConstantMap:
    value: float = 1.0
    horizon: int = 1

    def draw_auxiliary(self, rng, size):
        return None

    def __call__(self, inputs, aux):
        return np.full(np.shape(inputs)[0], float(self.value))


@dataclass(frozen=True)
class FunctionMap:
    """Wrap a plain callable ``func(inputs, aux) -> outputs``.

    ``aux_sampler(rng, size)`` draws the auxiliary streams, or is ``None``.
    Both must be module-level functions if runs are sent to worker processes.
    """

    func: Callable
    horizon: int
    aux_sampler: Callable | None = None

    def draw_auxiliary(self, rng, size):
        return None if self.aux_sampler is None else self.aux_sampler(rng, size)

    def __call__(self, inputs, aux):
        return np.asarray(self.func(inputs, aux), dtype=float)


BUILTIN_MAPS = {
    "mg1_wait20": lambda: Mg1Wait(20),
    "mg1_queuelen20": lambda count_in_service=True: Mg1QueueLength(20, count_in_service=bool(count_in_service)),
    "cdf_indicator": lambda level: CdfIndicator(float(level)),
    "constant": lambda value=1.0: ConstantMap(float(value)),
}


def make_map(name: str, **params) -> SimulationMap:
    try:
        factory = BUILTIN_MAPS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {sorted(BUILTIN_MAPS)}") from None
    return factory(**params)


@dataclass(frozen=True)
class SystemModel:
    """Observed output map ``h`` (horizon T) and target map ``g`` (horizon S)."""

    output_map: SimulationMap
    target_map: SimulationMap

    @property
    def horizon_T(self) -> int:
        return self.output_map.horizon

    @property
    def horizon_S(self) -> int:
        return self.target_map.horizon


# ---------------------------------------------------------------------------
# Monte Carlo under a discrete or a continuous input distribution
# ---------------------------------------------------------------------------


def simulate_discrete(model_map: SimulationMap, p, support: SupportSet, size: int, rng):
    """Run ``size`` replications under ``p``.

    Returns ``(outputs, indices)`` with the drawn support indices kept for
    score factors.  Input and auxiliary draws come from the same generator,
    inputs first.
    """
    gen = as_generator(rng)
    idx = draw_input_indices(p, model_map.horizon, size, gen)
    aux = model_map.draw_auxiliary(gen, size)
    return model_map(support.points[idx], aux), idx


def _chunked_outputs(draw, size: int):
    out = []
    done = 0
    while done < size:
        k = min(CHUNK, size - done)
        out.append(draw(k))
        done += k
    return np.concatenate(out)


def estimate_expectation(model_map: SimulationMap, p, support: SupportSet, M: int, rng, return_se: bool = False):
    """Sample mean of ``model_map`` over ``M`` replications under ``p``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    _weights(p, support.m)
    gen = as_generator(rng)
    y = _chunked_outputs(lambda k: simulate_discrete(model_map, p, support, k, gen)[0], M)
    mean = float(y.mean())
    if return_se:
        return mean, float(y.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return mean


def estimate_indicator_means(model_map: SimulationMap, bounds, p, support: SupportSet, M: int, rng) -> np.ndarray:
    """All ``n`` threshold means ``(1/M) sum_r I(h(X_r) <= y_j)`` from one batch."""
    gen = as_generator(rng)
    y = _chunked_outputs(lambda k: simulate_discrete(model_map, p, support, k, gen)[0], M)
    return bounds.indicator_means(y)


# ---------------------------------------------------------------------------
# input distributions (truth models and support generators)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialInput:
    rate: float

    def sample(self, rng, shape):
        return rng.exponential(1.0 / self.rate, shape)

    def cdf(self, a):
        return np.where(np.asarray(a) < 0, 0.0, 1.0 - np.exp(-self.rate * np.maximum(a, 0.0)))

    def describe(self) -> dict:
        return {"name": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class BetaMixtureInput:
    """Equal-or-weighted mixture of beta distributions on ``[0, 1]``."""

    components: tuple = ((9.0, 3.0), (3.0, 9.0))
    weights: tuple = (0.5, 0.5)

    def sample(self, rng, shape):
        w = np.asarray(self.weights, dtype=float)
        comp = np.searchsorted(np.cumsum(w) / w.sum(), rng.random(shape), side="right")
        out = np.empty(shape)
        for k, (a, b) in enumerate(self.components):
            sel = comp == k
            out[sel] = rng.beta(a, b, int(sel.sum()))
        return out

    def cdf(self, a):
        from scipy import stats

        w = np.asarray(self.weights, dtype=float)
        w = w / w.sum()
        return sum(wk * stats.beta.cdf(a, ca, cb) for wk, (ca, cb) in zip(w, self.components))

    def describe(self) -> dict:
        return {"name": "beta_mixture", "components": [list(c) for c in self.components], "weights": list(self.weights)}


@dataclass(frozen=True)
class LognormalInput:
    mu: float = 0.0
    sigma: float = 1.0

    def sample(self, rng, shape):
        return rng.lognormal(self.mu, self.sigma, shape)

    def cdf(self, a):
        from scipy import stats

        return stats.lognorm.cdf(a, s=self.sigma, scale=math.exp(self.mu))

    def describe(self) -> dict:
        return {"name": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class UniformInput:
    lo: float = 0.0
    hi: float = 1.0

    def sample(self, rng, shape):
        return rng.uniform(self.lo, self.hi, shape)

    def cdf(self, a):
        return np.clip((np.asarray(a, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def describe(self) -> dict:
        return {"name": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class PointsInput:
    """An explicit list of support points, used verbatim (no sampling)."""

    points: tuple

    def describe(self) -> dict:
        return {"name": "points", "points": list(self.points)}


def make_distribution(spec: dict):
    """Build an input distribution from ``{"name": ..., **params}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "exponential":
        return ExponentialInput(float(spec.get("rate", 1.0)))
    if name == "beta_mixture":
        comps = tuple(tuple(map(float, c)) for c in spec.get("components", ((9, 3), (3, 9))))
        w = np.asarray(spec.get("weights", (1.0,) * len(comps)), dtype=float)
        if w.shape != (len(comps),) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("beta_mixture weights must be nonnegative, one per component")
        return BetaMixtureInput(comps, tuple(float(x) for x in w / w.sum()))
    if name == "lognormal":
        return LognormalInput(float(spec.get("mu", 0.0)), float(spec.get("sigma", 1.0)))
    if name == "uniform":
        return UniformInput(float(spec.get("lo", 0.0)), float(spec.get("hi", 1.0)))
    if name == "points":
        return PointsInput(tuple(map(float, spec["points"])))
    raise ValueError(f"unsupported distribution {name!r}")


def simulate_continuous(model_map: SimulationMap, dist, size: int, rng) -> np.ndarray:
    """Outputs of ``model_map`` with inputs drawn from a continuous ``dist``."""
    gen = as_generator(rng)

    def draw(k):
        x = dist.sample(gen, (k, model_map.horizon))
        return model_map(x, model_map.draw_auxiliary(gen, k))

    return _chunked_outputs(draw, size)
