"""Score-function (likelihood-ratio) gradient estimators on the simplex.

All gradients are Gateaux derivatives along ``(1 - t) p + t e_i``; for an
expectation ``E_p[f(X)]`` over an i.i.d. sequence of length ``T`` the
derivative is ``E_p[f(X) S_i(X; p)]`` with the score factor
``S_i = #{t: X_t = z_i} / p_i - T``.

The slack-variable estimators are unbiased; :func:`estimate_penalty_gradient_projected`
plugs a sample mean into the projection and is biased for finite ``M1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import SupportSet, as_generator, score_from_indices, simulate_discrete
from .uncertainty import KsBounds

__all__ = [
    "GradientSample",
    "IndicatorBatch",
    "clip_gradient",
    "estimate_objective_gradient",
    "estimate_penalty_gradient_p",
    "estimate_penalty_gradient_projected",
    "estimate_penalty_gradient_s",
    "objective_gradient_from_batch",
    "penalty_gradient_p_from_batches",
    "penalty_gradient_s_from_batches",
    "projected_penalty_gradient_from_batches",
    "simulate_batch",
]


@dataclass(frozen=True)
class IndicatorBatch:
    """One batch of replications: outputs, drawn indices, and score factors."""

    outputs: np.ndarray
    indices: np.ndarray
    scores: np.ndarray

    @property
    def size(self) -> int:
        return self.outputs.size


@dataclass(frozen=True)
class GradientSample:
    objective_grad: np.ndarray
    penalty_grad_p: np.ndarray
    penalty_grad_s: np.ndarray | None
    batch_sizes: tuple

    def __post_init__(self):
        for name in ("objective_grad", "penalty_grad_p", "penalty_grad_s"):
            v = getattr(self, name)
            if v is not None and not np.all(np.isfinite(v)):
                raise FloatingPointError(f"{name} has non-finite entries")


def _positive(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("score-function gradients need strictly positive weights")
    return p


def simulate_batch(model_map, p, support: SupportSet, size: int, rng) -> IndicatorBatch:
    if size < 1:
        raise ValueError("batch size must be at least 1")
    p = _positive(p)
    outputs, idx = simulate_discrete(model_map, p, support, size, as_generator(rng))
    return IndicatorBatch(outputs, idx, score_from_indices(idx, p))


def objective_gradient_from_batch(batch: IndicatorBatch) -> np.ndarray:
    """``(1/M) sum_r g(X_r) S(X_r)``."""
    return batch.outputs @ batch.scores / batch.size


def estimate_objective_gradient(p, support: SupportSet, g, M3: int, rng) -> np.ndarray:
    """Unbiased estimate of the Gateaux gradient of ``E_p[g(X)]``."""
    return objective_gradient_from_batch(simulate_batch(g, p, support, M3, rng))


def penalty_gradient_p_from_batches(first: IndicatorBatch, second: IndicatorBatch, bounds: KsBounds, s) -> np.ndarray:
    """``2 sum_j (u_j - s_j) (1/M2) sum_r I_j(X~_r) S(X~_r)`` with ``u`` from ``first``.

    The residual and the score term come from independent batches, which is
    what makes the product unbiased.
    """
    residual = bounds.indicator_means(first.outputs) - np.asarray(s, dtype=float)
    w = bounds.weighted_indicator_sum(second.outputs, residual)
    return 2.0 * (w @ second.scores) / second.size


def penalty_gradient_s_from_batches(first: IndicatorBatch, second: IndicatorBatch, bounds: KsBounds, s) -> np.ndarray:
    """``-2/(M1+M2) sum_r (I_j(h_r) - s_j)`` pooled over both batches."""
    s = np.asarray(s, dtype=float)
    M1, M2 = first.size, second.size
    hits = bounds.indicator_means(first.outputs) * M1 + bounds.indicator_means(second.outputs) * M2
    return -2.0 * (hits - (M1 + M2) * s) / (M1 + M2)


def projected_penalty_gradient_from_batches(first: IndicatorBatch, second: IndicatorBatch, bounds: KsBounds) -> np.ndarray:
    """Plug-in ``2 sum_j (u_j - Pi_j(u_j)) (1/M2) sum_r I_j(X~_r) S(X~_r)``."""
    u = bounds.indicator_means(first.outputs)
    w = bounds.weighted_indicator_sum(second.outputs, u - bounds.project(u))
    return 2.0 * (w @ second.scores) / second.size


def estimate_penalty_gradient_p(p, support: SupportSet, h, bounds: KsBounds, s, M1: int, M2: int, rng):
    """Unbiased ``p``-gradient of ``sum_j (E_p[I(h <= y_j)] - s_j)^2``.

    ``rng`` is a pair of generators (or anything with two independent
    draws), one per batch; passing a single generator draws both batches
    from it in sequence.
    """
    g1, g2 = _two(rng)
    first = simulate_batch(h, p, support, M1, g1)
    second = simulate_batch(h, p, support, M2, g2)
    return penalty_gradient_p_from_batches(first, second, bounds, s)


def estimate_penalty_gradient_s(first: IndicatorBatch, second: IndicatorBatch, bounds: KsBounds, s) -> np.ndarray:
    """Unbiased ``s``-gradient, reusing the two batches of the ``p`` step."""
    return penalty_gradient_s_from_batches(first, second, bounds, s)


def estimate_penalty_gradient_projected(p, support: SupportSet, h, bounds: KsBounds, M1: int, M2: int, rng) -> np.ndarray:
    g1, g2 = _two(rng)
    first = simulate_batch(h, p, support, M1, g1)
    second = simulate_batch(h, p, support, M2, g2)
    return projected_penalty_gradient_from_batches(first, second, bounds)


def _two(rng):
    if isinstance(rng, (tuple, list)):
        return as_generator(rng[0]), as_generator(rng[1])
    gen = as_generator(rng)
    return gen, gen


def clip_gradient(v, bound: float) -> tuple[np.ndarray, int]:
    """Clip components to ``[-bound, bound]``; returns the clipped vector and the clip count."""
    v = np.asarray(v, dtype=float)
    n_clipped = int(np.count_nonzero(np.abs(v) > bound))
    if n_clipped:
        v = np.clip(v, -bound, bound)
    return v, n_clipped
