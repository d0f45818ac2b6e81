"""Probability-vector arithmetic on the (restricted) simplex.

The restricted simplex ``P(eps)`` is the set of probability vectors whose
coordinates are all at least ``eps``.  The entropic prox step below is the
inner kernel of every solver in :mod:`simcal.solvers`.

Note the argument order of :func:`kl_divergence`: ``V(p, q) = sum q log(q/p)``,
i.e. the *second* argument sits in the numerator.  This is the reverse of the
usual ``KL(p || q)`` notation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfiniteDivergenceError",
    "IntervalProjector",
    "check_probability_vector",
    "entropic_prox_step",
    "kl_divergence",
    "project_interval",
    "project_to_restricted_simplex",
    "sup_norm_distance",
]

SUM_TOL = 1e-12


class InfiniteDivergenceError(ValueError):
    """Raised when ``V(p, q)`` is infinite (``q_i > 0`` where ``p_i = 0``)."""


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return p, q


def check_probability_vector(p, eps: float = 0.0, tol: float = SUM_TOL) -> np.ndarray:
    """Validate ``p`` as a member of ``P(eps)`` and return it as an array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector has non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"weights sum to {p.sum()!r}, not 1")
    if p.min() < eps - tol:
        raise ValueError(f"minimum weight {p.min()!r} below floor {eps!r}")
    return p


def kl_divergence(p, q) -> float:
    """KL divergence ``V(p, q) = sum_i q_i log(q_i / p_i)``.

    Terms with ``q_i = 0`` contribute zero.  Raises
    :class:`InfiniteDivergenceError` if some ``q_i > 0`` meets ``p_i = 0``.
    """
    p, q = _pair(p, q)
    support = q > 0
    if np.any(p[support] <= 0):
        raise InfiniteDivergenceError("q_i > 0 where p_i = 0")
    qs = q[support]
    return float(np.sum(qs * (np.log(qs) - np.log(p[support]))))


def sup_norm_distance(p, q) -> float:
    """``max_i |p_i - q_i|``."""
    p, q = _pair(p, q)
    return float(np.max(np.abs(p - q)))


@dataclass(frozen=True)
class IntervalProjector:
    """Euclidean projection onto ``[lower, upper]`` (vectorised)."""

    lower: float | np.ndarray
    upper: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ValueError("lower bound exceeds upper bound")

    def __call__(self, x):
        return project_interval(x, self)


def project_interval(x, proj: IntervalProjector):
    """Clamp ``x`` into ``[proj.lower, proj.upper]``."""
    out = np.clip(x, proj.lower, proj.upper)
    return float(out) if np.ndim(out) == 0 else out


def entropic_prox_step(p, xi, eps: float = 0.0) -> np.ndarray:
    """Solve ``min_q xi'(q - p) + V(p, q)`` over the restricted simplex ``P(eps)``.

    The minimiser is ``q_i = max(eta, v_i) / sum_l max(eta, v_l)`` with
    ``v_i = p_i exp(-xi_i)`` and ``eta`` the root of
    ``eps = eta / sum_l max(eta, v_l)``.  The root is located exactly by
    sorting ``v`` and searching the piecewise closed form, so no iterative
    root finding is involved.

    Parameters
    ----------
    p : array_like, shape (m,)
        Current iterate; strictly positive, sums to one.
    xi : array_like, shape (m,)
        Finite linear term (a scaled gradient).
    eps : float
        Floor of the restricted simplex, ``0 <= eps < 1/m``.

    Returns
    -------
    ndarray, shape (m,)
        The prox point, a member of ``P(eps)``.
    """
    p, xi = _pair(p, xi)
    m = p.size
    if not 0.0 <= eps < 1.0 / m:
        raise ValueError(f"eps={eps!r} outside [0, 1/m) with m={m}")
    if not np.all(np.isfinite(xi)):
        raise ValueError("xi has non-finite entries")
    if np.any(p <= 0):
        raise ValueError("p must be strictly positive")

    # log-space with max shift; q is invariant to a common scaling of v
    logv = np.log(p) - xi
    v = np.exp(logv - logv.max())

    order = np.argsort(v, kind="stable")
    vs = v[order]
    # tail[i] = sum_{l >= i} vs[l] (0-based), tail[m] = 0
    tail = np.zeros(m + 1)
    tail[:m] = np.cumsum(vs[::-1])[::-1]
    # mu at the knots vs[0..m-1]: knot i (1-based i+1) has i+1 entries at eta
    i1 = np.arange(1, m + 1)
    mu = vs / (i1 * vs + tail[1:])
    if np.any(np.diff(mu) < -1e-12 * np.maximum(mu[1:], 1.0)):
        raise AssertionError("mu is not monotone over the sorted knots")

    # i* = number of knots with mu <= eps (the knot at 0 always qualifies);
    # mu at the top knot is 1/m > eps so i* <= m - 1
    istar = int(np.searchsorted(mu, eps, side="right"))
    eta = eps * tail[istar] / (1.0 - eps * istar)
    w = np.maximum(v, eta)
    return w / w.sum()


def project_to_restricted_simplex(p, eps: float) -> np.ndarray:
    """KL projection of a strictly positive ``p`` onto ``P(eps)``."""
    p = np.asarray(p, dtype=float)
    return entropic_prox_step(p / p.sum(), np.zeros_like(p), eps)
