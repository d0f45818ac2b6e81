"""Output-level uncertainty sets built from i.i.d. output data.

A KS band ``||F - F_hat||_inf <= q/sqrt(n)`` around the empirical CDF of the
observed outputs is rewritten as one interval constraint per observed value,
``F_hat(y_j+) - q/sqrt(n) <= E_p[I(h(X) <= y_j)] <= F_hat(y_j-) + q/sqrt(n)``.
For discrete outputs the constraints sit on the distinct support points,
either on the CDF or on the individual masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

__all__ = [
    "CONTINUOUS_CDF",
    "DISCRETE_CDF",
    "DISCRETE_MASS",
    "KsBounds",
    "OutputSample",
    "build_bounds",
    "build_continuous_bounds",
    "build_discrete_cdf_bounds",
    "build_discrete_mass_bounds",
    "empirical_cdf_limits",
    "kolmogorov_cdf",
    "ks_quantile",
    "load_output_sample",
]

CONTINUOUS_CDF = "continuous_cdf"
DISCRETE_CDF = "discrete_cdf"
DISCRETE_MASS = "discrete_mass"
MODES = (CONTINUOUS_CDF, DISCRETE_CDF, DISCRETE_MASS)


@dataclass(frozen=True)
class OutputSample:
    """Observed outputs ``y_1, ..., y_n``."""

    values: np.ndarray
    sorted_view: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.ndim != 1 or values.size < 1:
            raise ValueError("output sample must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("output sample contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sorted_view", np.argsort(values, kind="stable"))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def sorted_values(self) -> np.ndarray:
        return self.values[self.sorted_view]


def load_output_sample(path) -> OutputSample:
    """Read a one-column text/CSV file of reals.

    Blank lines and ``#`` comments are skipped.  A trailing comma-separated
    field is tolerated only if empty.  Parse errors name the file and line.
    """
    path = Path(path)
    values = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) > 1 and any(cells[1:]):
                raise ValueError(f"{path}:{lineno}: expected one column, got {len(cells)}")
            try:
                values.append(float(cells[0]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {cells[0]!r}") from None
    if not values:
        raise ValueError(f"{path}: no observations")
    return OutputSample(np.array(values))


def empirical_cdf_limits(sample: OutputSample, y: float) -> tuple[float, float]:
    """Left and right limits ``(F_hat(y-), F_hat(y+))`` of the empirical CDF."""
    s = sample.sorted_values
    left = np.searchsorted(s, y, side="left")
    right = np.searchsorted(s, y, side="right")
    return left / sample.n, right / sample.n


def kolmogorov_cdf(x: float, term_tol: float = 1e-12) -> float:
    """Limiting law of ``sqrt(n) * sup|F_hat - F|``.

    ``K(x) = 1 - 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)``, truncated once a
    term drops below ``term_tol``.
    """
    if x <= 0:
        return 0.0
    total = 0.0
    j = 1
    while True:
        term = math.exp(-2.0 * j * j * x * x)
        total += term if j % 2 else -term
        if term < term_tol:
            break
        j += 1
    return max(0.0, 1.0 - 2.0 * total)


def ks_quantile(alpha: float, tol: float = 1e-10) -> float:
    """``(1 - alpha)``-quantile of the Kolmogorov distribution, by bisection."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha!r} outside (0, 1)")
    lo, hi = 0.2, 3.0
    target = 1.0 - alpha
    if kolmogorov_cdf(lo) >= target or kolmogorov_cdf(hi) <= target:
        raise ValueError(f"alpha={alpha!r} outside the supported bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kolmogorov_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class KsBounds:
    """Per-threshold interval constraints ``lower_j <= E_p[ind_j(h(X))] <= upper_j``.

    ``ind_j(y)`` is ``I(y <= thresholds[j])`` for the CDF modes and
    ``I(y == thresholds[j])`` for ``discrete_mass``.
    """

    thresholds: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mode: str
    alpha: float
    half_width: float
    delta: float = 0.0
    n_obs: int = 0

    def __post_init__(self):
        for name in ("thresholds", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.thresholds.shape == self.lower.shape == self.upper.shape):
            raise ValueError("thresholds, lower and upper must share their length")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def n(self) -> int:
        return self.thresholds.size

    def project(self, u):
        """Componentwise projection ``Pi_j(u_j)``."""
        return np.clip(u, self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def _positions(self, outputs):
        outputs = np.asarray(outputs, dtype=float)
        pos = np.searchsorted(self.thresholds, outputs, side="left")
        if self.mode == DISCRETE_MASS:
            hit = pos < self.n
            hit[hit] = self.thresholds[pos[hit]] == outputs[hit]
            return pos, hit
        return pos, None

    def indicator_means(self, outputs) -> np.ndarray:
        """``(1/M) sum_r ind_j(outputs_r)`` for every threshold, shape ``(n,)``.

        One binary search per output; no ``M x n`` matrix is formed.
        """
        outputs = np.asarray(outputs, dtype=float)
        pos, hit = self._positions(outputs)
        if hit is not None:
            counts = np.bincount(pos[hit], minlength=self.n)[: self.n]
        else:
            # I(y <= t_j) holds exactly for j >= pos
            counts = np.cumsum(np.bincount(pos, minlength=self.n + 1)[: self.n])
        return counts / outputs.size

    def weighted_indicator_sum(self, outputs, weights) -> np.ndarray:
        """``sum_j weights_j ind_j(outputs_r)`` for every output, shape ``(M,)``."""
        weights = np.asarray(weights, dtype=float)
        pos, hit = self._positions(outputs)
        if hit is not None:
            out = np.zeros(pos.shape)
            out[hit] = weights[pos[hit]]
            return out
        suffix = np.zeros(self.n + 1)
        suffix[: self.n] = np.cumsum(weights[::-1])[::-1]
        return suffix[pos]

    def indicator_matrix(self, outputs) -> np.ndarray:
        """Dense ``(M, n)`` indicator matrix; for audits and small problems."""
        outputs = np.asarray(outputs, dtype=float)[:, None]
        if self.mode == DISCRETE_MASS:
            return (outputs == self.thresholds[None, :]).astype(float)
        return (outputs <= self.thresholds[None, :]).astype(float)


def build_continuous_bounds(sample: OutputSample, alpha: float, inflate_delta: float = 0.0) -> KsBounds:
    """Interval constraints at the (deduplicated) observed outputs.

    ``[F_hat(y+) - w, F_hat(y-) + w]`` with ``w = q / sqrt(n) + inflate_delta``,
    clamped to ``[0, 1]``.  Where heavy ties make that interval empty the
    upper end becomes ``F_hat(y+) + w``.
    """
    if inflate_delta < 0:
        raise ValueError("inflate_delta must be nonnegative")
    half = ks_quantile(alpha) / math.sqrt(sample.n) + inflate_delta
    s = sample.sorted_values
    y = np.unique(s)
    left = np.searchsorted(s, y, side="left") / sample.n
    right = np.searchsorted(s, y, side="right") / sample.n
    lower = np.clip(right - half, 0.0, 1.0)
    upper = np.clip(left + half, 0.0, 1.0)
    # A tie whose jump exceeds 2*half leaves no continuous CDF in the band;
    # fall back to the right-limit interval there so the program stays posed.
    empty = lower > upper
    upper[empty] = np.clip(right[empty] + half, 0.0, 1.0)
    return KsBounds(
        thresholds=y,
        lower=lower,
        upper=upper,
        mode=CONTINUOUS_CDF,
        alpha=alpha,
        half_width=half,
        delta=inflate_delta,
        n_obs=sample.n,
    )


def build_discrete_cdf_bounds(sample: OutputSample, alpha: float, inflate_delta: float = 0.0) -> KsBounds:
    """CDF constraints at the distinct observed values, up to the first with ``F_hat = 1``.

    Uses the continuous KS quantile, which is conservative for discrete data.
    """
    half = ks_quantile(alpha) / math.sqrt(sample.n) + inflate_delta
    s = sample.sorted_values
    w = np.unique(s)
    center = np.searchsorted(s, w, side="right") / sample.n
    K = int(np.argmax(center >= 1.0)) + 1
    w, center = w[:K], center[:K]
    return KsBounds(
        thresholds=w,
        lower=np.clip(center - half, 0.0, 1.0),
        upper=np.clip(center + half, 0.0, 1.0),
        mode=DISCRETE_CDF,
        alpha=alpha,
        half_width=half,
        delta=inflate_delta,
        n_obs=sample.n,
    )


def build_discrete_mass_bounds(sample: OutputSample, alpha: float, inflate_delta: float = 0.0) -> KsBounds:
    """Mass constraints ``P_hat(Y = w_j) +/- q`` on each distinct value.

    ``q = z_{1 - alpha/(2K)} * sqrt(0.25/n)``: a normal-approximation binomial
    half-width at the worst-case variance, Bonferroni-corrected over the
    ``K`` masses.
    """
    w, counts = np.unique(sample.values, return_counts=True)
    K = w.size
    half = float(stats.norm.ppf(1.0 - alpha / (2 * K))) * math.sqrt(0.25 / sample.n) + inflate_delta
    center = counts / sample.n
    return KsBounds(
        thresholds=w,
        lower=np.clip(center - half, 0.0, 1.0),
        upper=np.clip(center + half, 0.0, 1.0),
        mode=DISCRETE_MASS,
        alpha=alpha,
        half_width=half,
        delta=inflate_delta,
        n_obs=sample.n,
    )


_BUILDERS = {
    CONTINUOUS_CDF: build_continuous_bounds,
    DISCRETE_CDF: build_discrete_cdf_bounds,
    DISCRETE_MASS: build_discrete_mass_bounds,
}


def build_bounds(sample: OutputSample, alpha: float, mode: str = CONTINUOUS_CDF, inflate_delta: float = 0.0) -> KsBounds:
    try:
        builder = _BUILDERS[mode]
    except KeyError:
        raise ValueError(f"unknown bounds mode {mode!r}") from None
    return builder(sample, alpha, inflate_delta)
