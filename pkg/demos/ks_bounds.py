"""Kolmogorov-Smirnov bands on output data.

Builds the continuous-CDF band from 30 simulated average waits and checks
that the true output CDF sits inside it.

Run: python3 demos/ks_bounds.py
"""

import numpy as np

from simcal import OutputSample, build_bounds, ks_quantile, make_map
from simcal.models import make_distribution, simulate_continuous

rng = np.random.default_rng(7)
wait = make_map("mg1_wait20")
truth = make_distribution({"name": "exponential", "rate": 1.2})

data = OutputSample(simulate_continuous(wait, truth, 30, rng))
bounds = build_bounds(data, alpha=0.05)
print(f"KS quantile q_0.95 = {ks_quantile(0.05):.4f}, half-width = {bounds.half_width:.4f}")
for y, lo, hi in list(zip(bounds.thresholds, bounds.lower, bounds.upper))[::6]:
    print(f"  y = {y:7.4f}   [{lo:.3f}, {hi:.3f}]")

# Large reference sample for the true output CDF.
ref = np.sort(simulate_continuous(wait, truth, 200_000, rng))
true_cdf = np.searchsorted(ref, bounds.thresholds, side="right") / ref.size
inside = np.all((bounds.lower <= true_cdf) & (true_cdf <= bounds.upper))
print("true output CDF inside the band:", bool(inside))
