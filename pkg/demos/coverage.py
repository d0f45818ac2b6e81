"""Repeated fresh-data calibration against a known truth.

Each replication simulates new outputs, draws a new support and records
whether [min, max] contains the true CDF value.  The printed interval is a
Clopper-Pearson confidence interval on the coverage rate.

Run: python3 demos/coverage.py
"""

from simcal import CalibrationSpec, ObjectiveSpec, coverage_experiment
from simcal.models import make_distribution
from simcal.solvers import SolverConfig

truth = make_distribution({"name": "exponential", "rate": 1.2})
spec = CalibrationSpec(objectives=(ObjectiveSpec("F(1)", "cdf_indicator", {"level": 1.0}),), m=30, seed=1,
                       solver=SolverConfig(max_iters=1000, report_batch=10_000))
for s in coverage_experiment(spec, truth, n=50, replications=5, rng=1, oracle_reps=100_000):
    print(f"{s.objective}: {s.hits}/{s.valid} cover {s.truth:.4f}, CI [{s.ci_lo:.3f}, {s.ci_hi:.3f}], "
          f"{s.non_converged} excluded (not converged or crossed)")
