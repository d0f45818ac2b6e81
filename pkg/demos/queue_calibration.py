"""Bounds on the mean queue length from output-only data.

The service distribution is unobserved; only 30 average waits are seen.
The solver searches discrete service distributions on 40 random support
points whose implied wait CDF stays in the KS band.  A small instance is
used so the demo runs in well under a minute; see docs/configs/ for the
full-size runs.

Run: python3 demos/queue_calibration.py
"""

from dataclasses import replace

from simcal import CalibrationSpec, OutputSample, calibrate_bounds, make_map, true_value
from simcal.models import make_distribution, simulate_continuous
from simcal.rng import Purpose, RngStream
from simcal.solvers import SolverConfig

truth = make_distribution({"name": "exponential", "rate": 1.2})
rng = RngStream(11).generator(5, Purpose.DATA, 30)
data = OutputSample(simulate_continuous(make_map("mg1_wait20"), truth, 30, rng))

spec = CalibrationSpec(m=40, seed=11, solver=SolverConfig(max_iters=300, report_batch=20_000))
report = calibrate_bounds(spec, data)
obj = report.objectives[0]
print(f"support m = {report.support.m}, eps = {report.eps:.2e}")
for sense, run in obj.runs.items():
    print(f"  {sense}: value {run.value:.4f} (se {run.se:.4f}), penalty {run.penalty:.2e}, "
          f"{run.iterations} iterations, {run.status}")
print(f"bounds [{obj.z_min:.4f}, {obj.z_max:.4f}]  crossed={obj.crossed}  feasible={obj.feasible}")

value, se = true_value(make_map("mg1_queuelen20"), truth, reps=100_000)
print(f"true mean queue length {value:.4f} +/- {se:.4f}")

# Inflating the band widens the feasible set.
wide = calibrate_bounds(replace(spec, delta=0.05), data).objectives[0]
print(f"delta = 0.05: [{wide.z_min:.4f}, {wide.z_max:.4f}]")
