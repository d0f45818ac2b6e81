"""Calibrate unobservable simulation input models from output-level data.

The input distribution is discretized on randomly sampled support points;
a Kolmogorov-Smirnov band on the output distribution defines the feasible
set; stochastic penalty solvers on the simplex give lower and upper bounds
on target quantities of the input model.
"""

from .calibration import (
    CalibrationReport,
    CalibrationSpec,
    ObjectiveSpec,
    calibrate_bounds,
    cdf_sweep,
    choose_epsilon,
    coverage_experiment,
    sample_support,
    true_value,
)
from .models import (
    Mg1QueueLength,
    Mg1Wait,
    SupportSet,
    SystemModel,
    draw_input_sequence,
    estimate_expectation,
    make_map,
    score_factor,
)
from .rng import RngStream
from .simplex import entropic_prox_step, kl_divergence, project_interval, sup_norm_distance
from .solvers import Problem, SolverConfig, solve, validate_schedule
from .uncertainty import OutputSample, build_bounds, build_continuous_bounds, ks_quantile, load_output_sample

__version__ = "0.1.0"

__all__ = [
    "CalibrationReport",
    "CalibrationSpec",
    "Mg1QueueLength",
    "Mg1Wait",
    "ObjectiveSpec",
    "OutputSample",
    "Problem",
    "RngStream",
    "SolverConfig",
    "SupportSet",
    "SystemModel",
    "build_bounds",
    "build_continuous_bounds",
    "calibrate_bounds",
    "cdf_sweep",
    "choose_epsilon",
    "coverage_experiment",
    "draw_input_sequence",
    "entropic_prox_step",
    "estimate_expectation",
    "kl_divergence",
    "ks_quantile",
    "load_output_sample",
    "make_map",
    "project_interval",
    "sample_support",
    "score_factor",
    "solve",
    "sup_norm_distance",
    "true_value",
    "validate_schedule",
]
