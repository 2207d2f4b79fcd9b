"""Evolution strategies with a constant number of fitness resamplings on
noisy sphere functions, with tools to measure their convergence rate and
to estimate how often noise flips the selection."""

__version__ = "0.1.0"

from .analysis import (AggregateCurve, RateEstimate, aggregate_runs, ball_constant,
                       corollary_rate, estimate_rate, shell_measure, theorem_threshold)
from .problem import ProblemSpec, averaged_fitness, expected_fitness, sample_fitness
from .probe import MisrankReport, ProbeConfig, probe_schedule
from .rng import SeedSpec
from .strategy import RunTrace, StrategyConfig, run_es

__all__ = [
    "AggregateCurve",
    "MisrankReport",
    "ProbeConfig",
    "ProblemSpec",
    "RateEstimate",
    "RunTrace",
    "SeedSpec",
    "StrategyConfig",
    "aggregate_runs",
    "averaged_fitness",
    "ball_constant",
    "corollary_rate",
    "estimate_rate",
    "expected_fitness",
    "probe_schedule",
    "run_es",
    "sample_fitness",
    "shell_measure",
    "theorem_threshold",
]
