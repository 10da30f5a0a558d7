"""Scheduled relaxation Jacobi: optimal weights, cycles and grid solvers."""

from srj.core import (
    KAPPA_MAX,
    KappaRange,
    PoleError,
    WeightSchedule,
    effective_n,
    gamma,
    interior_extrema,
    kappa_min,
    log_gamma,
    log_gamma_slope,
    performance_index,
)

__version__ = "0.1.0"

__all__ = [
    "KAPPA_MAX",
    "KappaRange",
    "PoleError",
    "WeightSchedule",
    "effective_n",
    "gamma",
    "interior_extrema",
    "kappa_min",
    "log_gamma",
    "log_gamma_slope",
    "performance_index",
]
