"""Weight schedules and von Neumann amplification analysis for SRJ iterations.

A scheduled relaxation Jacobi (SRJ) method cycles through P relaxation
weights omega_1 > omega_2 > ... > omega_P, applying weight omega_i for a
fraction beta_i of the iterations in a cycle.  For a Fourier mode of the
discretized operator with von Neumann eigenvalue kappa, one iteration damps
the mode amplitude on average by the amplification factor

    Gamma(kappa) = prod_i |1 - omega_i * kappa| ** beta_i .

Eigenvalues of the model problems live in [kappa_min, 2].  kappa_min is set
by grid size, dimensionality and boundary conditions; the upper bound 2 is
universal.  Optimal schedules equalize the maxima of Gamma over that range,
which is why the helpers here (amplification factor, its logarithmic slope,
extremum location, the kappa bounds) are shared by the optimizer, the cycle
scheduler, the parameter tables and the grid solvers.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KAPPA_MAX",
    "KappaRange",
    "WeightSchedule",
    "PoleError",
    "gamma",
    "log_gamma",
    "log_gamma_slope",
    "performance_index",
    "kappa_min",
    "effective_n",
    "interior_extrema",
]

# Largest von Neumann eigenvalue of the damped-Jacobi iteration,
# independent of boundary conditions.
KAPPA_MAX = 2.0

# A factor |1 - omega*kappa| at or below this short-circuits Gamma to 0.
_TINY_FACTOR = 1e-300


class PoleError(ValueError):
    """Evaluation requested exactly at a pole kappa = 1/omega_i."""


def _as_readonly(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WeightSchedule:
    """Optimal relaxation weights with their repetition fractions.

    Parameters
    ----------
    omegas : array_like of float, shape (P,)
        Relaxation weights, strictly decreasing.  The last weight lies in
        (0, 1) (an under-relaxation); for P >= 2 the first exceeds 1.
    betas : array_like of float, shape (P,)
        Fraction of iterations run with each weight.  All in (0, 1) and
        summing to 1.
    n : int
        Grid size (points per dimension) the schedule was optimized for.
        Sets kappa_min of the target spectrum.
    rho : float, optional
        Convergence performance index sum(omega_i * beta_i).  Computed when
        omitted; when given it must match the recomputation to 1e-10
        relative.

    Notes
    -----
    Instances are immutable value objects; the stored arrays are read-only
    views, safe to share across threads.
    """

    omegas: np.ndarray
    betas: np.ndarray
    n: int
    rho: float = None

    def __post_init__(self):
        omegas = _as_readonly(self.omegas, "omegas")
        betas = _as_readonly(self.betas, "betas")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "betas", betas)
        if omegas.shape != betas.shape:
            raise ValueError("omegas and betas must have equal length")
        if not np.all(np.diff(omegas) < 0):
            raise ValueError("omegas must be strictly decreasing")
        if self.p == 1:
            # the single weight may be plain Jacobi's 1.0
            if not 0.0 < omegas[0] <= 1.0:
                raise ValueError(f"a single weight must lie in (0, 1], got {omegas[0]}")
        else:
            if not 0.0 < omegas[-1] < 1.0:
                raise ValueError(f"omega_P must lie in (0, 1), got {omegas[-1]}")
            if omegas[0] <= 1.0:
                raise ValueError(f"omega_1 must exceed 1 for P >= 2, got {omegas[0]}")
        if np.any(betas <= 0.0) or np.any(betas > 1.0):
            raise ValueError("betas must lie in (0, 1]")
        if self.p >= 2 and np.any(betas >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if abs(betas.sum() - 1.0) > 1e-12:
            raise ValueError(f"betas must sum to 1, off by {betas.sum() - 1.0:.3e}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        computed_rho = float(np.dot(omegas, betas))
        if self.rho is None:
            object.__setattr__(self, "rho", computed_rho)
        elif abs(self.rho - computed_rho) > 1e-10 * abs(computed_rho):
            raise ValueError(
                f"rho {self.rho} inconsistent with sum(omega*beta) {computed_rho}"
            )

    @property
    def p(self):
        """Number of relaxation levels."""
        return int(self.omegas.size)


@dataclass(frozen=True)
class KappaRange:
    """Closed interval [kappa_min, kappa_max] of mode eigenvalues.

    kappa_max is 2 for every discretization handled here; kappa_min carries
    the grid/boundary dependence.
    """

    kappa_min: float
    kappa_max: float = KAPPA_MAX

    def __post_init__(self):
        if not 0.0 < self.kappa_min < self.kappa_max:
            raise ValueError(
                f"need 0 < kappa_min < kappa_max, got ({self.kappa_min}, {self.kappa_max})"
            )
        if self.kappa_max != KAPPA_MAX:
            raise ValueError(f"kappa_max is fixed at {KAPPA_MAX}")


def log_gamma(schedule, kappa):
    """log of the amplification factor, -inf where a factor vanishes.

    Evaluation is done in log space, sum(beta_i * log|1 - omega_i*kappa|),
    because omega_1 can exceed 1e6 and linear-space products under/overflow.

    Parameters
    ----------
    schedule : WeightSchedule
    kappa : float or ndarray

    Returns
    -------
    float or ndarray
    """
    kappa = np.asarray(kappa, dtype=float)
    factors = np.abs(1.0 - np.multiply.outer(kappa, schedule.omegas))
    dead = np.any(factors <= _TINY_FACTOR, axis=-1)
    with np.errstate(divide="ignore"):
        out = np.log(np.where(factors <= _TINY_FACTOR, 1.0, factors)) @ schedule.betas
    out = np.where(dead, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def gamma(schedule, kappa):
    """Per-iteration amplification factor Gamma(kappa) of a schedule.

    Parameters
    ----------
    schedule : WeightSchedule
    kappa : float or ndarray
        Mode eigenvalue(s), >= 0.

    Returns
    -------
    float or ndarray
        prod_i |1 - omega_i*kappa|**beta_i; exactly 0 whenever some factor
        vanishes (to within 1e-300).
    """
    out = np.exp(log_gamma(schedule, kappa))
    return float(out) if np.ndim(out) == 0 else out


def log_gamma_slope(schedule, kappa):
    """Slope function sum_i beta_i*omega_i / (1 - kappa*omega_i).

    Up to sign this is the kappa-derivative of log Gamma; its zeros in
    (1/omega_i, 1/omega_{i+1}) are the interior extrema of Gamma.

    Parameters
    ----------
    schedule : WeightSchedule
    kappa : float
        Must not equal any pole 1/omega_i.

    Returns
    -------
    float

    Raises
    ------
    PoleError
        If kappa coincides with a pole.
    """
    denom = 1.0 - kappa * schedule.omegas
    if np.any(denom == 0.0):
        raise PoleError(f"kappa={kappa} lies on a pole 1/omega_i")
    return float(np.sum(schedule.betas * schedule.omegas / denom))


def performance_index(schedule):
    """Convergence performance index rho = sum(omega_i * beta_i).

    Estimates the per-iteration speedup over plain Jacobi on the schedule's
    design spectrum.
    """
    return float(np.dot(schedule.omegas, schedule.betas))


def kappa_min(n, d=2, bc="neumann"):
    """Smallest von Neumann eigenvalue of the d-dimensional model problem.

    Parameters
    ----------
    n : int
        Points per dimension, >= 2.
    d : int
        Dimensionality, 1 to 3.
    bc : {'neumann', 'dirichlet'}
        Boundary conditions on all faces.  With 'neumann' the slowest mode
        is constant along all but one axis: kappa_min = (2/d)*sin(pi/2n)**2.
        With 'dirichlet' every axis contributes a half-sine:
        kappa_min = (2/d)*d*sin(pi/2n)**2.  Mixed or per-axis sizes go
        through effective_n instead.

    Returns
    -------
    float
    """
    if not n >= 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    s2 = math.sin(math.pi / (2.0 * n)) ** 2
    if bc == "neumann":
        return (2.0 / d) * s2
    if bc == "dirichlet":
        return 2.0 * s2
    raise ValueError(f"unknown boundary kind {bc!r}")


def effective_n(sizes, d=None, bc="neumann"):
    """Equivalent 2-D grid size with the same kappa_min as a d-D problem.

    Schedules are tabulated for the 2-D Neumann model problem.  A problem in
    d dimensions (or with Dirichlet boundaries) is matched to that table by
    the grid size whose 2-D kappa_min equals the problem's:

        Neumann:   n_eff = pi / (2*arcsin(sqrt(2/d) * sin(pi/(2*n))))
        Dirichlet: n_eff = pi / (2*arcsin(sqrt((2/d) * sum_i sin(pi/(2*n_i))**2)))

    For Neumann the single n is the maximum over axes (the slowest mode is
    constant along the others); for Dirichlet every axis contributes.

    Parameters
    ----------
    sizes : int or sequence of int
        Per-axis grid sizes, each >= 2.
    d : int, optional
        Dimensionality; defaults to the number of sizes given.
    bc : {'neumann', 'dirichlet'}

    Returns
    -------
    float

    Examples
    --------
    >>> round(effective_n((585, 280), bc='dirichlet'), 2)
    252.56
    """
    sizes = np.atleast_1d(np.asarray(sizes, dtype=float))
    if np.any(sizes < 2):
        raise ValueError("all sizes must be >= 2")
    if d is None:
        d = sizes.size
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if bc == "neumann":
        if d == 2:
            # the formula reduces to the identity; skip the arcsin round-trip
            return float(sizes.max())
        arg = math.sqrt(2.0 / d) * math.sin(math.pi / (2.0 * sizes.max()))
    elif bc == "dirichlet":
        arg = math.sqrt((2.0 / d) * np.sum(np.sin(math.pi / (2.0 * sizes)) ** 2))
    else:
        raise ValueError(f"unknown boundary kind {bc!r}")
    return math.pi / (2.0 * math.asin(arg))


def interior_extrema(schedule, rel_pad=1e-13, steps=200):
    """Locate the P-1 interior extrema of Gamma by bisection.

    The slope function has exactly one sign change in each interleaving
    interval (1/omega_i, 1/omega_{i+1}); bisection on it is robust and
    needs no derivatives.

    Parameters
    ----------
    schedule : WeightSchedule
    rel_pad : float
        Relative inset from the interval endpoints (which are poles).
    steps : int
        Bisection steps; 200 reaches full double precision.

    Returns
    -------
    ndarray, shape (P-1,)
        Extremum locations, strictly increasing.
    """
    om = schedule.omegas
    kappas = np.empty(schedule.p - 1)
    for i in range(schedule.p - 1):
        lo = (1.0 / om[i]) * (1.0 + rel_pad)
        hi = (1.0 / om[i + 1]) * (1.0 - rel_pad)
        slo = log_gamma_slope(schedule, lo)
        if slo * log_gamma_slope(schedule, hi) > 0.0:
            raise ValueError(f"no slope sign change in interval {i}")
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            if slo * log_gamma_slope(schedule, mid) <= 0.0:
                hi = mid
            else:
                lo = mid
                slo = log_gamma_slope(schedule, lo)
        kappas[i] = 0.5 * (lo + hi)
    return kappas
