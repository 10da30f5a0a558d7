"""Integer M-cycles built from real relaxation fractions.

An optimal schedule prescribes each weight's share of the iteration
budget as a real fraction.  Running it requires whole repetition counts:
``q_i`` copies of weight ``omega_i`` inside a cycle of ``M = sum(q)``
elementary steps.  This module quantizes fractions into counts, lays the
copies out so the large over-relaxation steps are spread across the
cycle, and checks that the resulting per-cycle amplification stays below
one across the design band.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import KappaRange, WeightSchedule

__all__ = [
    "CycleSchedule",
    "DegenerateCycleError",
    "StabilityReport",
    "layout",
    "quantize",
    "validate_cycle",
]


class DegenerateCycleError(ValueError):
    """A repetition count came out zero, so no cycle exists."""


@dataclass(frozen=True)
class CycleSchedule:
    """Integer repetition counts and the per-iteration weight order.

    Parameters
    ----------
    q : array_like of int
        Repetition count per weight, aligned with the source schedule's
        omegas.  The first count is 1 by normalization.
    weight_sequence : array_like of float
        The M weights in execution order, a permutation of the multiset
        {omega_i repeated q_i times}.
    source_schedule : WeightSchedule
        The real-valued schedule the counts were derived from.

    Attributes
    ----------
    m : int
        Cycle length, sum of the counts.
    """

    q: np.ndarray
    weight_sequence: np.ndarray
    source_schedule: WeightSchedule
    m: int = field(init=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=int).copy()
        seq = np.asarray(self.weight_sequence, dtype=float).copy()
        q.setflags(write=False)
        seq.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "weight_sequence", seq)
        object.__setattr__(self, "m", int(q.sum()))
        if q.ndim != 1 or q.size != self.source_schedule.p:
            raise ValueError("q must hold one count per weight")
        if q[0] != 1:
            raise ValueError("q_1 must be 1; counts are scaled to the "
                             "rarest weight")
        if np.any(q < 1):
            raise DegenerateCycleError("every weight needs at least one step")
        if seq.shape != (self.m,):
            raise ValueError(f"weight sequence must have M={self.m} entries")
        want = np.sort(np.repeat(self.source_schedule.omegas, q))
        if not np.array_equal(np.sort(seq), want):
            raise ValueError("weight sequence is not a permutation of the "
                             "counted weights")

    @property
    def p(self):
        return int(self.q.size)


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a per-cycle amplification sweep.

    ``max_amplification`` is the largest per-cycle factor found on the
    sweep grid, attained at ``kappa_at_max``; ``passed`` requires it to
    be strictly below one.
    """

    max_amplification: float
    kappa_at_max: float
    passed: bool


def quantize(schedule, strategy="floor"):
    """Convert a schedule's fractions into integer repetition counts.

    The fractions are scaled by the rarest weight's share, beta_1, and
    each ratio beta_i/beta_1 becomes a count under the chosen rounding.
    The first count is pinned to 1.

    Parameters
    ----------
    schedule : WeightSchedule
    strategy : {'floor', 'round', 'ceil'}
        'floor' is the default and the variant the published counts use.
        'round' rounds half away from zero.

    Returns
    -------
    CycleSchedule

    Raises
    ------
    DegenerateCycleError
        If some ratio quantizes to zero, which requires fractions out of
        ascending order.
    """
    try:
        fn = {
            "floor": math.floor,
            "round": lambda x: math.floor(x + 0.5),
            "ceil": math.ceil,
        }[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}") from None
    betas = schedule.betas
    ratios = betas / betas[0]
    q = [1] + [fn(r) for r in ratios[1:]]
    if any(c < 1 for c in q):
        raise DegenerateCycleError(
            "a fraction smaller than beta_1 quantized to zero"
        )
    seq = layout(q, schedule.omegas)
    return CycleSchedule(
        q=np.array(q, dtype=int),
        weight_sequence=seq,
        source_schedule=schedule,
    )


def layout(q, omegas):
    """Spread each weight's copies evenly over the cycle.

    Copy j of weight class i goes to slot round((j + i/P) * M/q_i); an
    occupied slot defers to the next free one, scanning forward with
    wraparound.  The per-class phase i/P staggers the classes so the
    rare large weights do not pile up at the cycle start.

    Parameters
    ----------
    q : sequence of int
        Repetition counts.
    omegas : sequence of float
        One weight per class, aligned with q.

    Returns
    -------
    numpy.ndarray
        The M weights in execution order.
    """
    q = [int(c) for c in q]
    if len(q) != len(omegas):
        raise ValueError("q and omegas must align")
    m = sum(q)
    slots = np.full(m, np.nan)
    p = len(q)
    for i, (count, w) in enumerate(zip(q, omegas)):
        stride = m / count
        for j in range(count):
            pos = int(math.floor((j + i / p) * stride + 0.5)) % m
            while not np.isnan(slots[pos]):
                pos = (pos + 1) % m
            slots[pos] = w
    return slots


def validate_cycle(cycle, kappa_range, grid_points=10000):
    """Sweep the per-cycle amplification over the design band.

    Evaluates log of Prod_i |1 - omega_i kappa|^{q_i} on a uniform grid
    including both band ends, and compares the maximum against 1.  A
    weight hitting a mode exactly contributes -inf, which is harmless
    under a max.

    Parameters
    ----------
    cycle : CycleSchedule
    kappa_range : KappaRange
    grid_points : int
        Sweep resolution; the default matches the stability contract.

    Returns
    -------
    StabilityReport
        Failure is reported, never raised.
    """
    om = cycle.source_schedule.omegas
    qv = cycle.q.astype(float)
    grid = np.linspace(kappa_range.kappa_min, kappa_range.kappa_max,
                       grid_points)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(1.0 - np.outer(grid, om))) @ qv
    at = int(np.argmax(logs))
    max_log = float(logs[at])
    # the sweep can legitimately find growth; keep the report finite
    amp = math.inf if max_log > 709 else math.exp(max_log)
    return StabilityReport(
        max_amplification=amp,
        kappa_at_max=float(grid[at]),
        passed=amp < 1.0,
    )
