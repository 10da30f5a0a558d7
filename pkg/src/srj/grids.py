"""Structured-grid iterative solvers.

Finite-difference relaxation on 1- to 3-dimensional structured grids
carrying one ghost layer per face.  A :class:`GridProblem` bundles the
field, the source, an explicit stencil (per-cell center and neighbor
coefficients, i.e. the rows of the coefficient matrix), per-face
boundary rules applied through the ghost layer, and an optional mask
restricting the sweeps to part of the domain.

All solvers share one convergence metric: the infinity norm of the
change between consecutive iterates.  The true algebraic residual is
recorded alongside it but never drives the stopping decision.  Ghost
layers are refreshed after every elementary relaxation step, before
the next one reads them.

Relaxation kernels are compiled with numba when it is importable and
fall back to plain numpy/python loops otherwise; both paths implement
identical arithmetic per cell.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

__all__ = [
    "OVERFLOW_LIMIT",
    "FIXED",
    "MIRROR",
    "PERIODIC",
    "BoundaryRule",
    "DivergenceError",
    "GridProblem",
    "ResidualHistory",
    "face_dirichlet",
    "gauss_seidel_solve",
    "jacobi_solve",
    "sor_solve",
    "srj_solve",
    "weighted_jacobi_sweep",
]

# Successive-difference norms beyond this abort the iteration instead of
# running into inf/nan arithmetic.
OVERFLOW_LIMIT = 1e300


class DivergenceError(RuntimeError):
    """Iteration produced a non-finite or overflowing update.

    Attributes
    ----------
    iterations : int
        Elementary steps completed when the abort triggered.
    history : ResidualHistory
        Partial history up to and including the offending step.
    """

    def __init__(self, message, iterations, history):
        super().__init__(message)
        self.iterations = iterations
        self.history = history


@dataclass(frozen=True)
class BoundaryRule:
    """Ghost-layer update rule for one grid face.

    kind is one of:

    ``"fixed"``
        Ghost cells hold prescribed values written at build time and
        are never touched again (point-centered Dirichlet data, or
        precomputed analytic ghost values).
    ``"mirror"``
        Ghost copies the adjacent interior cell (homogeneous Neumann
        on a cell-centered grid).
    ``"periodic"``
        Ghost copies the interior cell adjacent to the opposite face.
    ``"face_dirichlet"``
        Ghost is linearly extrapolated through the face position,
        ``ghost = 2*value - first_interior``, so the boundary value is
        imposed at the face itself to second order.  ``values`` holds
        the face data (scalar or face-shaped array).
    """

    kind: str
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "mirror", "periodic", "face_dirichlet"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "face_dirichlet" and self.values is None:
            raise ValueError("face_dirichlet rule needs boundary values")


FIXED = BoundaryRule("fixed")
MIRROR = BoundaryRule("mirror")
PERIODIC = BoundaryRule("periodic")


def face_dirichlet(values):
    """Dirichlet rule with the value imposed at the face position."""
    return BoundaryRule("face_dirichlet", np.asarray(values, dtype=float))


def _face_index(ndim, axis, pos):
    """Full-array index selecting one face layer, other axes interior."""
    idx = [slice(1, -1)] * ndim
    idx[axis] = pos
    return tuple(idx)


@dataclass
class GridProblem:
    """One elliptic problem discretized on a structured grid.

    Parameters
    ----------
    spacing : tuple of float
        Grid spacing per axis.
    u : ndarray
        Field including one ghost layer per face; shape is the interior
        shape plus 2 along every axis.  Mutated in place by the solvers.
    source : ndarray
        Right-hand side on the interior cells.
    center : ndarray
        Diagonal stencil coefficient per interior cell; must be nonzero
        wherever the mask is active.
    lower, upper : tuple of ndarray
        Neighbor coefficients per axis (index-1 and index+1 sides),
        each with the interior shape.
    bc : tuple of (BoundaryRule, BoundaryRule)
        Low/high face rule per axis.
    mask : ndarray of bool, optional
        True marks cells the relaxation sweeps own.  Cells outside the
        mask are never written by a sweep; boundary machinery (``bc``,
        ``post_sweep``) may still assign them.
    post_sweep : callable, optional
        Hook run on the full field after each ghost refresh, for
        boundary rules that do not fit the per-face kinds (e.g. the
        spherical-origin tie ``u_0 = u_1 = u_2``).
    description : str
        Free-form tag for reports.
    """

    spacing: tuple
    u: np.ndarray
    source: np.ndarray
    center: np.ndarray
    lower: tuple
    upper: tuple
    bc: tuple
    mask: np.ndarray | None = None
    post_sweep: object = None
    description: str = ""
    _active: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.source = np.asarray(self.source, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        nd = self.source.ndim
        if not 1 <= nd <= 3:
            raise ValueError("only 1-, 2- and 3-dimensional grids are supported")
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != nd:
            raise ValueError("spacing must provide one value per axis")
        shape = self.source.shape
        expected = tuple(n + 2 for n in shape)
        if self.u.shape != expected:
            raise ValueError(
                f"field shape {self.u.shape} does not match interior {shape} plus ghosts"
            )
        if self.center.shape != shape:
            raise ValueError("center coefficients must have the interior shape")
        self.lower = tuple(np.asarray(a, dtype=float) for a in self.lower)
        self.upper = tuple(np.asarray(a, dtype=float) for a in self.upper)
        if len(self.lower) != nd or len(self.upper) != nd:
            raise ValueError("lower/upper must provide one array per axis")
        for a in self.lower + self.upper:
            if a.shape != shape:
                raise ValueError("neighbor coefficients must have the interior shape")
        self.bc = tuple(tuple(pair) for pair in self.bc)
        if len(self.bc) != nd:
            raise ValueError("bc must provide one (low, high) pair per axis")
        for lo, hi in self.bc:
            if (lo.kind == "periodic") != (hi.kind == "periodic"):
                raise ValueError("periodic axes need the rule on both faces")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != shape:
                raise ValueError("mask must have the interior shape")
            active = self.mask
        else:
            active = np.ones(shape, dtype=bool)
        self._active = active
        if not np.all(self.center[active] != 0.0):
            raise ValueError("center coefficient vanishes on an active cell")
        self.refresh_ghosts()

    @property
    def ndim(self):
        return self.source.ndim

    @property
    def shape(self):
        """Interior (unknown-cell) shape."""
        return self.source.shape

    @property
    def interior(self):
        """View of the interior cells of the field."""
        core = (slice(1, -1),) * self.ndim
        return self.u[core]

    def refresh_ghosts(self):
        """Rewrite the ghost layers so the boundary rules hold discretely."""
        u = self.u
        nd = self.ndim
        for ax in range(nd):
            lo, hi = self.bc[ax]
            n = u.shape[ax]
            if lo.kind == "mirror":
                u[_face_index(nd, ax, 0)] = u[_face_index(nd, ax, 1)]
            elif lo.kind == "periodic":
                u[_face_index(nd, ax, 0)] = u[_face_index(nd, ax, n - 2)]
            elif lo.kind == "face_dirichlet":
                u[_face_index(nd, ax, 0)] = 2.0 * lo.values - u[_face_index(nd, ax, 1)]
            if hi.kind == "mirror":
                u[_face_index(nd, ax, n - 1)] = u[_face_index(nd, ax, n - 2)]
            elif hi.kind == "periodic":
                u[_face_index(nd, ax, n - 1)] = u[_face_index(nd, ax, 1)]
            elif hi.kind == "face_dirichlet":
                u[_face_index(nd, ax, n - 1)] = (
                    2.0 * hi.values - u[_face_index(nd, ax, n - 2)]
                )
        if self.post_sweep is not None:
            self.post_sweep(u)

    def operator_apply(self):
        """Stencil applied to the current field, on the interior cells."""
        u = self.u
        nd = self.ndim
        core = (slice(1, -1),) * nd
        acc = self.center * u[core]
        for ax in range(nd):
            lo_idx = list(core)
            hi_idx = list(core)
            lo_idx[ax] = slice(0, -2)
            hi_idx[ax] = slice(2, None)
            acc += self.lower[ax] * u[tuple(lo_idx)]
            acc += self.upper[ax] * u[tuple(hi_idx)]
        return acc

    def residual_field(self):
        """True algebraic residual ``s - Au`` on the interior cells."""
        return self.source - self.operator_apply()

    def copy(self):
        """Independent copy sharing no arrays with the original."""
        return GridProblem(
            spacing=self.spacing,
            u=self.u.copy(),
            source=self.source.copy(),
            center=self.center.copy(),
            lower=tuple(a.copy() for a in self.lower),
            upper=tuple(a.copy() for a in self.upper),
            bc=self.bc,
            mask=None if self.mask is None else self.mask.copy(),
            post_sweep=self.post_sweep,
            description=self.description,
        )


@dataclass
class ResidualHistory:
    """Per-iteration convergence record of one solve.

    ``residual_inf`` is the stopping metric: the infinity norm of the
    difference between consecutive iterates, normalized per unit
    relaxation (divided by the step's relaxation factor).  The
    normalization makes the metric identical across schedule positions,
    so a lightly weighted step cannot trip the threshold while heavily
    weighted steps still move the field.  For plain Jacobi and
    Gauss-Seidel it is exactly the update norm.  ``true_residual_inf``
    is the algebraic residual norm of the iterate each step started
    from.  Both have one entry per elementary step performed.
    """

    residual_inf: np.ndarray
    true_residual_inf: np.ndarray
    seconds: np.ndarray
    tolerance: float
    converged: bool

    @property
    def iterations(self):
        return len(self.residual_inf)

    def to_csv(self, path, timing=True):
        """Write the history as CSV with one row per iteration.

        With ``timing=False`` the wall_seconds column is written as
        zeros so identical runs produce byte-identical files.
        """
        with open(path, "w") as handle:
            handle.write("iteration,residual_inf,wall_seconds\n")
            for k in range(self.iterations):
                sec = self.seconds[k] if timing else 0.0
                handle.write(
                    f"{k + 1},{self.residual_inf[k]:.17g},{sec:.6f}\n"
                )


# ---------------------------------------------------------------------------
# relaxation kernels

if _HAVE_NUMBA:
    _jit = numba.njit(cache=True)

    @_jit
    def _wj1(u, un, s, c, am0, ap0, act, omega, reverse):
        n0 = s.shape[0]
        dmax = 0.0
        rmax = 0.0
        for t0 in range(n0):
            i = n0 - 1 - t0 if reverse else t0
            if act[i]:
                uc = u[i + 1]
                r = s[i] - (c[i] * uc + am0[i] * u[i] + ap0[i] * u[i + 2])
                d = omega * r / c[i]
                un[i + 1] = uc + d
                if abs(d) > dmax:
                    dmax = abs(d)
                if abs(r) > rmax:
                    rmax = abs(r)
            else:
                un[i + 1] = u[i + 1]
        return dmax, rmax

    @_jit
    def _wj2(u, un, s, c, am0, ap0, am1, ap1, act, omega, reverse):
        n0, n1 = s.shape
        dmax = 0.0
        rmax = 0.0
        for t0 in range(n0):
            i = n0 - 1 - t0 if reverse else t0
            for t1 in range(n1):
                j = n1 - 1 - t1 if reverse else t1
                if act[i, j]:
                    uc = u[i + 1, j + 1]
                    r = s[i, j] - (
                        c[i, j] * uc
                        + am0[i, j] * u[i, j + 1]
                        + ap0[i, j] * u[i + 2, j + 1]
                        + am1[i, j] * u[i + 1, j]
                        + ap1[i, j] * u[i + 1, j + 2]
                    )
                    d = omega * r / c[i, j]
                    un[i + 1, j + 1] = uc + d
                    if abs(d) > dmax:
                        dmax = abs(d)
                    if abs(r) > rmax:
                        rmax = abs(r)
                else:
                    un[i + 1, j + 1] = u[i + 1, j + 1]
        return dmax, rmax

    @_jit
    def _wj3(u, un, s, c, am0, ap0, am1, ap1, am2, ap2, act, omega, reverse):
        n0, n1, n2 = s.shape
        dmax = 0.0
        rmax = 0.0
        for t0 in range(n0):
            i = n0 - 1 - t0 if reverse else t0
            for t1 in range(n1):
                j = n1 - 1 - t1 if reverse else t1
                for t2 in range(n2):
                    k = n2 - 1 - t2 if reverse else t2
                    if act[i, j, k]:
                        uc = u[i + 1, j + 1, k + 1]
                        r = s[i, j, k] - (
                            c[i, j, k] * uc
                            + am0[i, j, k] * u[i, j + 1, k + 1]
                            + ap0[i, j, k] * u[i + 2, j + 1, k + 1]
                            + am1[i, j, k] * u[i + 1, j, k + 1]
                            + ap1[i, j, k] * u[i + 1, j + 2, k + 1]
                            + am2[i, j, k] * u[i + 1, j + 1, k]
                            + ap2[i, j, k] * u[i + 1, j + 1, k + 2]
                        )
                        d = omega * r / c[i, j, k]
                        un[i + 1, j + 1, k + 1] = uc + d
                        if abs(d) > dmax:
                            dmax = abs(d)
                        if abs(r) > rmax:
                            rmax = abs(r)
                    else:
                        un[i + 1, j + 1, k + 1] = u[i + 1, j + 1, k + 1]
        return dmax, rmax

    @_jit
    def _gs1(u, s, c, am0, ap0, act, omega):
        n0 = s.shape[0]
        dmax = 0.0
        rmax = 0.0
        for i in range(n0):
            if act[i]:
                uc = u[i + 1]
                r = s[i] - (c[i] * uc + am0[i] * u[i] + ap0[i] * u[i + 2])
                d = omega * r / c[i]
                u[i + 1] = uc + d
                if abs(d) > dmax:
                    dmax = abs(d)
                if abs(r) > rmax:
                    rmax = abs(r)
        return dmax, rmax

    @_jit
    def _gs2(u, s, c, am0, ap0, am1, ap1, act, omega):
        n0, n1 = s.shape
        dmax = 0.0
        rmax = 0.0
        for i in range(n0):
            for j in range(n1):
                if act[i, j]:
                    uc = u[i + 1, j + 1]
                    r = s[i, j] - (
                        c[i, j] * uc
                        + am0[i, j] * u[i, j + 1]
                        + ap0[i, j] * u[i + 2, j + 1]
                        + am1[i, j] * u[i + 1, j]
                        + ap1[i, j] * u[i + 1, j + 2]
                    )
                    d = omega * r / c[i, j]
                    u[i + 1, j + 1] = uc + d
                    if abs(d) > dmax:
                        dmax = abs(d)
                    if abs(r) > rmax:
                        rmax = abs(r)
        return dmax, rmax

    @_jit
    def _gs3(u, s, c, am0, ap0, am1, ap1, am2, ap2, act, omega):
        n0, n1, n2 = s.shape
        dmax = 0.0
        rmax = 0.0
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    if act[i, j, k]:
                        uc = u[i + 1, j + 1, k + 1]
                        r = s[i, j, k] - (
                            c[i, j, k] * uc
                            + am0[i, j, k] * u[i, j + 1, k + 1]
                            + ap0[i, j, k] * u[i + 2, j + 1, k + 1]
                            + am1[i, j, k] * u[i + 1, j, k + 1]
                            + ap1[i, j, k] * u[i + 1, j + 2, k + 1]
                            + am2[i, j, k] * u[i + 1, j + 1, k]
                            + ap2[i, j, k] * u[i + 1, j + 1, k + 2]
                        )
                        d = omega * r / c[i, j, k]
                        u[i + 1, j + 1, k + 1] = uc + d
                        if abs(d) > dmax:
                            dmax = abs(d)
                        if abs(r) > rmax:
                            rmax = abs(r)
        return dmax, rmax

    _WJ_KERNELS = {1: _wj1, 2: _wj2, 3: _wj3}
    _GS_KERNELS = {1: _gs1, 2: _gs2, 3: _gs3}


def _coefficient_args(problem):
    args = [problem.source, problem.center]
    for ax in range(problem.ndim):
        args.append(problem.lower[ax])
        args.append(problem.upper[ax])
    args.append(problem._active)
    return args


def _jacobi_step_numpy(problem, omega, scratch):
    core = (slice(1, -1),) * problem.ndim
    act = problem._active
    r = problem.residual_field()
    d = omega * r / problem.center
    old = problem.u[core]
    scratch[core] = np.where(act, old + d, old)
    if act.all():
        dmax = float(np.max(np.abs(d)))
        rmax = float(np.max(np.abs(r)))
    else:
        dmax = float(np.max(np.abs(d[act]), initial=0.0))
        rmax = float(np.max(np.abs(r[act]), initial=0.0))
    return dmax, rmax


def _gs_step_python(problem, omega):
    u = problem.u
    act = problem._active
    s = problem.source
    c = problem.center
    nd = problem.ndim
    dmax = 0.0
    rmax = 0.0
    for idx in np.ndindex(problem.shape):
        if not act[idx]:
            continue
        gidx = tuple(i + 1 for i in idx)
        acc = c[idx] * u[gidx]
        for ax in range(nd):
            lo = list(gidx)
            hi = list(gidx)
            lo[ax] -= 1
            hi[ax] += 1
            acc += problem.lower[ax][idx] * u[tuple(lo)]
            acc += problem.upper[ax][idx] * u[tuple(hi)]
        r = s[idx] - acc
        d = omega * r / c[idx]
        u[gidx] += d
        dmax = max(dmax, abs(d))
        rmax = max(rmax, abs(r))
    return dmax, rmax


class _Sweeper:
    """Owns the second buffer of the two-buffer Jacobi update."""

    def __init__(self, problem):
        self.problem = problem
        # The copy seeds the scratch ghost frame; "fixed" ghosts persist
        # through buffer swaps because only the interior is rewritten.
        self.scratch = problem.u.copy()

    def jacobi(self, omega, reverse=False):
        problem = self.problem
        if _HAVE_NUMBA:
            kernel = _WJ_KERNELS[problem.ndim]
            dmax, rmax = kernel(
                problem.u,
                self.scratch,
                *_coefficient_args(problem),
                float(omega),
                reverse,
            )
        else:
            dmax, rmax = _jacobi_step_numpy(problem, omega, self.scratch)
        problem.u, self.scratch = self.scratch, problem.u
        problem.refresh_ghosts()
        return dmax, rmax

    def gauss_seidel(self, omega):
        problem = self.problem
        if _HAVE_NUMBA:
            kernel = _GS_KERNELS[problem.ndim]
            dmax, rmax = kernel(
                problem.u, *_coefficient_args(problem), float(omega)
            )
        else:
            dmax, rmax = _gs_step_python(problem, omega)
        problem.refresh_ghosts()
        return dmax, rmax


def weighted_jacobi_sweep(problem, omega, traversal="forward"):
    """One weighted Jacobi step ``u += omega * (s - Au) / center``.

    The update reads exclusively the previous iterate (two-buffer
    semantics), writes the field in place on ``problem``, and refreshes
    the ghost layers afterward.

    Parameters
    ----------
    problem : GridProblem
        Mutated in place; ``problem.u`` holds the new iterate on return.
    omega : float
        Relaxation factor.
    traversal : {"forward", "reverse"}
        Cell visiting order.  The result must not depend on it; the
        knob exists so tests can assert exactly that.

    Returns
    -------
    (float, float)
        Infinity norms of the update and of the pre-update residual,
        both over active cells only.
    """
    if traversal not in ("forward", "reverse"):
        raise ValueError("traversal must be 'forward' or 'reverse'")
    return _Sweeper(problem).jacobi(omega, reverse=traversal == "reverse")


def _iterate(problem, step, tol, max_iters):
    tol = float(tol)
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    diffs = []
    resids = []
    secs = []
    converged = False
    start = time.perf_counter()
    for _ in range(max_iters):
        dmax, rmax = step()
        secs.append(time.perf_counter() - start)
        diffs.append(dmax)
        resids.append(rmax)
        if not math.isfinite(dmax) or dmax > OVERFLOW_LIMIT:
            history = _history(diffs, resids, secs, tol, False)
            raise DivergenceError(
                f"update norm {dmax:.3e} exceeds the overflow guard "
                f"after {len(diffs)} steps",
                len(diffs),
                history,
            )
        if dmax < tol:
            converged = True
            break
    return _history(diffs, resids, secs, tol, converged)


def _history(diffs, resids, secs, tol, converged):
    return ResidualHistory(
        residual_inf=np.asarray(diffs),
        true_residual_inf=np.asarray(resids),
        seconds=np.asarray(secs),
        tolerance=tol,
        converged=converged,
    )


def srj_solve(problem, cycle, tol, max_iters=10_000_000):
    """Relax with the cycle's weight sequence until the update stalls.

    Elementary steps follow ``cycle.weight_sequence`` in order,
    repeating the M-cycle as needed.  Convergence is checked after
    every elementary step against the relaxation-normalized update
    norm, so a solve may stop mid-cycle; the normalization keeps the
    check meaningful at every schedule position (a raw update norm
    would shrink on small-weight steps regardless of how far the field
    still is from the solution).

    Parameters
    ----------
    problem : GridProblem
        Mutated in place.
    cycle : CycleSchedule
        A validated integer schedule.
    tol : float
        Stop once the per-unit-relaxation update infinity norm drops
        below this value.
    max_iters : int
        Cap on elementary steps; on exhaustion the history is returned
        with ``converged=False``.

    Returns
    -------
    (ResidualHistory, ndarray)
        The convergence record and the interior of the solution field.

    Raises
    ------
    DivergenceError
        If an update norm overflows the guard.
    """
    weights = np.asarray(cycle.weight_sequence, dtype=float)
    sweeper = _Sweeper(problem)
    counter = [0]

    def step():
        omega = weights[counter[0] % len(weights)]
        counter[0] += 1
        dmax, rmax = sweeper.jacobi(omega)
        return dmax / abs(omega), rmax

    history = _iterate(problem, step, tol, max_iters)
    return history, problem.interior


def jacobi_solve(problem, tol, max_iters=10_000_000):
    """Plain Jacobi iteration (weighted Jacobi with omega = 1)."""
    sweeper = _Sweeper(problem)
    history = _iterate(problem, lambda: sweeper.jacobi(1.0), tol, max_iters)
    return history, problem.interior


def gauss_seidel_solve(problem, tol, max_iters=10_000_000):
    """Gauss-Seidel iteration, updating in place in lexicographic order."""
    sweeper = _Sweeper(problem)
    history = _iterate(
        problem, lambda: sweeper.gauss_seidel(1.0), tol, max_iters
    )
    return history, problem.interior


def sor_solve(problem, omega, tol, max_iters=10_000_000):
    """Successive over-relaxation: Gauss-Seidel with relaxation factor."""
    if not 0.0 < omega < 2.0:
        raise ValueError("SOR relaxation factor must lie in (0, 2)")
    sweeper = _Sweeper(problem)

    def step():
        dmax, rmax = sweeper.gauss_seidel(omega)
        return dmax / omega, rmax

    history = _iterate(problem, step, tol, max_iters)
    return history, problem.interior
