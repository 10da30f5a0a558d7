"""Benchmark elliptic problems with their analytic solutions.

Constructors for the test problems the solvers are exercised on: the
2-D Laplace equation with homogeneous Neumann boundaries, a 2-D
Dirichlet Poisson problem with a known exponential solution, the
Poisson equation in spherical coordinates (1-D to 3-D) with a
compact-support Bessel/harmonic source, and the linear Grad-Shafranov
equation on a spherical shell, including its masked arbitrary-boundary
variant.

Every case that has a closed-form solution is returned as an
:class:`AnalyticCase` pairing the assembled :class:`~srj.grids.GridProblem`
with the exact field, so solvers can be checked for discretization-order
accuracy rather than mere convergence.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import FIXED, MIRROR, PERIODIC, GridProblem

__all__ = [
    "THETA1",
    "THETA2",
    "AnalyticCase",
    "SeriesStallError",
    "SphericalSourceSpec",
    "cell_centers",
    "grad_shafranov",
    "laplace2d_neumann",
    "poisson2d_dirichlet",
    "real_spherical_harmonic",
    "spherical_bessel_first_root",
    "spherical_jn",
    "spherical_poisson",
]

# Intersections of the masked-region boundary with the r=1 sphere,
# taken verbatim for bit-stable boundary data.
THETA1 = 0.3037
THETA2 = 2.8903

_SERIES_MAX_TERMS = 200
_SERIES_RTOL = 1e-16


class SeriesStallError(RuntimeError):
    """Series failed to meet the stopping rule within the term budget."""


@dataclass
class AnalyticCase:
    """A grid problem paired with its exact continuum solution.

    Attributes
    ----------
    problem : GridProblem
        Ready-to-solve discretization, field initialized for the
        ab-initio run.
    exact_solution : callable
        Exact solution as a function of the axis coordinates (one
        argument per axis, broadcasting).
    description : str
    axes : tuple of ndarray
        Interior cell-center coordinates per axis.
    source_spec : SphericalSourceSpec or None
        Series bookkeeping for the spherical cases.
    """

    problem: GridProblem
    exact_solution: object
    description: str
    axes: tuple
    source_spec: object = None

    def exact_field(self):
        """Exact solution evaluated on the interior cell centers."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return self.exact_solution(*grids)

    def error_inf(self):
        """Infinity norm of (current field - exact), active cells only."""
        err = np.abs(self.problem.interior - self.exact_field())
        return float(np.max(err[self.problem._active]))


def cell_centers(lo, hi, n):
    """Staggered cell-center coordinates: n cells spanning [lo, hi]."""
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h


# ---------------------------------------------------------------------------
# special functions

def spherical_jn(l, x):
    """Spherical Bessel function of the first kind, j_l(x).

    Upward recurrence where it is stable (x > l), Miller's downward
    recurrence normalized by j_0 otherwise.

    Parameters
    ----------
    l : int
        Order, >= 0.
    x : array_like
        Argument, >= 0.

    Returns
    -------
    ndarray or float
    """
    if l < 0:
        raise ValueError("order must be nonnegative")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)

    tiny = x < 1e-12
    out[tiny] = 1.0 if l == 0 else 0.0
    rest = ~tiny
    if np.any(rest):
        xr = x[rest]
        up = xr > l
        vals = np.empty_like(xr)
        if np.any(up):
            vals[up] = _jn_upward(l, xr[up])
        if np.any(~up):
            vals[~up] = _jn_downward(l, xr[~up])
        out[rest] = vals
    return float(out[0]) if scalar else out


def _jn_upward(l, x):
    jm = np.sin(x) / x
    if l == 0:
        return jm
    jc = jm / x - np.cos(x) / x
    for n in range(1, l):
        jm, jc = jc, (2 * n + 1) / x * jc - jm
    return jc


def _jn_downward(l, x):
    # Start high enough above both l and x that the minimal solution
    # dominates by the time the recursion reaches order l.
    start = l + 40
    jp = np.zeros_like(x)
    jc = np.full_like(x, 1e-30)
    stored = np.zeros_like(x)
    for n in range(start, 0, -1):
        jp, jc = jc, (2 * n + 1) / x * jc - jp
        if n - 1 == l:
            stored = jc.copy()
        big = np.abs(jc) > 1e250  # rescale before the growth overflows
        if np.any(big):
            jc[big] *= 1e-250
            jp[big] *= 1e-250
            stored[big] *= 1e-250
    # jc now holds the unnormalized j_0; anchor against the true value.
    return stored * (np.sin(x) / x) / jc


def spherical_bessel_first_root(l):
    """First positive zero of j_l, bracketed then bisected.

    Parameters
    ----------
    l : int
        Order, >= 0.

    Returns
    -------
    float
        Root to 1e-12 relative accuracy (j_0 gives exactly pi).
    """
    if l < 0:
        raise ValueError("order must be nonnegative")
    if l == 0:
        return math.pi
    # j_l is positive from 0 up to its first zero, which sits a few
    # times l**(1/3) above l.
    a = l + 0.5
    fa = spherical_jn(l, a)
    b = a
    limit = l + 3.0 * l ** (1.0 / 3.0) + 10.0
    while True:
        b += 0.25
        fb = spherical_jn(l, b)
        if fa * fb < 0.0:
            break
        a, fa = b, fb
        if b > limit:  # pragma: no cover - roots sit well inside the scan
            raise RuntimeError(f"no sign change found for order {l}")
    # Bisect to floating-point exhaustion (comfortably inside the 1e-12
    # relative contract); the interval halves to sub-ulp width quickly.
    while True:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            return m
        fm = spherical_jn(l, m)
        if fa * fm <= 0.0:
            b = m
        else:
            a, fa = m, fm


def real_spherical_harmonic(l, m, theta, phi):
    """Real part of the orthonormal complex spherical harmonic Y_l^m.

    Parameters
    ----------
    l, m : int
        Degree and order, |m| <= l.
    theta : array_like
        Polar angle in [0, pi].
    phi : array_like
        Azimuthal angle.

    Returns
    -------
    ndarray or float
    """
    if abs(m) > l:
        raise ValueError("order must satisfy |m| <= l")
    return np.real(_sph_harm(l, m, theta, phi))


def _sph_harm(l, m, theta, phi):
    try:
        from scipy.special import sph_harm_y

        return sph_harm_y(l, m, theta, phi)
    except ImportError:  # pragma: no cover - older scipy spells it sph_harm
        from scipy.special import sph_harm

        return sph_harm(m, l, phi, theta)


# ---------------------------------------------------------------------------
# Cartesian model problems

def laplace2d_neumann(n):
    """Laplace equation on the unit square, Neumann everywhere.

    Cell-centered n x n grid with mirrored ghosts, zero source.  The
    discrete operator is the 5-point negative Laplacian, so the slowest
    nonconstant mode decays per Jacobi step by kappa_min(n, 2).

    Parameters
    ----------
    n : int
        Cells per dimension, >= 4.

    Returns
    -------
    GridProblem
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    h = 1.0 / n
    shape = (n, n)
    off = np.full(shape, -1.0 / h**2)
    return GridProblem(
        spacing=(h, h),
        u=np.zeros((n + 2, n + 2)),
        source=np.zeros(shape),
        center=np.full(shape, 4.0 / h**2),
        lower=(off, off.copy()),
        upper=(off.copy(), off.copy()),
        bc=((MIRROR, MIRROR), (MIRROR, MIRROR)),
        description=f"laplace2d-neumann n={n}",
    )


def poisson2d_dirichlet(nx, ny):
    """Poisson problem on the unit square with solution -exp(x*y).

    Vertex-centered nx x ny grid including the boundary points, which
    double as the fixed ghost layer; the unknowns are the
    (nx-2) x (ny-2) interior points.  Discretizes
    ``-laplacian(u) = exp(x*y)*(x^2 + y^2)`` with boundary values
    taken from the exact solution, e.g. u(0, y) = -1.

    Parameters
    ----------
    nx, ny : int
        Grid points per axis, >= 4.

    Returns
    -------
    AnalyticCase
    """
    if nx < 4 or ny < 4:
        raise ValueError("nx and ny must be at least 4")
    hx = 1.0 / (nx - 1)
    hy = 1.0 / (ny - 1)
    x = np.arange(nx) * hx
    y = np.arange(ny) * hy
    exact = lambda xx, yy: -np.exp(xx * yy)  # noqa: E731

    u = np.zeros((nx, ny))
    full = exact(x[:, None], y[None, :])
    u[0, :] = full[0, :]
    u[-1, :] = full[-1, :]
    u[:, 0] = full[:, 0]
    u[:, -1] = full[:, -1]

    xi = x[1:-1][:, None]
    yi = y[1:-1][None, :]
    shape = (nx - 2, ny - 2)
    problem = GridProblem(
        spacing=(hx, hy),
        u=u,
        source=np.exp(xi * yi) * (xi**2 + yi**2),
        center=np.full(shape, 2.0 / hx**2 + 2.0 / hy**2),
        lower=(np.full(shape, -1.0 / hx**2), np.full(shape, -1.0 / hy**2)),
        upper=(np.full(shape, -1.0 / hx**2), np.full(shape, -1.0 / hy**2)),
        bc=((FIXED, FIXED), (FIXED, FIXED)),
        description=f"poisson2d-dirichlet {nx}x{ny}",
    )
    return AnalyticCase(
        problem=problem,
        exact_solution=exact,
        description=problem.description,
        axes=(x[1:-1], y[1:-1]),
    )


# ---------------------------------------------------------------------------
# spherical Poisson

@dataclass
class SphericalSourceSpec:
    """Series data for the compact-support spherical source.

    The source is a sum over even degrees l = 2n of terms
    ``-a_l * k_l^2 * j_l(k_l r) * Y_l^{m,c}`` inside r <= 1 and zero
    outside, with a_l = 2^-l and k_l the first positive root of j_l, so
    the source vanishes at r = 1.  The matching solution coefficients
    follow from continuity of u and u' at r = 1.

    ``terms_used`` and ``increments`` record the series assembly: how
    many n-blocks the stopping rule kept and each block's largest
    absolute contribution.
    """

    n_max: int | None
    m_max_rule: str  # "2n" for the full 3-D sum, "0" for axisymmetry
    roots: dict = field(default_factory=dict)
    terms_used: int = 0
    increments: list = field(default_factory=list)

    def a(self, l):
        return 2.0 ** (-l)

    def k(self, l):
        if l not in self.roots:
            self.roots[l] = spherical_bessel_first_root(l)
        return self.roots[l]

    def b(self, l):
        """Interior/exterior matching coefficient b_l = c_l."""
        k = self.k(l)
        return -self.a(l) / (2 * l + 1) * (
            l * spherical_jn(l, k) - k * spherical_jn(l + 1, k)
        )

    def harmonic_sum(self, l, theta, phi):
        """Sum of Re Y_l^m over the orders this spec includes."""
        if self.m_max_rule == "0":
            return real_spherical_harmonic(l, 0, theta, phi)
        total = real_spherical_harmonic(l, 0, theta, phi)
        # Re Y_l^{-m} = (-1)^m Re Y_l^m, so the +-m pairs cancel for odd
        # m and double for even m.
        for m in range(2, l + 1, 2):
            total = total + 2.0 * real_spherical_harmonic(l, m, theta, phi)
        return total


def _sum_series(spec, block):
    """Accumulate n-blocks until the stopping rule fires.

    The rule formalizes "add terms until the last significant digit
    does not change": stop once a block's contribution at the grid
    point maximizing the previous block falls below 1e-16 of the
    running sum there.
    """
    spec.increments = []
    total = None
    prev_argmax = None
    count = 0
    for n in range(_SERIES_MAX_TERMS):
        if spec.n_max is not None and n > spec.n_max:
            break
        term = block(n)
        count += 1
        spec.increments.append(float(np.max(np.abs(term))))
        total = term.copy() if total is None else total + term
        if prev_argmax is not None:
            ref = abs(total.flat[prev_argmax])
            if abs(term.flat[prev_argmax]) < _SERIES_RTOL * ref:
                break
        prev_argmax = int(np.argmax(np.abs(term)))
    else:
        raise SeriesStallError(
            f"series did not settle within {_SERIES_MAX_TERMS} terms"
        )
    spec.terms_used = count
    return total


def _spherical_series(spec, r, theta, phi, kind):
    """Source or solution series on a broadcast (r, theta, phi) grid.

    kind selects the branch: "source" (r <= 1), "interior" solution
    (a_l j_l(k_l r) + b_l r^l), or "exterior" solution (c_l / r^(l+1)).
    """
    if spec.m_max_rule == "0" and theta is None:
        angular = lambda l: real_spherical_harmonic(l, 0, 0.0, 0.0)  # noqa: E731
    else:
        angular = lambda l: spec.harmonic_sum(l, theta, phi)  # noqa: E731

    def block(n):
        l = 2 * n
        k = spec.k(l)
        if kind == "source":
            radial = -spec.a(l) * k**2 * spherical_jn(l, k * r)
        elif kind == "interior":
            radial = spec.a(l) * spherical_jn(l, k * r) + spec.b(l) * r**l
        elif kind == "exterior":
            radial = spec.b(l) / r ** (l + 1)
        else:
            raise ValueError(f"unknown series kind {kind!r}")
        return radial * angular(l)

    return _sum_series(spec, block)


def spherical_poisson(d, n):
    """Poisson equation in spherical coordinates with a series source.

    Discretizes the r^2-multiplied operator on a staggered grid of n
    cells per axis covering r in [0,1] (and theta in [0,pi], phi in
    [0,2pi] as dimensionality allows).  The inner radial boundary ties
    u_0 = u_1 = u_2, which keeps the effective matrix diagonally
    dominant; the first radial cell layer is therefore slaved, not
    solved.  The outer ghost carries the exact exterior solution, theta
    uses mirrored ghosts and phi is periodic.

    Parameters
    ----------
    d : {1, 2, 3}
        Dimensionality: 1 is spherically symmetric (only the l=0 term),
        2 axisymmetric (m=0 terms), 3 the full sum with m up to 2n.
    n : int
        Cells per axis, >= 8.

    Returns
    -------
    AnalyticCase

    Raises
    ------
    SeriesStallError
        If a series fails to settle within 200 terms.
    """
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if n < 8:
        raise ValueError("n must be at least 8")
    if d == 1:
        spec = SphericalSourceSpec(n_max=0, m_max_rule="0")
    elif d == 2:
        spec = SphericalSourceSpec(n_max=None, m_max_rule="0")
    else:
        spec = SphericalSourceSpec(n_max=None, m_max_rule="2n")

    dr = 1.0 / n
    r = cell_centers(0.0, 1.0, n)
    r_ghost = 1.0 + 0.5 * dr

    shape = (n,) * d
    # r^2-multiplied radial coefficients; the theta/phi parts divide out
    # their r^2 factor entirely.
    rad_lower = r * (r - dr) / dr**2
    rad_upper = r * (r + dr) / dr**2
    rad_center = -2.0 * r**2 / dr**2

    # Ghost data and exact-solution callables sum on fresh spec copies so
    # the attached spec's bookkeeping describes the source series alone.
    fresh = lambda: SphericalSourceSpec(spec.n_max, spec.m_max_rule)  # noqa: E731

    theta = phi = None
    if d == 1:
        rgrid = r
        center = rad_center.copy()
        lower = (rad_lower.copy(),)
        upper = (rad_upper.copy(),)
        bc = ((FIXED, FIXED),)
        exact = lambda rr: _spherical_series(  # noqa: E731
            fresh(), rr, None, None, "interior"
        )
        ghost_val = _spherical_series(
            fresh(), np.asarray(r_ghost), None, None, "exterior"
        )
        axes = (r,)
    else:
        dth = math.pi / n
        theta = cell_centers(0.0, math.pi, n)
        cot = 1.0 / np.tan(theta)
        th_lower = 1.0 / dth**2 - cot / (2.0 * dth)
        th_upper = 1.0 / dth**2 + cot / (2.0 * dth)
        if d == 2:
            rgrid = r[:, None]
            thgrid = theta[None, :]
            center = rad_center[:, None] - 2.0 / dth**2 + np.zeros(shape)
            lower = (
                rad_lower[:, None] + np.zeros(shape),
                th_lower[None, :] + np.zeros(shape),
            )
            upper = (
                rad_upper[:, None] + np.zeros(shape),
                th_upper[None, :] + np.zeros(shape),
            )
            bc = ((FIXED, FIXED), (MIRROR, MIRROR))
            exact = lambda rr, tt: _spherical_series(  # noqa: E731
                fresh(), rr, tt, 0.0, "interior"
            )
            ghost_val = _spherical_series(
                fresh(), np.asarray(r_ghost), theta[None, :], 0.0, "exterior"
            )[0]
            axes = (r, theta)
        else:
            dph = 2.0 * math.pi / n
            phi = cell_centers(0.0, 2.0 * math.pi, n)
            rgrid = r[:, None, None]
            thgrid = theta[None, :, None]
            phgrid = phi[None, None, :]
            sin2 = np.sin(theta) ** 2
            ph_coef = 1.0 / (sin2 * dph**2)
            center = (
                rad_center[:, None, None]
                - 2.0 / dth**2
                - 2.0 * ph_coef[None, :, None]
                + np.zeros(shape)
            )
            lower = (
                rad_lower[:, None, None] + np.zeros(shape),
                th_lower[None, :, None] + np.zeros(shape),
                ph_coef[None, :, None] + np.zeros(shape),
            )
            upper = (
                rad_upper[:, None, None] + np.zeros(shape),
                th_upper[None, :, None] + np.zeros(shape),
                ph_coef[None, :, None] + np.zeros(shape),
            )
            bc = ((FIXED, FIXED), (MIRROR, MIRROR), (PERIODIC, PERIODIC))
            exact = lambda rr, tt, pp: _spherical_series(  # noqa: E731
                fresh(), rr, tt, pp, "interior"
            )
            ghost_val = _spherical_series(
                fresh(), np.asarray(r_ghost), thgrid, phgrid, "exterior"
            )[0]
            axes = (r, theta, phi)

    if d == 1:
        source = rgrid**2 * _spherical_series(spec, rgrid, None, None, "source")
    elif d == 2:
        source = rgrid**2 * _spherical_series(spec, rgrid, thgrid, 0.0, "source")
    else:
        source = rgrid**2 * _spherical_series(spec, rgrid, thgrid, phgrid, "source")
    source = source + np.zeros(shape)

    u = np.zeros(tuple(m + 2 for m in shape))
    # Outer Dirichlet data, written once into the upper radial ghost
    # face (corners of the ghost frame are never read).
    u[(-1,) + (slice(1, -1),) * (d - 1)] = ghost_val

    mask = np.ones(shape, dtype=bool)
    mask[0] = False  # first radial layer is slaved to the second

    def tie_origin(uu):
        # u_0 = u_1 = u_2: zero-gradient ghost plus the slaved first cell.
        uu[1] = uu[2]
        uu[0] = uu[2]

    problem = GridProblem(
        spacing=(dr,) + ((dth,) if d >= 2 else ()) + ((dph,) if d == 3 else ()),
        u=u,
        source=source,
        center=center,
        lower=lower,
        upper=upper,
        bc=bc,
        mask=mask,
        post_sweep=tie_origin,
        description=f"spherical-poisson d={d} n={n}",
    )
    return AnalyticCase(
        problem=problem,
        exact_solution=exact,
        description=problem.description,
        axes=axes,
        source_spec=spec,
    )


# ---------------------------------------------------------------------------
# Grad-Shafranov

def _gs_region(r, theta):
    """Cell-center membership for the masked test-B region.

    The shape curve bounds the region from outside; the unit disk
    centered at (x, y) = (4, 1.6) is carved out of it (the printed
    conjunction cannot intersect r = 1, so the disk reads as a hole).
    """
    shape = (4.5 * np.sin(theta) ** 2 + 2.5 * np.sin(2.0 * theta) ** 2) * (
        1.0
        - 0.4 * np.cos(3.0 * theta)
        + 0.3 * np.cos(5.0 * theta)
        + 0.05 * np.sin(25.0 * theta)
    )
    x = r * np.sin(theta)
    y = r * np.cos(theta)
    hole = (x - 4.0) ** 2 + (y - 1.6) ** 2 < 1.0
    return (r < shape) & ~hole


def grad_shafranov(test, c, n):
    """Linear Grad-Shafranov problem on r in [1,10], theta in [0,pi].

    Discretizes ``Delta* psi + C^2 psi = 0`` on an n x n grid, folding
    the C^2 term into the stencil center.  The radial axis carries n
    equispaced nodes including r = 1 and r = 10, whose boundary rows
    hold the Dirichlet data exactly; the theta axis carries n cells
    with mirrored ends, matching the zero-slope symmetry every
    boundary profile here has at the poles.  Test A imposes
    psi = sin(theta)^2 / r at r = 1 and r = 10 (for C = 0 the exact
    solution is the boundary profile itself, which also vanishes at
    the poles).  Test B solves only inside a masked region whose
    boundary meets r = 1 at THETA1 and THETA2; the r = 1 edge carries
    a sin^2 arc profile there, every other boundary is homogeneous,
    and nodes outside the region are pinned to the zero Dirichlet
    value.

    Parameters
    ----------
    test : {"A", "B"}
    c : float
        Toroidal-function constant C.
    n : int
        Nodes per axis, >= 16.

    Returns
    -------
    GridProblem
        Field initialized to zero.
    """
    if test not in ("A", "B"):
        raise ValueError("test must be 'A' or 'B'")
    if n < 16:
        raise ValueError("n must be at least 16")
    # Radial nodes include r=1 and r=10 so Dirichlet data sits exactly
    # on the boundary; theta is cell-centered with mirrored ends, which
    # keeps cot(theta) finite and imposes the symmetry the poles
    # physically carry (the boundary profiles all have zero slope
    # there).  The mirrored poles also admit theta-constant fields,
    # whose first radial eigenvalue C = pi/9 is what stalls the
    # iteration as C grows toward 0.35.
    dr = 9.0 / (n - 1)
    dth = math.pi / n
    r = 1.0 + np.arange(n) * dr
    theta = cell_centers(0.0, math.pi, n)
    ri = r[1:-1]
    cot = 1.0 / np.tan(theta)

    shape = (n - 2, n)
    r2 = (ri**2)[:, None]
    center = -2.0 / dr**2 - 2.0 / (r2 * dth**2) + c**2 + np.zeros(shape)
    rad = np.full(shape, 1.0 / dr**2)
    # Delta* carries -cot(theta)/r^2 d/dtheta, hence the sign split.
    th_lower = (1.0 / dth**2 + cot[None, :] / (2.0 * dth)) / r2 + np.zeros(shape)
    th_upper = (1.0 / dth**2 - cot[None, :] / (2.0 * dth)) / r2 + np.zeros(shape)

    u = np.zeros((n, n + 2))
    mask = None
    if test == "A":
        u[0, 1:-1] = np.sin(theta) ** 2 / r[0]
        u[-1, 1:-1] = np.sin(theta) ** 2 / r[-1]
    else:
        arc = (theta >= THETA1) & (theta <= THETA2)
        u[0, 1:-1] = np.where(
            arc,
            np.sin((theta - THETA1) / (THETA2 - THETA1) * math.pi) ** 2,
            0.0,
        )
        # Node membership in the region; excluded nodes stay at the
        # homogeneous Dirichlet value their neighbors read.
        mask = _gs_region(ri[:, None], theta[None, :])

    problem = GridProblem(
        spacing=(dr, dth),
        u=u,
        source=np.zeros(shape),
        center=center,
        lower=(rad, th_lower),
        upper=(rad.copy(), th_upper),
        bc=((FIXED, FIXED), (MIRROR, MIRROR)),
        mask=mask,
        description=f"grad-shafranov-{test} C={c} n={n}",
    )
    return problem
