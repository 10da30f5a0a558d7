"""Optimal SRJ parameter computation.

Optimal P-level schedules equalize the maxima of the amplification factor
Gamma over the design spectrum [kappa_min, 2].  With the repetition
fractions beta and the sensitivities domega/dbeta eliminated through closed
forms, the remaining unknowns are the P weights omega and the P-1 interior
extremum locations kappa, coupled by a square nonlinear system of 2P-1
equations: P equal-maxima conditions plus P-1 stationarity conditions of
log Gamma(kappa_min) with respect to the free fractions.

The system is solved by a damped Newton iteration on the logarithms of the
unknowns (which keeps them positive), with finite-difference Jacobians and a
backtracking line search confined to the feasible cone where the omegas
decrease strictly and each kappa_i stays interleaved between the poles
1/omega_i and 1/omega_{i+1}.  Conditioning degrades quickly with P, so the
closed forms below are written generically over the scalar type: plain
floats for small systems, mpmath arbitrary-precision numbers beyond.

Continuation in P provides the starting points: anchors omega_1 and omega_P
are extrapolated from lower-level solutions by conic fits, the remaining
inverse weights are spread on a near-geometric ladder between them, and each
interior kappa starts a third of the way into its interleaving interval.
"""

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from srj.core import KAPPA_MAX, KappaRange, PoleError, WeightSchedule, kappa_min

__all__ = [
    "DOUBLE_DIGITS",
    "EXTENDED_DIGITS",
    "OptimizeError",
    "NoConvergenceError",
    "InterleavingError",
    "InsufficientPriorsError",
    "OptimizerState",
    "SolveReport",
    "beta_from",
    "domega_dbeta",
    "residual",
    "initial_guess",
    "solve",
]

# Precision policy: plain doubles while the system is benign, 40-digit
# software floats beyond (conditioning grows with both P and N).
DOUBLE_DIGITS = 16
EXTENDED_DIGITS = 40
_DOUBLE_TOL = 1e-12
_EXTENDED_TOL = mpmath.mpf("1e-20")
_MAX_HALVINGS = 40


class OptimizeError(Exception):
    """Base class for optimizer failures."""


class NoConvergenceError(OptimizeError):
    """Newton iteration failed to reach the residual tolerance.

    Attributes
    ----------
    best_residual : float
        Smallest residual infinity-norm reached before giving up.
    iterations : int
        Newton iterations spent.
    """

    def __init__(self, message, best_residual, iterations):
        super().__init__(message)
        self.best_residual = float(best_residual)
        self.iterations = int(iterations)


class InterleavingError(OptimizeError):
    """Backtracking could not return the iterate to the feasible cone."""


class InsufficientPriorsError(OptimizeError):
    """Too few lower-level solutions to build an initial guess."""


@dataclass(frozen=True)
class OptimizerState:
    """Newton iterate: weights and interior extremum locations.

    Scalars may be floats or mpmath numbers; precision_digits records which.
    """

    omegas: tuple
    kappas: tuple
    kappa_bounds: KappaRange
    precision_digits: int

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(self.omegas))
        object.__setattr__(self, "kappas", tuple(self.kappas))
        om, kap = self.omegas, self.kappas
        if len(kap) != len(om) - 1:
            raise ValueError("need exactly P-1 interior kappas")
        if any(om[i] <= om[i + 1] for i in range(len(om) - 1)) or om[-1] <= 0:
            raise ValueError("omegas must be positive and strictly decreasing")
        for i, k in enumerate(kap):
            if not 1 / om[i] < k < 1 / om[i + 1]:
                raise InterleavingError(
                    f"kappa_{i + 1}={float(k):.6g} outside "
                    f"(1/omega_{i + 1}, 1/omega_{i + 2})"
                )

    @property
    def p(self):
        return len(self.omegas)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one optimal-schedule solve."""

    schedule: WeightSchedule
    newton_iterations: int
    final_residual_norm: float
    precision_digits_used: int


def _logabs(x):
    """log|x| for a float or mpmath scalar; raises on zero."""
    if isinstance(x, (float, int)):
        return math.log(abs(x))
    return mpmath.log(abs(x))


def beta_from(omegas, kappas):
    """Repetition fractions from weights and interior extremum locations.

    beta_i = prod_{k<P} (1 - kappa_k*omega_i) * prod_{l!=i} omega_l/(omega_l - omega_i)

    At any interleaved state the result sums to 1 identically; the
    components are the fractions solving the equal-maxima conditions for
    the given (omega, kappa).

    Parameters
    ----------
    omegas : sequence of P scalars, strictly decreasing.
    kappas : sequence of P-1 scalars, interleaved with 1/omega.

    Returns
    -------
    list of P scalars of the input type.
    """
    p = len(omegas)
    if len(kappas) != p - 1:
        raise ValueError("need P-1 kappas for P omegas")
    betas = []
    for i in range(p):
        b = omegas[i] ** 0  # one, in the scalar type of the input
        for k in range(p - 1):
            b = b * (1 - kappas[k] * omegas[i])
        for l in range(p):
            if l != i:
                try:
                    b = b * (omegas[l] / (omegas[l] - omegas[i]))
                except ZeroDivisionError:
                    raise ZeroDivisionError(
                        f"omegas {i + 1} and {l + 1} coincide"
                    ) from None
        betas.append(b)
    return betas


def _atilde(omegas, kap, betas, i, j):
    # row i, column j of the explicit inverse of the matrix
    # A = (kappa_i beta_j / (1 - kappa_i omega_j)); kap includes kappa_P = 2
    p = len(omegas)
    t = (1 - kap[j] * omegas[i]) / (betas[i] * kap[j])
    for k in range(p):
        if k != j:
            t = t * ((1 - kap[k] * omegas[i]) / (kap[k] - kap[j]))
    for l in range(p):
        if l != i:
            t = t * ((1 - kap[j] * omegas[l]) / (omegas[l] - omegas[i]))
    return t


def domega_dbeta(omegas, kappas, betas):
    """Sensitivities of the weights to the free repetition fractions.

    Entry (i, q) is domega_i/dbeta_q along the manifold where the
    equal-maxima conditions keep holding, for q = 1..P-1:

        sum_j atilde_ij * log|(1 - kappa_j*omega_q)/(1 - kappa_j*omega_P)|

    with kappa_P = 2 appended to the interior kappas and atilde the explicit
    inverse from the partial-fraction lemma.

    Returns
    -------
    list of P rows, each a list of P-1 scalars.

    Raises
    ------
    PoleError
        If some kappa_j * omega_q equals 1 exactly.
    """
    p = len(omegas)
    one = omegas[0] ** 0
    kap = list(kappas) + [one * KAPPA_MAX]
    for j in range(p):
        for q in range(p):
            if 1 - kap[j] * omegas[q] == 0:
                raise PoleError(f"kappa_{j + 1} * omega_{q + 1} == 1")
    logs = [
        [
            _logabs((1 - kap[j] * omegas[q]) / (1 - kap[j] * omegas[p - 1]))
            for j in range(p)
        ]
        for q in range(p)
    ]
    out = []
    for i in range(p):
        row = []
        for q in range(p - 1):
            s = 0 * one
            for j in range(p):
                s = s + _atilde(omegas, kap, betas, i, j) * logs[q][j]
            row.append(s)
        out.append(row)
    return out


def residual(state):
    """The 2P-1 optimality equations evaluated at a state.

    First P entries: log Gamma(kappa_min) - log Gamma(kappa_i) for the P-1
    interior extrema and for kappa = 2 (equal maxima).  Last P-1 entries:
    the total derivative of log Gamma(kappa_min) with respect to each free
    fraction beta_j,

        log|1 - omega_j*k0| - log|1 - omega_P*k0|
            - k0 * sum_i beta_i * (domega_i/dbeta_j) / (1 - omega_i*k0),

    which vanishes at the optimum.  Fractions are recovered by beta_from,
    so beta is never an explicit unknown.

    Returns
    -------
    list of 2P-1 scalars of the state's type.
    """
    om = list(state.omegas)
    kap = list(state.kappas)
    p = len(om)
    km = om[0] ** 0 * state.kappa_bounds.kappa_min
    betas = beta_from(om, kap)

    def lg(k):
        s = 0 * km
        for i in range(p):
            s = s + betas[i] * _logabs(1 - om[i] * k)
        return s

    lg0 = lg(km)
    out = [lg0 - lg(k) for k in kap]
    out.append(lg0 - lg(om[0] ** 0 * KAPPA_MAX))
    if p > 1:
        dwdb = domega_dbeta(om, kap, betas)
        base = _logabs(1 - om[p - 1] * km)
        for j in range(p - 1):
            s = 0 * km
            for i in range(p):
                s = s + betas[i] * dwdb[i][j] / (1 - om[i] * km)
            out.append(_logabs(1 - om[j] * km) - base - km * s)
    return out


def _ladder_exponents(p):
    # near-geometric spacing for the inverse weights, with a wider gap
    # around the middle of the ladder; exponents are over 2(P-1)
    if p % 2:
        e = [0, *range(1, p - 3, 2), p - 1, *range(p + 2, 2 * p - 2, 2), 2 * p - 2]
    else:
        e = [0, *range(1, p - 4, 2), p - 2, p, *range(p + 3, 2 * p - 2, 2), 2 * p - 2]
    if len(e) != p:
        raise ValueError(f"no ladder for P={p}")
    return e


def _fit_parabola(ps, ys, p_new):
    c = np.polyfit(ps, ys, 2)
    return float(np.polyval(c, p_new))


def _extrapolate(ps, ys, p_new):
    # conic extrapolation of an anchor weight to the next level count:
    # 2 points give a line, 3 a parabola, 4 a parabola-or-hyperbola chosen
    # by the flatness of the second divided differences
    ps = [float(q) for q in ps[-4:]]
    ys = [float(y) for y in ys[-4:]]
    if len(ps) < 2:
        raise InsufficientPriorsError("need at least 2 prior levels")
    if len(ps) == 2:
        slope = (ys[1] - ys[0]) / (ps[1] - ps[0])
        return ys[1] + slope * (p_new - ps[1])
    if len(ps) == 3:
        return _fit_parabola(ps, ys, p_new)
    d2 = [
        (ys[i + 2] - ys[i + 1]) / (ps[i + 2] - ps[i + 1])
        - (ys[i + 1] - ys[i]) / (ps[i + 1] - ps[i])
        for i in range(2)
    ]
    mean = abs(sum(ys)) / len(ys)
    flat = d2[0] * d2[1] <= 0 or max(abs(d2[0]), abs(d2[1])) < 1e-3 * mean
    if flat:
        return _fit_parabola(ps[-3:], ys[-3:], p_new)
    # hyperbola y = A/(p - B) + D through the last three points
    p0, y0, y1, y2 = ps[-3], ys[-3], ys[-2], ys[-1]
    denom = y1 - y2
    if denom == 0 or (y0 - y1) == denom:
        return _fit_parabola(ps[-3:], ys[-3:], p_new)
    r = (y0 - y1) / denom
    b = p0 + 2 / (1 - r)
    # a pole inside or beyond the data wrecks the extrapolation
    if b > p0:
        return _fit_parabola(ps[-3:], ys[-3:], p_new)
    a = (y0 - y1) * (p0 - b) * (p0 + 1 - b)
    d = y0 - a / (p0 - b)
    return a / (p_new - b) + d


def _seed_kappas(omegas):
    # place each kappa at log-position 0.4 of its pole interval; solved
    # schedules across the published range put the true extrema there,
    # while linear placement overshoots and the implied fractions come
    # out an order of magnitude off
    return [
        (1 / omegas[i]) * (omegas[i] / omegas[i + 1]) ** 0.4
        for i in range(len(omegas) - 1)
    ]


def initial_guess(p, n, priors=(), bc="neumann", d=2, digits=DOUBLE_DIGITS):
    """Starting state for the Newton solve at level count p.

    Parameters
    ----------
    p : int
        Target number of levels, >= 2.
    n : int
        Grid size fixing kappa_min.
    priors : sequence of WeightSchedule
        Solved schedules at the same n for lower level counts (the last
        four are used).  P=2 needs none: its anchors are the spectrum
        endpoints themselves.  P >= 3 needs at least two.
    bc, d : boundary kind and dimensionality, as in kappa_min.
    digits : precision the state is built for (guesses are double either way).

    Returns
    -------
    OptimizerState

    Raises
    ------
    InsufficientPriorsError
        For p >= 3 with fewer than two priors.
    """
    km = kappa_min(n, d, bc)
    bounds = KappaRange(km)
    if p < 2:
        raise ValueError("initial_guess starts at P=2; P=1 has a closed form")
    if p == 2:
        # anchors straight from the spectrum: omega_1 from the lowest mode
        # (backed off the pole the exact 1/kappa_min would sit on),
        # omega_P from the midpoint mode
        om = [0.9 / km, 2.0 / (2.0 + km)]
    else:
        priors = sorted(priors, key=lambda s: s.p)[-4:]
        if len(priors) < 2:
            raise InsufficientPriorsError(
                f"P={p} needs at least 2 lower-level solutions, got {len(priors)}"
            )
        ps = [s.p for s in priors]
        w1 = _extrapolate(ps, [float(s.omegas[0]) for s in priors], p)
        wp = _extrapolate(ps, [float(s.omegas[-1]) for s in priors], p)
        # keep the anchors inside the feasible cone; 0.5 exactly is a
        # dead factor at kappa = 2, so stay above it
        w1 = min(max(w1, 2.0), 0.95 / km)
        wp = min(max(wp, 0.55), 0.995)
        if w1 <= wp:
            w1 = 2.0 / km
        ratio = w1 / wp
        scale = 1.0 / (2.0 * (p - 1))
        om = [w1 * ratio ** (-e * scale) for e in _ladder_exponents(p)]
    return OptimizerState(
        omegas=om,
        kappas=_seed_kappas(om),
        kappa_bounds=bounds,
        precision_digits=digits,
    )


def _feasible(om, kap, km):
    p = len(om)
    if om[-1] <= 0:
        return False
    if any(om[i] <= om[i + 1] for i in range(p - 1)):
        return False
    if om[0] * km >= 1:
        return False
    for i in range(p - 1):
        if not 1 / om[i] < kap[i] < 1 / om[i + 1]:
            return False
    return True


def _try_residual(om, kap, km, bounds, digits):
    if not _feasible(om, kap, km):
        return None
    state = OptimizerState(om, kap, bounds, digits)
    try:
        return residual(state)
    except (ValueError, ZeroDivisionError, PoleError):
        return None


def _norm_inf(vec):
    return max(abs(v) for v in vec)


def _newton(om0, kap0, n, bc, d, digits, max_iter):
    """Damped Newton on log-unknowns; returns (omegas, kappas, iters, norm)."""
    extended = digits > DOUBLE_DIGITS
    km_f = kappa_min(n, d, bc)
    bounds = KappaRange(km_f)

    def run():
        if extended:
            one = mpmath.mpf(1)
            tol = mpmath.mpf(10) ** (-(digits // 2))
            if tol > _EXTENDED_TOL:
                tol = _EXTENDED_TOL
            h = mpmath.sqrt(mpmath.mpf(10) ** (-digits))
            km = one * km_f
        else:
            one = 1.0
            tol = _DOUBLE_TOL
            h = math.sqrt(2.0 ** -52)
            km = km_f

        p = len(om0)
        x = [mpmath.log(one * w) if extended else math.log(w) for w in om0]
        x += [mpmath.log(one * k) if extended else math.log(k) for k in kap0]
        m = len(x)
        exp = mpmath.exp if extended else math.exp

        def unpack(xv):
            vals = [exp(t) for t in xv]
            return vals[:p], vals[p:]

        def probe(xv):
            # residual at a candidate point; None when outside the cone,
            # on a pole, or past floating-point range
            try:
                om_c, kap_c = unpack(xv)
            except OverflowError:
                return None
            return _try_residual(om_c, kap_c, km, bounds, digits)

        om, kap = unpack(x)
        r = _try_residual(om, kap, km, bounds, digits)
        if r is None:
            raise InterleavingError("initial guess infeasible")
        r = list(r)
        norm = _norm_inf(r)
        best = (om, kap, norm)

        def fail(exc):
            # callers restart extended-precision Newton from the stall
            # point instead of re-running the whole anchor ladder
            exc.best_point = (
                [float(w) for w in best[0]],
                [float(k) for k in best[1]],
                float(best[2]),
            )
            raise exc

        history = [norm]
        for it in range(max_iter):
            if norm < tol:
                return om, kap, it, norm
            # a run in its basin at adequate precision halves the residual
            # far faster than this; cull wanderers early
            if it >= 25 and norm > history[it - 25] * 0.5:
                fail(NoConvergenceError("slow progress", best[2], it))
            # finite-difference Jacobian, column per log-unknown; central
            # where both sides are feasible, one-sided near cone edges
            cols = []
            for kvar in range(m):
                step = h * max(one, abs(x[kvar]))
                col = None
                for _ in range(3):
                    xp = list(x)
                    xm = list(x)
                    xp[kvar] = xp[kvar] + step
                    xm[kvar] = xm[kvar] - step
                    rp = probe(xp)
                    rm = probe(xm)
                    if rp is not None and rm is not None:
                        col = [(a - b) / (2 * step) for a, b in zip(rp, rm)]
                        break
                    if rp is not None:
                        col = [(a - b) / step for a, b in zip(rp, r)]
                        break
                    if rm is not None:
                        col = [(a - b) / step for a, b in zip(r, rm)]
                        break
                    step = step / 16
                if col is None:
                    fail(NoConvergenceError(
                        "cannot difference the residual at the iterate",
                        norm,
                        it,
                    ))
                cols.append(col)
            try:
                if extended:
                    jac = mpmath.matrix([[cols[j][i] for j in range(m)] for i in range(m)])
                    dx = mpmath.lu_solve(jac, mpmath.matrix([-v for v in r]))
                    dx = [dx[i] for i in range(m)]
                else:
                    jac = np.array(cols).T
                    dx = np.linalg.solve(jac, -np.asarray(r, dtype=float)).tolist()
            except (ZeroDivisionError, np.linalg.LinAlgError):
                fail(NoConvergenceError("singular Jacobian", norm, it))

            # cap the log-space step: no unknown moves by more than a
            # factor e**3 per iteration, which keeps wild early steps from
            # overflowing or tunnelling into foreign basins
            biggest = max(abs(v) for v in dx)
            if biggest > 3:
                dx = [v * 3 / biggest for v in dx]

            alpha = one
            accepted = False
            saw_feasible = False
            for _ in range(_MAX_HALVINGS):
                xc = [a + alpha * b for a, b in zip(x, dx)]
                rc = probe(xc)
                if rc is not None:
                    saw_feasible = True
                    nc = _norm_inf(rc)
                    if nc < norm:
                        x, r, norm = xc, rc, nc
                        om, kap = unpack(x)
                        accepted = True
                        break
                alpha = alpha / 2
            if not accepted:
                if not saw_feasible:
                    fail(InterleavingError(
                        f"backtracking left the feasible cone after "
                        f"{_MAX_HALVINGS} halvings (residual {float(norm):.3e})"
                    ))
                fail(NoConvergenceError("line search stalled", norm, it))
            if norm < best[2]:
                best = (om, kap, norm)
            history.append(norm)
        fail(NoConvergenceError("iteration cap reached", best[2], max_iter))

    if extended:
        with mpmath.workdps(digits):
            return run()
    return run()


def _report(om, kap, n, iters, norm, digits):
    betas = beta_from(om, kap)
    schedule = WeightSchedule(
        omegas=[float(w) for w in om],
        betas=np.array([float(b) for b in betas]) / sum(float(b) for b in betas),
        n=n,
    )
    return SolveReport(
        schedule=schedule,
        newton_iterations=iters,
        final_residual_norm=float(norm),
        precision_digits_used=digits,
    )


def _is_true_optimum(om, kap, km):
    # Newton can land on spurious roots; the optimum has genuine fractions
    # and damps every mode in the design band
    try:
        betas = beta_from(om, kap)
    except ZeroDivisionError:
        return False
    if any(not 0 < b < 1 for b in betas):
        return False
    total = sum(betas)
    if abs(total - 1) > 1e-8:
        return False
    omf = [float(w) for w in om]
    bf = [float(b) / float(total) for b in betas]
    for t in np.linspace(0.0, 1.0, 257):
        k = km * (2.0 / km) ** t
        g = sum(b * math.log(abs(1 - w * k)) for w, b in zip(omf, bf) if 1 != w * k)
        if g >= 1e-9:
            return False
    return True


def _solve_level(om0, kap0, n, bc, d, digits, max_iter):
    # when the double path stalls, resume at extended precision from the
    # stall point rather than replaying the whole trajectory in mpmath
    try:
        om, kap, iters, norm = _newton(om0, kap0, n, bc, d, digits, max_iter)
        return om, kap, iters, norm, digits
    except OptimizeError as err:
        if digits > DOUBLE_DIGITS:
            raise
        point = getattr(err, "best_point", None)
        if point is None:
            raise
        omf, kapf, _ = point
    om, kap, iters, norm = _newton(omf, kapf, n, bc, d, EXTENDED_DIGITS, max_iter)
    return om, kap, iters, norm, EXTENDED_DIGITS


def _anchor_candidates(p, n, priors, bc, d):
    """Starting omega vectors in priority order.

    The extrapolated-anchor guess comes first; behind it, a deterministic
    ladder of first-weight anchors omega_1 = c/kappa_min sweeping c
    downward by factors of 2, which brackets the solved first weight of
    every published schedule.  The last weight falls back to the midpoint
    anchor when extrapolation is unavailable or useless.
    """
    km = kappa_min(n, d, bc)
    out = []
    try:
        guess = initial_guess(p, n, priors=priors, bc=bc, d=d)
        out.append(list(guess.omegas))
    except (InsufficientPriorsError, ValueError):
        pass
    priors = sorted(priors, key=lambda s: s.p)[-4:]
    if priors:
        # the last weight drifts slowly with level count, so the highest
        # prior's value is a safer ladder anchor than extrapolation,
        # which inverts when the priors are not monotone in p
        wp = float(priors[-1].omegas[-1])
    else:
        wp = 2.0 / (2.0 + km)
    c = 0.9
    while c > 1e-4:
        w1 = c / km
        if w1 > wp * 4:
            if p == 2:
                out.append([w1, wp])
            else:
                ratio = w1 / wp
                scale = 1.0 / (2.0 * (p - 1))
                out.append(
                    [w1 * ratio ** (-e * scale) for e in _ladder_exponents(p)]
                )
        c /= 2
    return out


def _rho_of(om, kap):
    betas = beta_from(om, kap)
    total = sum(betas)
    return float(sum(b * w for b, w in zip(betas, om)) / total)


def _solve_level_multi(p, n, bc, d, digits, max_iter, priors):
    """Try every candidate start and keep the best validated root.

    The stationarity system has spurious roots: weight sets whose maxima
    are equalized but whose damping rate is not the maximal one.  Those
    pass every pointwise check, so the winner among converged starts is
    the root with the largest rho, not the first to validate.

    The whole anchor ladder runs in doubles no matter what precision was
    requested; mpmath gets involved only to resume the lowest-residual
    stall points, or to polish the winning root when the caller asked for
    more digits.  Replaying all anchors under mpmath is two orders slower
    for the same answer.
    """
    km = kappa_min(n, d, bc)
    best_err = None
    roots = []
    stalls = []
    for om0 in _anchor_candidates(p, n, priors, bc, d):
        kap0 = _seed_kappas(om0)
        if not _feasible(om0, kap0, km):
            continue
        try:
            om, kap, iters, norm = _newton(
                om0, kap0, n, bc, d, DOUBLE_DIGITS, max_iter
            )
        except OptimizeError as err:
            if best_err is None:
                best_err = err
            point = getattr(err, "best_point", None)
            if point is not None:
                stalls.append((point[2], point[0], point[1]))
            continue
        if _is_true_optimum(om, kap, km):
            roots.append((_rho_of(om, kap), om, kap, iters, norm, DOUBLE_DIGITS))
        elif best_err is None:
            best_err = NoConvergenceError(
                "converged to a spurious root", float(norm), iters
            )

    if not roots:
        stalls.sort(key=lambda t: t[0])
        for _, omf, kapf in stalls[:3]:
            try:
                om, kap, iters, norm = _newton(
                    omf, kapf, n, bc, d, max(digits, EXTENDED_DIGITS), max_iter
                )
            except OptimizeError:
                continue
            if _is_true_optimum(om, kap, km):
                roots.append(
                    (_rho_of(om, kap), om, kap, iters, norm, EXTENDED_DIGITS)
                )
    if not roots:
        if best_err is None:
            best_err = NoConvergenceError(
                "no feasible starting point", math.inf, 0
            )
        raise best_err

    rho, om, kap, iters, norm, used = max(roots, key=lambda t: t[0])
    if digits > used:
        try:
            om2, kap2, it2, norm2 = _newton(om, kap, n, bc, d, digits, max_iter)
            if _is_true_optimum(om2, kap2, km):
                return om2, kap2, iters + it2, norm2, digits
        except OptimizeError:
            pass
    return om, kap, iters, norm, used


def _solve_level_robust(p, n, bc, d, digits, max_iter, priors):
    """Multi-start at the target n, then continuation from smaller grids.

    When no candidate start converges at n, the same level count is solved
    on a coarser grid (half the size, recursively down to n=16) where the
    weight range is milder, and that solution anchors a warm restart at n.
    """
    try:
        return _solve_level_multi(p, n, bc, d, digits, max_iter, priors)
    except OptimizeError as err:
        if n // 2 < 16:
            raise
        coarse_err = err
    half = n // 2
    coarse = _solve_chain(p, half, bc, d, None, max_iter)
    om0 = [float(w) for w in coarse[p].schedule.omegas]
    kap0 = _seed_kappas(om0)
    km = kappa_min(n, d, bc)
    if not _feasible(om0, kap0, km):
        raise coarse_err
    om, kap, iters, norm, used = _solve_level(om0, kap0, n, bc, d, digits, max_iter)
    if not _is_true_optimum(om, kap, km):
        raise coarse_err
    return om, kap, iters, norm, used


def _solve_chain(p, n, bc, d, digits, max_iter, solved=None):
    """March the level count from 2 to p at grid size n.

    Returns the dict of solve reports by level (including level 1's
    closed form); entries already present in `solved` are reused.
    """
    km = kappa_min(n, d, bc)
    if solved is None:
        solved = {}
    if 1 not in solved:
        w = 2.0 / (2.0 + km)
        state = OptimizerState([w], [], KappaRange(km), DOUBLE_DIGITS)
        solved[1] = _report([w], [], n, 0, _norm_inf(residual(state)), DOUBLE_DIGITS)
    for level in range(2, p + 1):
        if level in solved:
            continue
        chain = [solved[q].schedule for q in sorted(solved) if q < level][-4:]
        want = digits or _preferred_digits(level, n)
        om, kap, iters, norm, used = _solve_level_robust(
            level, n, bc, d, want, max_iter, chain
        )
        solved[level] = _report(om, kap, n, iters, norm, used)
    return solved


def _preferred_digits(p, n):
    return DOUBLE_DIGITS if p <= 8 and n <= 1024 else EXTENDED_DIGITS


def solve(p, n, bc="neumann", d=2, priors=(), digits=None, max_iter=200):
    """Compute the optimal P-level schedule for grid size n.

    Marches the level count up from 2, reusing each solution to seed the
    next level's starting point, unless a usable prior is supplied.

    Parameters
    ----------
    p : int
        Number of levels, 1 to 15.
    n : int
        Grid size, >= 16.
    bc : {'neumann', 'dirichlet'}
    d : int
        Dimensionality, 1 to 3.
    priors : sequence of WeightSchedule
        Optional warm starts.  A prior with the same p (any n) becomes the
        starting point directly; priors at the same n with lower p seed the
        continuation so the march can skip already-solved levels.
    digits : int, optional
        Working precision override.  Default: doubles for p <= 8 and
        n <= 1024, 40 digits otherwise; a stalled double solve escalates
        automatically.
    max_iter : int
        Newton iteration cap per level.

    Returns
    -------
    SolveReport

    Raises
    ------
    NoConvergenceError, InterleavingError
        When some level cannot be solved (known to happen at P=15 for
        n < 64).
    """
    if not 1 <= p <= 15:
        raise ValueError(f"p must be in 1..15, got {p}")
    if n < 16:
        raise ValueError(f"n must be >= 16, got {n}")
    km = kappa_min(n, d, bc)

    if p == 1:
        # single equal-maxima equation |1 - w*km| = |1 - 2w|, solved exactly
        w = 2.0 / (2.0 + km)
        state = OptimizerState([w], [], KappaRange(km), DOUBLE_DIGITS)
        norm = _norm_inf(residual(state))
        return _report([w], [], n, 0, norm, DOUBLE_DIGITS)

    same_p = next((s for s in priors if s.p == p), None)
    if same_p is not None:
        om0 = [float(w) for w in same_p.omegas]
        kap0 = _seed_kappas(om0)
        want = digits or _preferred_digits(p, n)
        if _feasible(om0, kap0, km):
            try:
                om, kap, iters, norm, used = _solve_level(
                    om0, kap0, n, bc, d, want, max_iter
                )
                if _is_true_optimum(om, kap, km):
                    return _report(om, kap, n, iters, norm, used)
            except OptimizeError:
                pass

    solved = {}
    for s in priors:
        if not (1 < s.p < p and s.n == n):
            continue
        om0 = [float(w) for w in s.omegas]
        kap0 = _seed_kappas(om0)
        if not _feasible(om0, kap0, km):
            continue
        state = OptimizerState(om0, kap0, KappaRange(km), DOUBLE_DIGITS)
        solved[s.p] = SolveReport(s, 0, _norm_inf(residual(state)), DOUBLE_DIGITS)

    solved = _solve_chain(p, n, bc, d, digits, max_iter, solved)
    return solved[p]
