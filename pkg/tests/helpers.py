"""Shared test utilities: dense assembly of small grid problems."""

import numpy as np

from srj.grids import GridProblem


def dense_system(problem):
    """Assemble the interior coefficient matrix and right-hand side.

    Folds the ghost-layer boundary conditions into the matrix (mirror,
    periodic) or the right-hand side (fixed ghosts, face Dirichlet), so
    ``A x = b`` has the interior cells as unknowns.  Masked problems are
    not supported; keep the grids small.
    """
    if problem.mask is not None and not problem.mask.all():
        raise ValueError("dense assembly does not model masked cells")
    shape = problem.shape
    size = int(np.prod(shape))
    idx = np.arange(size).reshape(shape)
    a = np.zeros((size, size))
    b = np.asarray(problem.source, dtype=float).ravel().copy()
    a[np.arange(size), np.arange(size)] = np.asarray(problem.center).ravel()
    ndim = problem.ndim

    for axis in range(ndim):
        for side, coefs in (("lo", problem.lower[axis]),
                            ("hi", problem.upper[axis])):
            coefs = np.asarray(coefs)
            rule = problem.bc[axis][0 if side == "lo" else 1]
            n_ax = shape[axis]
            for cell in np.ndindex(shape):
                pos = cell[axis]
                nb = pos - 1 if side == "lo" else pos + 1
                row = idx[cell]
                coef = coefs[cell]
                if 0 <= nb < n_ax:
                    col = idx[cell[:axis] + (nb,) + cell[axis + 1:]]
                    a[row, col] += coef
                    continue
                # neighbor is a ghost cell
                if rule.kind == "fixed":
                    gidx = [c + 1 for c in cell]
                    gidx[axis] = 0 if side == "lo" else -1
                    b[row] -= coef * problem.u[tuple(gidx)]
                elif rule.kind == "mirror":
                    a[row, row] += coef
                elif rule.kind == "periodic":
                    wrap = 0 if side == "hi" else n_ax - 1
                    col = idx[cell[:axis] + (wrap,) + cell[axis + 1:]]
                    a[row, col] += coef
                elif rule.kind == "face_dirichlet":
                    vals = np.asarray(rule.values)
                    face = cell[:axis] + cell[axis + 1:]
                    v = float(vals[face]) if vals.ndim else float(vals)
                    a[row, row] -= coef
                    b[row] -= coef * 2.0 * v
                else:  # pragma: no cover
                    raise ValueError(f"unhandled rule {rule.kind}")
    return a, b


def dense_solution(problem):
    """Exact discrete solution of a small problem, interior shaped."""
    a, b = dense_system(problem)
    return np.linalg.solve(a, b).reshape(problem.shape)
