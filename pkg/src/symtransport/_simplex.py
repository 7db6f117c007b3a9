"""Two-phase revised simplex with Bland's rule for ``min c.x, A x = b, x >= 0``.

Bland's rule (lowest-index entering column, lowest-index leaving basic
variable on ratio ties) prevents cycling on the highly degenerate
transportation polytopes this package solves, and makes the returned vertex
reproducible.  The basis is refactorized at every pivot; at desk scale
(a few dozen rows) that is cheaper than maintaining an eta file.
"""

from dataclasses import dataclass

import numpy as np


class SimplexError(RuntimeError):
    pass


@dataclass
class LPSolution:
    x: np.ndarray
    y: np.ndarray  # equality multipliers, c - A^T y >= 0 at optimum
    value: float
    basis: np.ndarray
    iterations: int


def _solve_phase(A, b, c, basis, allowed, tol, max_iter, it0=0):
    """Run simplex pivots from a feasible ``basis`` restricted to ``allowed`` columns."""
    m, N = A.shape
    it = it0
    scale = max(1.0, float(np.max(np.abs(c[allowed]))) if allowed.any() else 1.0)
    rc_tol = tol * scale
    while True:
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        rc = c - A.T @ y
        rc[basis] = 0.0
        candidates = np.flatnonzero(allowed & (rc < -rc_tol))
        if candidates.size == 0:
            return basis, xB, y, it
        j = int(candidates[0])
        d = np.linalg.solve(B, A[:, j])
        pos = d > 1e-11
        if not pos.any():
            raise SimplexError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
        leave = ties[np.argmin(basis[ties])]
        basis = basis.copy()
        basis[leave] = j
        it += 1
        if it > max_iter:
            raise SimplexError(f"no optimum after {max_iter} pivots")


def simplex(c, A, b, tol=1e-10, max_iter=200_000):
    """Solve ``min c.x`` subject to ``A x = b``, ``x >= 0`` with ``b >= 0``.

    ``A`` must have full row rank.  Raises :class:`SimplexError` when the
    program is infeasible or unbounded.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, N = A.shape
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative")

    # Phase I on [A | I] with artificial columns N..N+m-1.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(N), np.ones(m)])
    basis = np.arange(N, N + m)
    allowed = np.ones(N + m, dtype=bool)
    basis, xB, _, it = _solve_phase(A1, b, c1, basis, allowed, tol, max_iter)
    infeas = float(np.sum(xB[basis >= N]))
    if infeas > 1e-9:
        raise SimplexError(f"LP is infeasible (phase I residual {infeas:.3g})")

    # Pivot zero-level artificials out of the basis.
    for r in range(m):
        if basis[r] < N:
            continue
        Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[r])
        row = Binv_row @ A
        row[basis[basis < N]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        if cand.size == 0:
            raise SimplexError("constraint matrix is rank deficient")
        basis = basis.copy()
        basis[r] = int(cand[0])

    allowed = np.zeros(N + m, dtype=bool)
    allowed[:N] = True
    c2 = np.concatenate([c, np.zeros(m)])
    basis, xB, y, it = _solve_phase(A1, b, c2, basis, allowed, tol, max_iter, it)
    x = np.zeros(N)
    x[basis] = np.maximum(xB, 0.0)
    return LPSolution(x=x, y=y, value=float(c @ x), basis=basis, iterations=it)
