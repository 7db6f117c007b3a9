"""O(n^3) shortest-augmenting-path assignment with dual potentials."""

import numpy as np


def hungarian(cost):
    """Minimum-cost perfect assignment of a square matrix.

    Returns ``(perm, u, v)`` with ``perm[i]`` the column matched to row ``i``
    and potentials satisfying ``u[i] + v[j] <= cost[i, j]`` for all pairs,
    with equality on the assignment.
    """
    a = np.asarray(cost, dtype=float)
    n = a.shape[0]
    inf = np.inf
    # 1-based bookkeeping; row 0 / column 0 are sentinels
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)     # p[j]: row matched to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1, :] - u[i0] - v[1:]
            cols = np.flatnonzero(free) + 1
            better = free & (cur < minv[1:])
            idx = np.flatnonzero(better) + 1
            minv[idx] = cur[idx - 1]
            way[idx] = j0
            j1 = cols[np.argmin(minv[cols])]
            delta = minv[j1]
            used_cols = np.flatnonzero(used)
            u[p[used_cols]] += delta
            v[used_cols] -= delta
            minv[cols] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=int)
    perm[p[1:] - 1] = np.arange(n)
    return perm, u[1:].copy(), v[1:].copy()
