"""Monotonicity testers and tabulated convex-analysis constructions.

Every sup or inf over a continuous variable is an exhaustive scan over a
user-supplied grid.  Tabulated results carry a grid tolerance, the largest
grid spacing times a finite-difference Lipschitz estimate, which bounds the
discretization error of those scans.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DENSE_CAP, as_points, check_uniform
from .costs import CostTensor, SampledVectorField
from .exceptions import (
    CapExceeded,
    DimensionMismatch,
    EmptySample,
    GridMismatch,
    NonSquareGrid,
)

MONOTONE_TOL = 1e-10
EQUIVALENCE_TOL = 1e-9
REPORT_CAP = 8
CONVERSE_NOTE = "not decidable from samples"


@dataclass(frozen=True, eq=False)
class GraphSample:
    """Sampled graph points ``(x_k, p_k)`` with ``p_k = u(x_k)``."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = as_points(self.points)
        p = as_points(self.values)
        if x.shape != p.shape:
            raise DimensionMismatch(f"points {x.shape} and values {p.shape} differ in shape")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "values", p)

    @classmethod
    def from_field(cls, u):
        return cls(u.base.points, u.values)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def _sample(obj):
    if isinstance(obj, GraphSample):
        return obj
    if isinstance(obj, SampledVectorField):
        return GraphSample.from_field(obj)
    x, p = obj
    return GraphSample(x, p)


@dataclass(frozen=True)
class MonotonicityResult:
    holds: bool
    worst: tuple
    worst_value: float

    def __bool__(self):
        return self.holds


def is_monotone(sample, tol=MONOTONE_TOL):
    """Pairwise test ``<x_i - x_j, p_i - p_j> >= -tol``; reports the worst pair."""
    s = _sample(sample)
    x, p = s.points, s.values
    # <x_i - x_j, p_i - p_j> for every pair at once
    G = x @ p.T
    d = np.diag(G)
    M = d[:, None] + d[None, :] - G - G.T
    i, j = np.unravel_index(np.argmin(M), M.shape)
    worst = float(M[i, j])
    return MonotonicityResult(worst >= -tol, (int(min(i, j)), int(max(i, j))), worst)


def _cycle_weights(s):
    """``W[a, b] = <p_b, x_b - x_a>``, one step of the cyclic sum."""
    x, p = s.points, s.values
    return np.sum(p * x, axis=1)[None, :] - x @ p.T


def _min_closed_walk(W, m):
    """Minimum total weight of a closed walk with exactly ``m`` steps, and the walk."""
    n = W.shape[0]
    best_val, best_walk = np.inf, None
    for start in range(n):
        dist = W[start].copy()
        back = []
        for _ in range(m - 2):
            cand = dist[:, None] + W
            arg = np.argmin(cand, axis=0)
            back.append(arg)
            dist = cand[arg, np.arange(n)]
        if m == 1:
            total, last = W[start, start], start
        else:
            closing = dist + W[:, start]
            last = int(np.argmin(closing))
            total = closing[last]
        if total < best_val:
            walk = [last]
            for arg in reversed(back):
                walk.append(int(arg[walk[-1]]))
            walk = [start] + walk[::-1] if m > 1 else [start]
            best_val, best_walk = float(total), walk
    return best_val, best_walk


def is_m_cyclically_monotone(sample, m, mode="exhaustive", trials=10_000, random_state=0,
                             tol=MONOTONE_TOL):
    """Test ``sum_k <p_{k+1}, x_{k+1} - x_k> >= -tol`` over closed m-tuples.

    ``exhaustive`` covers every index tuple (repetitions allowed) through a
    min-plus dynamic program over closed walks, so it is exact; it is
    restricted to ``n^m <= 10^6``.  ``random`` draws ``trials`` uniform tuples.
    The worst cycle is returned as the index tuple ``(x_0, ..., x_{m-1})``.
    """
    s = _sample(sample)
    n = s.size
    if m < 1:
        raise ValueError("m must be positive")
    W = _cycle_weights(s)
    if mode == "exhaustive":
        if n ** m > DENSE_CAP:
            raise CapExceeded(f"exhaustive cycle scan needs n^m <= {DENSE_CAP}, got {n}^{m}")
        val, walk = _min_closed_walk(W, m)
    elif mode == "random":
        rng = np.random.default_rng(random_state)
        idx = rng.integers(0, n, size=(trials, m))
        sums = sum(W[idx[:, k], idx[:, (k + 1) % m]] for k in range(m))
        t = int(np.argmin(sums))
        val, walk = float(sums[t]), [int(i) for i in idx[t]]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return MonotonicityResult(val >= -tol, tuple(walk), val)


def fitzpatrick(sample, p, x):
    """Fitzpatrick function of a sampled graph, ``max_k <p, y_k> + <q_k, x - y_k>``.

    ``p`` and ``x`` may be single vectors or stacks of shape (k, d); the
    result is a float or an array of length k.
    """
    s = _sample(sample)
    if s.size == 0:
        raise EmptySample("Fitzpatrick function of an empty sample")
    P = np.asarray(p, dtype=float)
    X = np.asarray(x, dtype=float)
    # in 1-d a flat array is a stack of scalar queries
    single = P.ndim == 0 or (P.ndim == 1 and s.dim > 1)
    P, X = P.reshape(-1, s.dim), X.reshape(-1, s.dim)
    if P.shape != X.shape:
        raise DimensionMismatch(f"p {P.shape} and x {X.shape} differ in shape")
    y, q = s.points, s.values
    vals = P @ y.T + X @ q.T - np.sum(q * y, axis=1)[None, :]
    out = vals.max(axis=1)
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values tabulated on a product grid; ``axes[k]`` is strictly increasing."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).ravel() for a in self.axes)
        for k, a in enumerate(axes):
            if a.size == 0 or np.any(np.diff(a) <= 0):
                raise GridMismatch(f"axis {k} is not strictly increasing")
        vals = np.asarray(self.values, dtype=float)
        shape = tuple(a.size for a in axes)
        if vals.size != int(np.prod(shape)):
            raise GridMismatch(f"{vals.size} values for a grid of shape {shape}")
        vals = vals.reshape(shape)
        for a in axes:
            a.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def tabulate(cls, func, axes):
        """Evaluate ``func(*coords)`` on the product grid (func is vectorized)."""
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(axes, func(*mesh))

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def max_spacing(self):
        return max((float(np.max(np.diff(a))) for a in self.axes if a.size > 1), default=0.0)

    @property
    def lipschitz(self):
        """Largest finite-difference slope along any axis (finite values only)."""
        best = 0.0
        for k, a in enumerate(self.axes):
            if a.size < 2:
                continue
            shape = [1] * self.ndim
            shape[k] = a.size - 1
            with np.errstate(invalid="ignore"):
                slope = np.abs(np.diff(self.values, axis=k) / np.diff(a).reshape(shape))
            slope = slope[np.isfinite(slope)]
            if slope.size:
                best = max(best, float(slope.max()))
        return best

    @property
    def tolerance(self):
        return self.max_spacing * self.lipschitz

    def same_grid(self, other):
        return self.ndim == other.ndim and all(
            np.array_equal(a, b) for a, b in zip(self.axes, other.axes))


def fitzpatrick_grid(sample, p_axes, x_axes):
    """Tabulate the Fitzpatrick function on the grid with axes ``[p..., x...]``."""
    s = _sample(sample)
    p_axes, x_axes = list(p_axes), list(x_axes)
    if len(p_axes) != s.dim or len(x_axes) != s.dim:
        raise DimensionMismatch(f"need {s.dim} p-axes and {s.dim} x-axes")
    axes = p_axes + x_axes
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([g.ravel() for g in mesh], axis=1)
    vals = fitzpatrick(s, flat[:, :s.dim], flat[:, s.dim:])
    return GridFunction(axes, np.asarray(vals).reshape(mesh[0].shape))


def _check_block(axes, ndim):
    axes = sorted(set(int(a) for a in axes))
    if not axes or axes[0] < 0 or axes[-1] >= ndim:
        raise GridMismatch(f"transform axes {axes} out of range for {ndim} axes")
    if axes != list(range(axes[0], axes[-1] + 1)):
        raise GridMismatch(f"transform axes {axes} are not a contiguous block")
    return axes


def partial_legendre(L, transform_axes, dual_axes=None):
    """Discrete Legendre transform of ``L`` in a contiguous block of axes.

    ``K(.., y, ..) = max_p <y, p> - L(.., p, ..)`` with ``p`` ranging over the
    grid of the transformed axes and ``y`` over ``dual_axes`` (the same grids
    by default).  Multi-axis blocks are done one axis at a time, which is
    exact for a sup over a product grid.
    """
    block = _check_block(transform_axes, L.ndim)
    if dual_axes is None:
        dual_axes = [L.axes[k] for k in block]
    dual_axes = [np.asarray(a, dtype=float).ravel() for a in dual_axes]
    if len(dual_axes) != len(block):
        raise GridMismatch(f"{len(dual_axes)} dual axes for {len(block)} transformed axes")
    acc = -L.values
    for k, y in zip(block, dual_axes):
        p = L.axes[k]
        moved = np.moveaxis(acc, k, -1)
        lead = moved.shape[:-1]
        flat = moved.reshape(-1, p.size)
        out = np.empty((flat.shape[0], y.size))
        # chunk rows to bound the (rows, n_y, n_p) temporary
        step = max(1, 4_000_000 // max(1, y.size * p.size))
        yp = y[:, None] * p[None, :]
        for r in range(0, flat.shape[0], step):
            out[r:r + step] = np.max(flat[r:r + step, None, :] + yp[None], axis=2)
        acc = np.moveaxis(out.reshape(lead + (y.size,)), -1, k)
    axes = list(L.axes)
    for k, y in zip(block, dual_axes):
        axes[k] = y
    return GridFunction(axes, acc)


def legendre_conjugate(N):
    """Full conjugate of ``N`` over all axes, read with the two halves swapped.

    For ``N`` tabulated on ``[p..., x...]`` the result on ``[x..., p...]`` is
    ``N*(x, p) = max <x, q> + <p, y> - N(q, y)``, the layout expected by
    :func:`selfdual_interpolation`.
    """
    if N.ndim % 2:
        raise NonSquareGrid("need an even number of axes")
    return partial_legendre(N, range(N.ndim))


def _midpoint_triples(a):
    """All ``(i, i1, i2)`` with ``a[i1] + a[i2] = 2 a[i]`` up to rounding."""
    s = a[:, None] + a[None, :]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(a))))
    i1, i2 = np.nonzero(np.ones_like(s, dtype=bool))
    mid2 = s[i1, i2]
    pos = np.searchsorted(2 * a, mid2)
    out = []
    for cand in (pos - 1, pos):
        ok = (cand >= 0) & (cand < a.size)
        c = np.clip(cand, 0, a.size - 1)
        hit = ok & (np.abs(2 * a[c] - mid2) <= 2 * tol)
        out.append(np.stack([c[hit], i1[hit], i2[hit]], axis=1))
    trip = np.unique(np.concatenate(out), axis=0)
    return trip


def selfdual_interpolation(N, Nstar, cap=500_000_000):
    """Grid-snapped interpolation between ``N`` and its conjugate.

    ``N`` lives on axes ``[p..., x...]`` and ``Nstar`` on ``[x..., p...]`` with
    the same grids.  At each node ``z = (p, x)``,
    ``L(z) = min 1/2 N(z1) + 1/2 N*(z2) + |z1 - z2|^2 / 8`` over grid nodes
    ``z1, z2`` whose midpoint is ``z`` (``N*`` read at ``z2 = (p2, x2)``).
    """
    D = N.ndim
    if D % 2 or Nstar.ndim != D:
        raise GridMismatch("N and Nstar need the same even number of axes")
    d = D // 2
    swapped = list(Nstar.axes[d:]) + list(Nstar.axes[:d])
    if not all(np.array_equal(a, b) for a, b in zip(N.axes, swapped)):
        raise GridMismatch("Nstar must be tabulated on the N grid with its halves swapped")
    Ns = np.transpose(Nstar.values, list(range(d, D)) + list(range(d)))
    trips = [_midpoint_triples(a) for a in N.axes]
    total = int(np.prod([t.shape[0] for t in trips], dtype=object))
    if total > cap:
        raise CapExceeded(f"{total} grid splittings exceed the cap {cap}")

    shape = N.shape
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(D)])
    Nf, Nsf = N.values.ravel(), Ns.ravel()

    # combine the per-axis triples of axes 1..D-1 into flat offsets once
    mid_r = np.zeros(1, dtype=np.int64)
    i1_r = np.zeros(1, dtype=np.int64)
    i2_r = np.zeros(1, dtype=np.int64)
    sq_r = np.zeros(1)
    for k in range(1, D):
        t, a = trips[k], N.axes[k]
        mid_r = (mid_r[:, None] + t[None, :, 0] * strides[k]).ravel()
        i1_r = (i1_r[:, None] + t[None, :, 1] * strides[k]).ravel()
        i2_r = (i2_r[:, None] + t[None, :, 2] * strides[k]).ravel()
        sq_r = (sq_r[:, None] + (a[t[None, :, 1]] - a[t[None, :, 2]]) ** 2).ravel()

    out = np.full(N.values.size, np.inf)
    a0, t0 = N.axes[0], trips[0]
    step = max(1, 2_000_000 // mid_r.size)
    for r in range(0, t0.shape[0], step):
        t = t0[r:r + step]
        mid = (t[:, 0, None] * strides[0] + mid_r[None, :]).ravel()
        j1 = (t[:, 1, None] * strides[0] + i1_r[None, :]).ravel()
        j2 = (t[:, 2, None] * strides[0] + i2_r[None, :]).ravel()
        sq = ((a0[t[:, 1]] - a0[t[:, 2]])[:, None] ** 2 + sq_r[None, :]).ravel()
        val = 0.5 * Nf[j1] + 0.5 * Nsf[j2] + 0.125 * sq
        np.minimum.at(out, mid, val)
    return GridFunction(N.axes, out.reshape(shape))


def sandwich_violation(N, L, Nstar):
    """Largest violation of ``Nstar >= L >= N`` over the grid (0 when it holds)."""
    d = N.ndim // 2
    Ns = np.transpose(Nstar.values, list(range(d, N.ndim)) + list(range(d)))
    with np.errstate(invalid="ignore"):
        upper = np.nanmax(np.where(np.isfinite(L.values), L.values - Ns, -np.inf))
        lower = np.nanmax(N.values - L.values)
    return max(0.0, float(upper), float(lower))


def antisymmetrize(K):
    """``H(x, y) = (K(x, y) - K(y, x)) / 2`` on a square grid ``[x..., y...]``."""
    D = K.ndim
    if D % 2:
        raise NonSquareGrid("need an even number of axes")
    d = D // 2
    if not all(np.array_equal(K.axes[k], K.axes[d + k]) for k in range(d)):
        raise NonSquareGrid("both slots must share the same axes")
    Kt = np.transpose(K.values, list(range(d, D)) + list(range(d)))
    return GridFunction(K.axes, (K.values - Kt) / 2.0)


@dataclass(frozen=True)
class EquivalenceReport:
    monotone: bool
    involution_sup_zero: bool
    identity_projection: bool
    lp_diagonal: bool
    involution_sup: float
    lp_value: float
    diagonal_value: float
    worst_pair: tuple

    @property
    def flags(self):
        return (self.monotone, self.involution_sup_zero, self.identity_projection,
                self.lp_diagonal)

    @property
    def all_equivalent(self):
        return len(set(self.flags)) == 1


def monotone_equivalence_report(u, cap=REPORT_CAP, tol=EQUIVALENCE_TOL):
    """Four descriptions of monotonicity of a sampled field, evaluated separately.

    (1) pairwise monotone; (2) the best involution gain
    ``max_S (1/n) sum <u_i, x_{S i} - x_i>`` is 0; (3) the identity attains
    ``min_S sum |u_i - x_{S i}|^2`` (ties allowed); (4) the symmetric
    two-marginal LP for ``<u(x), y>`` has the diagonal value.
    """
    from .involution import enumerate_m_involutions
    from .transport import solve_sym

    check_uniform(u.base)
    n = u.size
    if n > cap:
        raise CapExceeded(f"exhaustive involution sup is capped at n = {cap}, got {n}")
    x, v = u.base.points, u.values
    mono = is_monotone((x, v))
    W = v @ x.T
    diag = float(np.trace(W) / n)
    sq = (np.sum(v * v, 1)[:, None] + np.sum(x * x, 1)[None, :] - 2 * W)
    rows = np.arange(n)
    best_gain, min_sq = -np.inf, np.inf
    for S in enumerate_m_involutions(n, 2, cap=cap):
        best_gain = max(best_gain, float(W[rows, S.perm].sum() / n) - diag)
        min_sq = min(min_sq, float(sq[rows, S.perm].sum()))
    id_sq = float(np.trace(sq))
    scale = max(1.0, abs(id_sq))
    lp = solve_sym(CostTensor(W), u.base, sense="max").primal_value
    return EquivalenceReport(
        monotone=mono.holds,
        involution_sup_zero=best_gain <= tol,
        identity_projection=id_sq <= min_sq + tol * scale,
        lp_diagonal=abs(lp - diag) <= tol,
        involution_sup=best_gain,
        lp_value=lp,
        diagonal_value=diag,
        worst_pair=mono.worst,
    )


class FitzpatrickFunction(BaseEstimator):
    """Estimator wrapper: ``fit(X, P)`` stores the graph, ``predict(p, x)`` evaluates N."""

    def fit(self, X, P):
        self.sample_ = GraphSample(X, P)
        self.monotone_ = is_monotone(self.sample_).holds
        return self

    def predict(self, p, x):
        check_is_fitted(self, "sample_")
        return fitzpatrick(self.sample_, p, x)
