"""Cost tensors for the quadratic and vector-field families, their cyclic
symmetrization, and the graph embedding that links the two for m = 3.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import (
    DENSE_CAP,
    as_finite_tensor,
    as_points,
    check_same_dimension,
    check_uniform,
)
from .exceptions import (
    BaseMismatch,
    DimensionMismatch,
    HeterogeneousSupports,
    MarginalMismatch,
    SizeCapExceeded,
)
from .measures import DiscreteMeasure, marginal, shift_array


@dataclass(frozen=True, eq=False)
class CostTensor:
    """Dense m-way array of finite costs, one axis per marginal."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", as_finite_tensor(self.values))

    @property
    def arity(self):
        return self.values.ndim

    @property
    def support_sizes(self):
        return self.values.shape

    def integrate(self, plan):
        """``<c, theta>``, the cost of a plan."""
        if plan.support_sizes != self.support_sizes:
            raise DimensionMismatch(
                f"plan sizes {plan.support_sizes} vs cost sizes {self.support_sizes}")
        return float(np.sum(self.values * plan.mass))

    def __neg__(self):
        return CostTensor(-self.values)

    def __repr__(self):
        return f"CostTensor(arity={self.arity}, sizes={self.support_sizes})"


class LazyCost:
    """Index -> value evaluator for instances too large to materialize.

    ``func`` receives m integer index arrays of equal shape and returns the
    costs at those tuples.
    """

    def __init__(self, func, sizes):
        self.func = func
        self.support_sizes = tuple(int(s) for s in sizes)

    @property
    def arity(self):
        return len(self.support_sizes)

    def at(self, *indices):
        return np.asarray(self.func(*[np.asarray(i, dtype=int) for i in indices]), float)

    def materialize(self):
        total = int(np.prod(self.support_sizes, dtype=object))
        if total > DENSE_CAP:
            raise SizeCapExceeded(f"{total} cost entries exceed the dense cap {DENSE_CAP}")
        grids = np.indices(self.support_sizes)
        return CostTensor(self.at(*grids))


@dataclass(frozen=True, eq=False)
class SampledVectorField:
    """Values ``u(x_i)`` of a vector field on the atoms of ``base``."""

    base: DiscreteMeasure
    values: np.ndarray

    def __post_init__(self):
        vals = as_points(self.values, name="field values")
        if vals.shape[0] != self.base.size:
            raise BaseMismatch(
                f"{vals.shape[0]} field values for a base of {self.base.size} atoms")
        object.__setattr__(self, "values", vals)

    @property
    def points(self):
        return self.base.points

    @property
    def size(self):
        return self.base.size

    def is_injective(self):
        """True when the sampled values are pairwise distinct.

        This is the discrete stand-in used for non-degeneracy; it is a report,
        not a proof that the underlying field is non-degenerate.
        """
        return np.unique(self.values, axis=0).shape[0] == self.values.shape[0]


def _points_of(s):
    return s.points if isinstance(s, DiscreteMeasure) else as_points(s)


def _lazy_or_dense(func, sizes, lazy):
    cost = LazyCost(func, sizes)
    return cost if lazy else cost.materialize()


def quadratic_cost(supports, lazy=False):
    """``c(x_0, ..., x_{m-1}) = sum_{i<j} |x_i - x_j|^2`` on the given supports."""
    pts = [_points_of(s) for s in supports]
    check_same_dimension(*pts)
    sizes = [p.shape[0] for p in pts]

    def func(*idx):
        terms = []
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                diff = pts[i][idx[i]] - pts[j][idx[j]]
                terms.append(np.sum(diff * diff, axis=-1))
        if not terms:
            return np.zeros(np.broadcast(*idx).shape) if idx else 0.0
        # sorting the pair terms makes the sum independent of axis order
        return np.sum(np.sort(np.stack(np.broadcast_arrays(*terms), axis=-1), axis=-1), axis=-1)

    return _lazy_or_dense(func, sizes, lazy)


def vector_field_cost(fields, supports=None, lazy=False):
    """``c(x_0, ..., x_{m-1}) = sum_k <u_k(x_0), x_k>`` for fields u_1..u_{m-1}.

    Axis 0 carries the common base of the fields.  ``supports`` lists the
    points of axes 1..m-1 (or all m axes); by default every axis reuses the
    base points.
    """
    if not fields:
        raise BaseMismatch("need at least one vector field")
    base = fields[0].base
    for f in fields[1:]:
        if f.base != base:
            raise BaseMismatch("all fields must share the axis-0 base measure")
    m = len(fields) + 1
    if supports is None:
        pts = [base.points] * m
    else:
        pts = [_points_of(s) for s in supports]
        if len(pts) == m - 1:
            pts = [base.points] + pts
        if len(pts) != m:
            raise BaseMismatch(f"{len(pts)} supports for {m} axes")
        if not np.array_equal(pts[0], base.points):
            raise BaseMismatch("axis-0 support differs from the fields' base")
    for k, f in enumerate(fields, start=1):
        if f.values.shape[1] != pts[k].shape[1]:
            raise DimensionMismatch(
                f"field {k} has dimension {f.values.shape[1]}, axis {k} points {pts[k].shape[1]}")
    gram = [f.values @ pts[k].T for k, f in enumerate(fields, start=1)]
    sizes = [p.shape[0] for p in pts]

    def func(*idx):
        return sum(g[idx[0], idx[k]] for k, g in enumerate(gram, start=1))

    return _lazy_or_dense(func, sizes, lazy)


def symmetrize_cost(cost):
    """Cyclic average ``(1/m) sum_i c(sigma^i x)``."""
    if len(set(cost.support_sizes)) != 1:
        raise HeterogeneousSupports(
            f"symmetrization needs one shared support, got sizes {cost.support_sizes}")
    m = cost.arity
    acc = np.zeros(cost.support_sizes)
    for p in range(m):
        acc += shift_array(cost.values, p)
    return CostTensor(acc / m)


# graph embedding (m = 3)

def block_cycle(points, power=1, blocks=3):
    """Cyclic permutation of ``blocks`` equal coordinate blocks, applied ``power`` times.

    ``(b_0, b_1, ..., b_{k-1}) -> (b_1, ..., b_{k-1}, b_0)``.
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[-1]
    if d % blocks:
        raise DimensionMismatch(f"dimension {d} is not a multiple of {blocks} blocks")
    size = d // blocks
    parts = [pts[..., b * size:(b + 1) * size] for b in range(blocks)]
    power %= blocks
    parts = parts[power:] + parts[:power]
    return np.concatenate(parts, axis=-1)


@dataclass(frozen=True, eq=False)
class GraphEmbedding:
    """Points ``P(x) = (x, x, u_1(x), 0, 0, u_2(x))`` in R^{6d}."""

    base: DiscreteMeasure
    embedded: np.ndarray

    def marginals(self):
        """``mu_k = sigma^k_# mu_0`` for k = 0, 1, 2 (index-aligned with the base)."""
        w = self.base.weights
        return [DiscreteMeasure(block_cycle(self.embedded, k), w) for k in range(3)]

    def supports(self):
        return [block_cycle(self.embedded, k) for k in range(3)]


def embed_graph_m3(u1, u2):
    if u1.base != u2.base:
        raise BaseMismatch("u1 and u2 must share their base measure")
    check_uniform(u1.base)
    x = u1.base.points
    d = x.shape[1]
    if u1.values.shape[1] != d or u2.values.shape[1] != d:
        raise DimensionMismatch("fields must take values in the base dimension")
    zero = np.zeros_like(x)
    emb = np.concatenate([x, x, u1.values, zero, zero, u2.values], axis=1)
    return GraphEmbedding(u1.base, emb)


def reduction_identity_terms(u1, u2, plan):
    """The pieces of the m = 3 reduction identity on a 3-way plan.

    Returns ``(C, D, const)`` where ``C`` is the embedded three-marginal
    quadratic objective, ``D`` the six-term vector-field objective and
    ``const = 6 * E_mu[2|x|^2 + |u_1|^2 + |u_2|^2]``.  Expanding the squares
    in ``C`` gives ``C = const - 2 D`` for every plan with base marginals.
    """
    emb = embed_graph_m3(u1, u2)
    base = u1.base
    n = base.size
    if plan.arity != 3 or plan.support_sizes != (n, n, n):
        raise MarginalMismatch(f"need a 3-way plan on {n} atoms, got {plan.support_sizes}")
    for k in range(3):
        err = np.max(np.abs(marginal(plan, k) - base.weights))
        if err > 1e-9:
            raise MarginalMismatch(f"axis {k} marginal off by {err:.3g}")

    C = quadratic_cost(emb.supports()).integrate(plan)

    x, a, b = base.points, u1.values, u2.values
    # G[f, g][i, j] = <f(x_i), g(x_j)>
    ax = a @ x.T
    bx = b @ x.T
    th = plan.mass
    # plan axes (x, y, z) = (0, 1, 2)
    D = (np.einsum("ijk,ji->", th, ax)      # <u1(y), x>
         + np.einsum("ijk,ij->", th, bx)    # <u2(x), y>
         + np.einsum("ijk,jk->", th, bx)    # <u2(y), z>
         + np.einsum("ijk,kj->", th, ax)    # <u1(z), y>
         + np.einsum("ijk,ki->", th, bx)    # <u2(z), x>
         + np.einsum("ijk,ik->", th, ax))   # <u1(x), z>
    const = 6.0 * base.integrate(2 * np.sum(x * x, 1) + np.sum(a * a, 1) + np.sum(b * b, 1))
    return float(C), float(D), float(const)


def reduction_identity_residual(u1, u2, plan):
    """``|C + 2 D - const|``; vanishes (up to rounding) for admissible plans."""
    C, D, const = reduction_identity_terms(u1, u2, plan)
    return abs(C + 2.0 * D - const)
