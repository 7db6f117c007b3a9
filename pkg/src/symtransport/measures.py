"""Discrete measures, couplings and the cyclic shift of product spaces.

A plan on ``n_0 x ... x n_{m-1}`` support indices is stored as a dense
``m``-way array.  The cyclic shift acts on index tuples as

    sigma(i_0, i_1, ..., i_{m-1}) = (i_1, ..., i_{m-1}, i_0)

so a plan ``theta`` is moved to ``sigma_# theta`` with
``(sigma_# theta)[sigma(t)] = theta[t]``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import DENSE_CAP, as_points, as_weights
from .exceptions import (
    AxisOutOfRange,
    EmptySupport,
    HeterogeneousSupports,
    MapOutOfRange,
    NegativeWeight,
    NonNormalized,
    SizeCapExceeded,
    MarginalMismatch,
)

WEIGHT_TOL = 1e-12
PLAN_MASS_TOL = 1e-10
MARGINAL_TOL = 1e-9


def validate(measure):
    """Raise unless ``measure`` has n >= 1 nonnegative weights summing to one."""
    n = measure.weights.shape[0]
    if n == 0 or measure.points.shape[0] == 0:
        raise EmptySupport("a discrete measure needs at least one atom")
    if measure.points.shape[0] != n:
        raise EmptySupport(
            f"{measure.points.shape[0]} points but {n} weights")
    if np.any(measure.weights < 0):
        raise NegativeWeight(f"negative weight {measure.weights.min()!r}")
    total = measure.weights.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise NonNormalized(f"weights sum to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i w_i delta_{x_i}`` in R^d."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))
        object.__setattr__(self, "weights", as_weights(self.weights))
        validate(self)

    @classmethod
    def uniform(cls, points):
        pts = as_points(points)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def integrate(self, values):
        """Integral of a function given by its values on the support."""
        return float(np.tensordot(self.weights, np.asarray(values, float), axes=1))

    def second_moment(self):
        return self.integrate(np.sum(self.points**2, axis=1))

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def __repr__(self):
        return f"DiscreteMeasure(n={self.size}, d={self.dim})"


def _check_dense(shape):
    total = int(np.prod(shape, dtype=object))
    if total > DENSE_CAP:
        raise SizeCapExceeded(
            f"dense array of shape {tuple(shape)} has {total} entries "
            f"(cap {DENSE_CAP})")


@dataclass(frozen=True, eq=False)
class CouplingPlan:
    """Nonnegative m-way array of total mass one."""

    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        _check_dense(mass.shape)
        if mass.ndim < 1:
            raise AxisOutOfRange("a plan needs at least one axis")
        if np.any(mass < 0):
            raise NegativeWeight(f"negative plan mass {mass.min()!r}")
        total = mass.sum()
        if abs(total - 1.0) > PLAN_MASS_TOL:
            raise NonNormalized(f"plan mass sums to {total!r}, not 1")
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)

    @property
    def arity(self):
        return self.mass.ndim

    @property
    def support_sizes(self):
        return self.mass.shape

    @classmethod
    def from_entries(cls, sizes, entries):
        """Build a plan from ``[(i_0, ..., i_{m-1}, mass), ...]``."""
        _check_dense(sizes)
        mass = np.zeros(tuple(sizes))
        for row in entries:
            *idx, value = row
            idx = tuple(int(i) for i in idx)
            if len(idx) != len(sizes):
                raise AxisOutOfRange(f"entry {row!r} does not have {len(sizes)} indices")
            for axis, (i, n) in enumerate(zip(idx, sizes)):
                if not 0 <= i < n:
                    raise MapOutOfRange(f"index {i} out of range on axis {axis}")
            mass[idx] += float(value)
        return cls(mass)

    def entries(self, threshold=0.0):
        """Nonzero entries as ``(index tuple, mass)`` pairs in C order."""
        idx = np.argwhere(self.mass > threshold)
        return [(tuple(int(i) for i in t), float(self.mass[tuple(t)])) for t in idx]

    @cached_property
    def support(self):
        return np.argwhere(self.mass > 0)

    def __repr__(self):
        return f"CouplingPlan(arity={self.arity}, sizes={self.support_sizes})"


def marginal(plan, axis):
    """Weights of the pushforward of ``plan`` by the projection on ``axis``."""
    if not 0 <= axis < plan.arity:
        raise AxisOutOfRange(f"axis {axis} not in [0, {plan.arity})")
    others = tuple(k for k in range(plan.arity) if k != axis)
    return plan.mass.sum(axis=others)


def check_marginals(plan, measures, tol=MARGINAL_TOL):
    """Raise MarginalMismatch unless each axis marginal matches its measure."""
    if len(measures) != plan.arity:
        raise MarginalMismatch(f"{len(measures)} measures for a plan of arity {plan.arity}")
    for k, mu in enumerate(measures):
        if mu.size != plan.support_sizes[k]:
            raise MarginalMismatch(f"axis {k}: {mu.size} atoms vs plan size {plan.support_sizes[k]}")
        err = np.max(np.abs(marginal(plan, k) - mu.weights))
        if err > tol:
            raise MarginalMismatch(f"axis {k} marginal off by {err:.3g}")


def max_marginal_error(plan, measures):
    return max(float(np.max(np.abs(marginal(plan, k) - mu.weights)))
               for k, mu in enumerate(measures))


def product_plan(measures):
    """The independent coupling ``mu_0 (x) ... (x) mu_{m-1}``."""
    mass = measures[0].weights
    for mu in measures[1:]:
        mass = np.multiply.outer(mass, mu.weights)
    return CouplingPlan(mass)


def plan_of_maps(measure, maps, sizes=None):
    """Plan ``(I, T_1, ..., T_{m-1})_# mu`` for index maps ``T_k``."""
    n = measure.size
    maps = [np.asarray(t, dtype=int) for t in maps]
    sizes = tuple(sizes) if sizes is not None else (n,) * (len(maps) + 1)
    mass = np.zeros(sizes)
    idx = [np.arange(n)]
    for k, t in enumerate(maps, start=1):
        if t.shape != (n,) or np.any(t < 0) or np.any(t >= sizes[k]):
            raise MapOutOfRange(f"map {k} is not defined on all {n} atoms")
        idx.append(t)
    np.add.at(mass, tuple(idx), measure.weights)
    return CouplingPlan(mass)


def _check_same_support(plan):
    if len(set(plan.support_sizes)) != 1:
        raise HeterogeneousSupports(
            f"cyclic shift needs equal supports, got sizes {plan.support_sizes}")


def cyclic_shift_plan(plan):
    """``sigma_# plan``: mass at (i_0, ..., i_{m-1}) moves to (i_1, ..., i_0)."""
    _check_same_support(plan)
    return CouplingPlan(np.ascontiguousarray(shift_array(plan.mass, 1)))


def shift_array(values, power=1):
    """Apply the index cyclic shift ``power`` times to an m-way array."""
    m = values.ndim
    power %= m
    if power == 0:
        return values
    # new[j_0, ..., j_{m-1}] = old[j_{m-p}, ..., j_{m-1}, j_0, ...]
    axes = tuple((k + power) % m for k in range(m))
    return np.transpose(values, axes)


def symmetrize_plan(plan):
    """Average of the m cyclic shifts of ``plan``; invariant under the shift."""
    _check_same_support(plan)
    m = plan.arity
    acc = np.zeros_like(plan.mass)
    for p in range(m):
        acc += shift_array(plan.mass, p)
    return CouplingPlan(acc / m)


def is_shift_invariant(plan, tol=1e-14):
    _check_same_support(plan)
    return bool(np.max(np.abs(cyclic_shift_plan(plan).mass - plan.mass)) <= tol)


def pushforward(measure, mapping):
    """Image measure ``T_# mu``.

    ``mapping`` is either an integer index map (length n, values in
    ``[0, n)``) giving ``T(x_i) = x_{mapping[i]}``, or a callable / array of
    target points.  Atoms landing on exactly the same coordinates are merged.
    """
    n = measure.size
    if callable(mapping):
        targets = np.asarray([mapping(x) for x in measure.points], dtype=float)
    else:
        arr = np.asarray(mapping)
        if arr.ndim == 1 and np.issubdtype(arr.dtype, np.integer):
            if arr.shape[0] != n or np.any(arr < 0) or np.any(arr >= n):
                raise MapOutOfRange("index map must send each of the n atoms into [0, n)")
            targets = measure.points[arr]
        else:
            targets = arr.astype(float)
    targets = as_points(targets)
    if targets.shape[0] != n:
        raise MapOutOfRange(f"map gives {targets.shape[0]} images for {n} atoms")
    return merge_atoms(targets, measure.weights)


def merge_atoms(points, weights):
    """Measure with exactly-coinciding points merged, in first-seen order."""
    points = np.asarray(points, dtype=float)
    _, first, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    w = np.zeros(order.size)
    np.add.at(w, rank[inverse], weights)
    return DiscreteMeasure(points[first[order]], w)
