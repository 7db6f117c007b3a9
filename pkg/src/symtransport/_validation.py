"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, NonUniformWeights

#: Largest number of entries a dense m-way array may hold.
DENSE_CAP = 10**6

UNIFORM_TOL = 1e-12


def as_points(points, name="points"):
    """Return ``points`` as a read-only float array of shape (n, d).

    A flat sequence is read as n points on the real line.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, ensure_2d=True, ensure_min_samples=0,
                      input_name=name, copy=True)
    arr.flags.writeable = False
    return arr


def as_weights(weights):
    arr = np.array(weights, dtype=float).ravel()
    arr.flags.writeable = False
    return arr


def as_finite_tensor(values, name="values"):
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    arr.flags.writeable = False
    return arr


def check_same_dimension(*point_arrays):
    dims = {p.shape[1] for p in point_arrays}
    if len(dims) > 1:
        raise DimensionMismatch(f"points live in different dimensions: {sorted(dims)}")
    return dims.pop() if dims else 0


def is_uniform(weights, tol=UNIFORM_TOL):
    w = np.asarray(weights)
    return bool(np.all(np.abs(w - 1.0 / w.size) <= tol))


def check_uniform(measure):
    if not is_uniform(measure.weights):
        raise NonUniformWeights(
            "this operation searches over permutations and needs uniform weights")


def check_random_state(seed):
    """Single entry point for randomness: a PCG64 ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
