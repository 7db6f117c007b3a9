"""Exact and entropic solvers for multi-marginal Kantorovich problems.

The exact path builds the transportation LP over the flattened m-way plan
and solves it with the package's revised simplex; two uniform marginals of
equal size go to the O(n^3) assignment solver instead.  Both paths return
certified dual potentials.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._assignment import hungarian
from ._simplex import SimplexError, simplex
from ._validation import DENSE_CAP, check_same_dimension, is_uniform
from .costs import CostTensor, symmetrize_cost
from .duality import DualPotentials, _sign, normalize_potentials, symmetric_potentials
from .exceptions import (
    DimensionMismatch,
    InfeasibleMarginals,
    NoConvergence,
    NonSquare,
    SizeCapExceeded,
)
from .measures import CouplingPlan, max_marginal_error, symmetrize_plan


@dataclass(frozen=True, eq=False)
class SolveResult:
    plan: CouplingPlan
    primal_value: float
    dual: DualPotentials
    gap: float
    iterations: int
    sense: str
    cost: CostTensor
    marginals: tuple
    method: str
    exact: bool = True

    @property
    def dual_value(self):
        return self.dual.value(self.marginals)


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    perm: np.ndarray
    value: float
    row_potentials: np.ndarray
    col_potentials: np.ndarray


def _as_cost(cost):
    if isinstance(cost, CostTensor):
        return cost
    if hasattr(cost, "materialize"):
        return cost.materialize()
    return CostTensor(cost)


def _check_problem(cost, marginals):
    if len(marginals) != cost.arity:
        raise DimensionMismatch(f"{len(marginals)} marginals for a cost of arity {cost.arity}")
    for k, mu in enumerate(marginals):
        if mu.size != cost.support_sizes[k]:
            raise DimensionMismatch(
                f"axis {k}: cost has {cost.support_sizes[k]} entries, marginal {mu.size} atoms")
    totals = [mu.weights.sum() for mu in marginals]
    if max(totals) - min(totals) > 1e-9:
        raise InfeasibleMarginals(f"marginal masses differ: {totals}")
    total = int(np.prod(cost.support_sizes, dtype=object))
    if total > DENSE_CAP:
        raise SizeCapExceeded(f"{total} plan entries exceed the dense cap {DENSE_CAP}")


def _constraint_matrix(sizes):
    """Marginal constraints with one redundant row dropped per axis k >= 1."""
    grid = np.indices(sizes).reshape(len(sizes), -1)
    rows, index = [], []
    for k, n in enumerate(sizes):
        for i in range(n if k == 0 else n - 1):
            rows.append((grid[k] == i).astype(float))
            index.append((k, i))
    return np.array(rows), index


def _solve_simplex(cost, marginals, sense):
    sign = _sign(sense)
    sizes = cost.support_sizes
    A, index = _constraint_matrix(sizes)
    b = np.array([marginals[k].weights[i] for k, i in index])
    try:
        sol = simplex(sign * cost.values.ravel(), A, b)
    except SimplexError as exc:
        raise InfeasibleMarginals(str(exc)) from exc
    pots = [np.zeros(n) for n in sizes]
    for (k, i), y in zip(index, sol.y):
        pots[k][i] = sign * y
    mass = sol.x.reshape(sizes)
    mass /= mass.sum()
    return mass, DualPotentials(tuple(pots), sense), sol.iterations


def _solve_assignment_plan(cost, sense):
    n = cost.support_sizes[0]
    sign = _sign(sense)
    perm, u, v = hungarian(sign * cost.values)
    mass = np.zeros((n, n))
    mass[np.arange(n), perm] = 1.0 / n
    return mass, DualPotentials((sign * u, sign * v), sense), n


def solve_mm(cost, marginals, sense="min", method="auto"):
    """Exact multi-marginal Kantorovich problem.

    ``method`` is ``"auto"`` (assignment for two uniform marginals of equal
    size, simplex otherwise), ``"simplex"`` or ``"assignment"``.
    """
    cost = _as_cost(cost)
    marginals = tuple(marginals)
    _check_problem(cost, marginals)
    _sign(sense)
    square_uniform = (cost.arity == 2 and cost.support_sizes[0] == cost.support_sizes[1]
                      and all(is_uniform(mu.weights) for mu in marginals))
    if method == "assignment" and not square_uniform:
        raise NonSquare("assignment route needs two uniform marginals of equal size")
    if method not in ("auto", "simplex", "assignment"):
        raise ValueError(f"unknown method {method!r}")
    if method == "assignment" or (method == "auto" and square_uniform):
        mass, dual, iters = _solve_assignment_plan(cost, sense)
        used = "assignment"
    else:
        mass, dual, iters = _solve_simplex(cost, marginals, sense)
        used = "simplex"
    plan = CouplingPlan(mass)
    dual = normalize_potentials(dual, marginals[0].weights)
    primal = cost.integrate(plan)
    gap = abs(primal - dual.value(marginals))
    return SolveResult(plan=plan, primal_value=primal, dual=dual, gap=gap,
                       iterations=iters, sense=sense, cost=cost,
                       marginals=marginals, method=used)


def solve_sym(cost, mu, sense="max", method="auto"):
    """Kantorovich problem over plans whose marginals all equal ``mu``.

    The cost is symmetrized first; the returned plan is the cyclic average
    of an optimal vertex and the potentials are the (equal) cyclic average
    of optimal potentials.  ``result.cost`` is the symmetrized cost.
    """
    cost = _as_cost(cost)
    sym_cost = symmetrize_cost(cost)
    m = cost.arity
    res = solve_mm(sym_cost, [mu] * m, sense=sense, method=method)
    plan = symmetrize_plan(res.plan)
    dual = symmetric_potentials(res.dual)
    primal = sym_cost.integrate(plan)
    gap = abs(primal - dual.value(res.marginals))
    return SolveResult(plan=plan, primal_value=primal, dual=dual, gap=gap,
                       iterations=res.iterations, sense=sense, cost=sym_cost,
                       marginals=res.marginals, method=res.method)


def solve_assignment(cost, sense="min"):
    """Optimal permutation for an n x n cost; ``value`` is the mean matched cost."""
    c = np.asarray(cost.values if isinstance(cost, CostTensor) else cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise NonSquare(f"assignment needs a square matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix has non-finite entries")
    sign = _sign(sense)
    perm, u, v = hungarian(sign * c)
    n = c.shape[0]
    return AssignmentResult(perm=perm, value=float(c[np.arange(n), perm].mean()),
                            row_potentials=sign * u, col_potentials=sign * v)


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    plan: CouplingPlan
    value: float
    potentials: tuple
    epsilon: float
    iterations: int
    converged: bool
    marginal_error: float
    entropic_bound: float


def sinkhorn_mm(cost, marginals, epsilon, tol=1e-9, max_iter=10_000, sense="min"):
    """Entropic multi-marginal transport by log-domain coordinate scaling.

    Solves ``min <c, P> - epsilon H(P)`` over couplings (``max`` flips the
    cost).  ``value`` is the transport cost ``<c, P>`` of the returned plan;
    it exceeds the exact optimum by at most ``entropic_bound =
    epsilon * sum_k log n_k`` once marginals are met.  When ``max_iter`` is
    reached the last iterate is returned with ``converged=False`` and a
    :class:`NoConvergence` warning.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cost = _as_cost(cost)
    marginals = tuple(marginals)
    _check_problem(cost, marginals)
    m = cost.arity
    sizes = cost.support_sizes
    C = _sign(sense) * cost.values
    with np.errstate(divide="ignore"):
        logw = [np.log(mu.weights) for mu in marginals]
    f = [np.zeros(n) for n in sizes]

    def expand(k, vec):
        shape = [1] * m
        shape[k] = sizes[k]
        return vec.reshape(shape)

    def log_kernel(skip=None):
        acc = -C
        for j in range(m):
            if j != skip:
                acc = acc + expand(j, f[j])
        return acc / epsilon

    converged = False
    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        for k in range(m):
            axes = tuple(j for j in range(m) if j != k)
            lse = logsumexp(log_kernel(skip=k), axis=axes) if axes else log_kernel(skip=k)
            f[k] = epsilon * (logw[k] - lse)
            f[k][~np.isfinite(f[k])] = -np.inf
        P = np.exp(log_kernel())
        err = max(float(np.abs(P.sum(axis=tuple(j for j in range(m) if j != k)) - marginals[k].weights).sum())
                  for k in range(m)) if m > 1 else 0.0
        if err <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"Sinkhorn stopped after {max_iter} sweeps with marginal error {err:.3g}",
                      NoConvergence, stacklevel=2)
    P = P / P.sum()
    plan = CouplingPlan(P)
    bound = epsilon * float(sum(np.log(n) for n in sizes))
    return SinkhornResult(plan=plan, value=cost.integrate(plan), potentials=tuple(f),
                          epsilon=float(epsilon), iterations=it, converged=converged,
                          marginal_error=max_marginal_error(plan, marginals),
                          entropic_bound=bound)


def wasserstein2(mu, nu):
    """Squared 2-Wasserstein distance (optimal transport value for |x - y|^2)."""
    check_same_dimension(mu.points, nu.points)
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    cost = CostTensor(np.sum(diff * diff, axis=-1))
    return max(0.0, solve_mm(cost, [mu, nu], sense="min").primal_value)


# estimators

class KantorovichSolver(BaseEstimator):
    """Estimator front end for :func:`solve_mm` and :func:`sinkhorn_mm`.

    ``fit(cost, marginals)`` stores ``plan_``, ``value_``, ``potentials_``,
    ``gap_`` (exact only) and ``n_iter_``.
    """

    def __init__(self, sense="min", method="auto", epsilon=None, tol=1e-9, max_iter=10_000):
        self.sense = sense
        self.method = method
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, cost, marginals):
        if self.method == "sinkhorn":
            res = sinkhorn_mm(cost, marginals, self.epsilon, tol=self.tol,
                              max_iter=self.max_iter, sense=self.sense)
            self.plan_, self.value_ = res.plan, res.value
            self.potentials_, self.n_iter_ = res.potentials, res.iterations
            self.gap_ = None
            self.result_ = res
            return self
        res = solve_mm(cost, marginals, sense=self.sense, method=self.method)
        self.plan_, self.value_ = res.plan, res.primal_value
        self.potentials_, self.gap_, self.n_iter_ = res.dual, res.gap, res.iterations
        self.result_ = res
        return self

    def score(self, cost, marginals=None):
        """Cost of the fitted plan under ``cost`` (same shape as the fitted one)."""
        check_is_fitted(self, "plan_")
        return _as_cost(cost).integrate(self.plan_)


class SymmetricKantorovichSolver(BaseEstimator):
    """Estimator front end for :func:`solve_sym`: ``fit(cost, mu)``."""

    def __init__(self, sense="max", method="auto"):
        self.sense = sense
        self.method = method

    def fit(self, cost, mu):
        res = solve_sym(cost, mu, sense=self.sense, method=self.method)
        self.plan_, self.value_ = res.plan, res.primal_value
        self.potentials_, self.gap_, self.n_iter_ = res.dual, res.gap, res.iterations
        self.result_ = res
        return self
