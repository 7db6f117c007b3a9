"""Dual potentials of the Kantorovich problem and the certificates built on them.

Sign conventions: for a *min* problem the potentials satisfy
``sum_k u_k(x_k) <= c(x_0, ..., x_{m-1})`` everywhere; for a *max* problem the
inequality is reversed.  In both cases the dual value is
``sum_k int u_k dmu_k`` and equals the optimal plan cost at optimality, with
equality of the constraint on the support of every optimal plan.
"""

from dataclasses import dataclass, field

import numpy as np

from .costs import CostTensor, quadratic_cost
from .exceptions import (
    AxisOutOfRange,
    DimensionMismatch,
    HeterogeneousSupports,
    NotExactSolve,
    NotQuadraticCost,
)
from .measures import merge_atoms, shift_array

MASS_TOL = 1e-12
SLACK_TOL = 1e-8


def _sign(sense):
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    return 1.0 if sense == "min" else -1.0


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """One potential array per marginal, plus the optimization sense."""

    potentials: tuple
    sense: str = "min"

    def __post_init__(self):
        pots = tuple(np.array(u, dtype=float).ravel() for u in self.potentials)
        for u in pots:
            u.flags.writeable = False
        object.__setattr__(self, "potentials", pots)
        _sign(self.sense)

    @property
    def arity(self):
        return len(self.potentials)

    @property
    def support_sizes(self):
        return tuple(u.shape[0] for u in self.potentials)

    def __getitem__(self, k):
        return self.potentials[k]

    def tensor_sum(self):
        """``sum_k u_k(i_k)`` as an m-way array."""
        m = self.arity
        total = np.zeros(self.support_sizes)
        for k, u in enumerate(self.potentials):
            shape = [1] * m
            shape[k] = u.shape[0]
            total = total + u.reshape(shape)
        return total

    def value(self, marginals):
        return float(sum(mu.weights @ u for mu, u in zip(marginals, self.potentials)))

    def slack(self, cost):
        """Signed slack, nonnegative exactly where the dual constraint holds."""
        values = cost.values if isinstance(cost, CostTensor) else np.asarray(cost)
        return _sign(self.sense) * (values - self.tensor_sum())

    def max_violation(self, cost):
        return float(max(0.0, -self.slack(cost).min()))

    def shifted(self, constants):
        return DualPotentials(tuple(u + c for u, c in zip(self.potentials, constants)),
                              self.sense)


def normalize_potentials(potentials, first_weights=None):
    """Shift ``u_0`` to zero mean and absorb the constant into ``u_1``.

    The mean is taken against ``first_weights`` (the axis-0 marginal) when
    given, so the dual value is unchanged.
    """
    if potentials.arity < 2:
        return potentials
    u0 = potentials[0]
    w = first_weights if first_weights is not None else np.full(u0.size, 1.0 / u0.size)
    c = float(w @ u0)
    consts = [-c, c] + [0.0] * (potentials.arity - 2)
    return potentials.shifted(consts)


def symmetric_potentials(potentials):
    """Average the potentials over the cyclic group acting on axes.

    For a shift-invariant cost with equal marginals this maps optimal
    potentials to optimal potentials, all equal to one another.
    """
    if len(set(potentials.support_sizes)) != 1:
        raise HeterogeneousSupports("potentials live on supports of different sizes")
    mean = np.mean(np.stack(potentials.potentials), axis=0)
    return DualPotentials((mean,) * potentials.arity, potentials.sense)


def extract_duals(result):
    """Optimal potentials of an exact solve, checked for feasibility and value."""
    if not getattr(result, "exact", False) or result.dual is None:
        raise NotExactSolve("dual potentials are only certified for exact LP solves")
    dual = result.dual
    viol = dual.max_violation(result.cost)
    dv = dual.value(result.marginals)
    if viol > 1e-9 or abs(dv - result.primal_value) > 1e-8:
        raise NotExactSolve(
            f"solver duals fail certification (violation {viol:.3g}, gap {abs(dv - result.primal_value):.3g})")
    return dual


def equivariant_duals(result):
    """Group-averaged optimal potentials of a shift-symmetric instance.

    Requires every marginal to carry the same weights (index-aligned) and the
    cost array to be invariant under the cyclic shift of index tuples.  The
    averaged potentials are re-certified against the cost before returning.
    """
    dual = extract_duals(result)
    w0 = result.marginals[0].weights
    if any(not np.array_equal(mu.weights, w0) for mu in result.marginals):
        raise HeterogeneousSupports("marginals do not share index-aligned weights")
    values = result.cost.values
    if np.max(np.abs(shift_array(values, 1) - values)) > 1e-12 * max(1.0, np.abs(values).max()):
        raise HeterogeneousSupports("cost is not invariant under the cyclic index shift")
    sym = symmetric_potentials(dual)
    if sym.max_violation(result.cost) > 1e-9:
        raise NotExactSolve("averaged potentials are infeasible")
    return sym


def c_transform(potentials, i, cost):
    """Replace ``u_i`` by its tightest value given the other potentials.

    For min problems ``u_i(x_i) = min_{x_j, j != i} (c - sum_{j != i} u_j)``;
    for max problems the minimum becomes a maximum.
    """
    m = potentials.arity
    if not 0 <= i < m:
        raise AxisOutOfRange(f"axis {i} not in [0, {m})")
    others = DualPotentials(
        tuple(np.zeros_like(u) if k == i else u for k, u in enumerate(potentials.potentials)),
        potentials.sense)
    residual = cost.values - others.tensor_sum()
    axes = tuple(k for k in range(m) if k != i)
    new_ui = residual.min(axis=axes) if potentials.sense == "min" else residual.max(axis=axes)
    pots = list(potentials.potentials)
    pots[i] = new_ui
    return DualPotentials(tuple(pots), potentials.sense)


def slackness_report(plan, potentials, cost, tol=SLACK_TOL, mass_tol=MASS_TOL):
    """Support tuples where ``sum_k u_k(x_k) = c`` fails by more than ``tol``.

    Returns a list of ``(index tuple, residual)`` sorted by index; tuples
    carrying mass ``<= mass_tol`` are never reported.
    """
    residual = np.abs(cost.values - potentials.tensor_sum())
    bad = (plan.mass > mass_tol) & (residual > tol)
    return [(tuple(int(i) for i in t), float(residual[tuple(t)])) for t in np.argwhere(bad)]


@dataclass(frozen=True, eq=False)
class MongeMaps:
    """Index maps read off a plan, and the share of mass they carry."""

    maps: tuple
    concentration: float
    is_graph: bool


def graph_test(plan, threshold=1.0 - 1e-9):
    """Select, for each axis-0 atom, its heaviest tuple; report the mass carried.

    Ties go to the lowest flattened index.  ``maps`` is empty when the
    concentration falls below ``threshold``.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    n0 = plan.support_sizes[0]
    rows = plan.mass.reshape(n0, -1)
    best = np.argmax(rows, axis=1)
    carried = rows[np.arange(n0), best].sum()
    concentration = float(carried / plan.mass.sum())
    ok = concentration >= threshold
    maps = ()
    if ok:
        tuples = np.unravel_index(best, plan.support_sizes[1:])
        maps = tuple(np.asarray(t, dtype=int) for t in tuples)
    return MongeMaps(maps=maps, concentration=min(concentration, 1.0), is_graph=bool(ok))


@dataclass(frozen=True, eq=False)
class GSPotentials:
    """Convex potentials built from quadratic-cost duals.

    ``phi[i] = (m-1)/2 |x|^2 - u_i`` and ``f[i] = |x|^2 / 2 + phi[i]`` with the
    duals taken in the half-squared-distance convention.
    ``min_second_difference`` is reported on 1-d supports only.
    """

    phi: tuple
    f: tuple
    min_second_difference: tuple = field(default=None)

    def is_discretely_convex(self, tol=1e-8):
        if self.min_second_difference is None:
            return None
        return all(v >= -tol for v in self.min_second_difference)


def _second_differences(x, values):
    order = np.argsort(x)
    xs, vs = x[order], values[order]
    if xs.size < 3:
        return np.inf
    slopes = np.diff(vs) / np.diff(xs)
    return float(np.min(np.diff(slopes)))


def gs_potential_maps(potentials, supports, cost=None):
    """Potentials ``phi_i`` and ``f_i`` from duals of the pairwise-quadratic cost.

    ``potentials`` solve the min problem for ``sum_{i<j} |x_i - x_j|^2``
    (the cost built by :func:`quadratic_cost`); they are halved to match the
    ``1/2 |x|^2`` convention of the potential formulas.
    """
    pts = [s.points if hasattr(s, "points") else np.asarray(s, float).reshape(len(s), -1)
           for s in supports]
    m = len(pts)
    if potentials.sense != "min" or potentials.arity != m:
        raise NotQuadraticCost("expected min-sense duals with one potential per support")
    if cost is not None:
        ref = quadratic_cost(pts)
        if ref.support_sizes != cost.support_sizes or not np.allclose(ref.values, cost.values, atol=1e-12):
            raise NotQuadraticCost("cost is not the pairwise quadratic cost on these supports")
    phi, f = [], []
    for x, u in zip(pts, potentials.potentials):
        sq = np.sum(x * x, axis=1)
        ph = 0.5 * (m - 1) * sq - 0.5 * u
        phi.append(ph)
        f.append(0.5 * sq + ph)
    second = None
    if all(x.shape[1] == 1 for x in pts):
        second = tuple(_second_differences(x[:, 0], fi) for x, fi in zip(pts, f))
    return GSPotentials(tuple(phi), tuple(f), second)


def barycentric_gradient_residual(points, f0, images):
    """Max |central difference of f_0 - (x + sum_i T_i x)| at interior 1-d atoms.

    ``images`` are the arrays ``T_i x`` aligned with ``points``.
    """
    x = np.asarray(points, float).ravel()
    order = np.argsort(x)
    xs = x[order]
    fs = np.asarray(f0, float)[order]
    target = xs + sum(np.asarray(t, float).ravel()[order] for t in images)
    if xs.size < 3:
        return 0.0
    grad = (fs[2:] - fs[:-2]) / (xs[2:] - xs[:-2])
    return float(np.max(np.abs(grad - target[1:-1])))


def barycenter_measure(plan, supports):
    """Image of ``plan`` by ``(x_0, ..., x_{m-1}) -> (1/m) sum_k x_k``."""
    pts = [s.points if hasattr(s, "points") else np.asarray(s, float) for s in supports]
    if len(pts) != plan.arity:
        raise DimensionMismatch(f"{len(pts)} supports for a plan of arity {plan.arity}")
    if len({p.shape[1] for p in pts}) != 1:
        raise DimensionMismatch("supports live in different dimensions")
    for k, p in enumerate(pts):
        if p.shape[0] != plan.support_sizes[k]:
            raise DimensionMismatch(f"axis {k}: {p.shape[0]} points vs plan size {plan.support_sizes[k]}")
    idx = np.argwhere(plan.mass > 0)
    centers = sum(pts[k][idx[:, k]] for k in range(plan.arity)) / plan.arity
    weights = plan.mass[tuple(idx.T)]
    return merge_atoms(centers, weights / weights.sum())


def barycenter_optimality_probe(nu, marginals, candidates=()):
    """Compare ``sum_i W_2^2(mu_i, nu)`` against the same sum for candidates."""
    from .transport import wasserstein2

    def objective(measure):
        return float(sum(wasserstein2(mu, measure) for mu in marginals))

    base = objective(nu)
    report = {"value": base, "candidates": [], "beaten": False}
    for cand in candidates:
        val = objective(cand)
        better = val < base - 1e-8
        report["candidates"].append({"value": val, "strictly_better": better})
        report["beaten"] = report["beaten"] or better
    return report


def certificate_report(result, threshold=1.0 - 1e-9):
    """Primal/dual certificate of an exact solve as a JSON-ready dict."""
    dual = extract_duals(result)
    dual_value = dual.value(result.marginals)
    violations = slackness_report(result.plan, dual, result.cost)
    return {
        "primal": result.primal_value,
        "dual": dual_value,
        "gap": abs(result.primal_value - dual_value),
        "concentration": graph_test(result.plan, threshold).concentration,
        "violations": [{"tuple": list(t), "residual": r} for t, r in violations],
    }
