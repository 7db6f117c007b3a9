"""Measure-preserving m-involutions of a uniform discrete measure.

On ``n`` equally weighted atoms the measure-preserving maps are exactly the
permutations, and ``S^m = I`` holds iff every cycle length divides ``m``.
This module enumerates and searches those permutations for the symmetric
vector-field problem, and builds the two polar factorizations of sampled
fields.
"""

import itertools
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_random_state, check_uniform
from .costs import SampledVectorField, vector_field_cost
from .duality import DualPotentials
from .exceptions import (
    BaseMismatch,
    CapExceeded,
    DegenerateField,
    HeterogeneousSupports,
    IndexOutOfRange,
    MarginalMismatch,
)
from .measures import DiscreteMeasure, plan_of_maps, shift_array
from .transport import solve_assignment, solve_sym

EXHAUSTIVE_CAP = 10
NOT_ATTAINED_TOL = 1e-6


def _divisors(m):
    return [d for d in range(1, m + 1) if m % d == 0]


def _lcm(a, b):
    return a * b // gcd(a, b)


@dataclass(frozen=True, eq=False)
class MInvolution:
    """A permutation ``perm`` of ``{0, ..., n-1}`` with ``perm^m = id``."""

    perm: np.ndarray
    m: int

    def __post_init__(self):
        p = np.array(self.perm, dtype=int).ravel()
        n = p.size
        if n == 0 or not np.array_equal(np.sort(p), np.arange(n)):
            raise IndexOutOfRange(f"{list(p)} is not a permutation of range({n})")
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if not np.array_equal(self._power(p, self.m), np.arange(n)):
            raise ValueError(f"permutation does not satisfy S^{self.m} = id")
        p.flags.writeable = False
        object.__setattr__(self, "perm", p)

    @staticmethod
    def _power(p, k):
        out = np.arange(p.size)
        for _ in range(k):
            out = p[out]
        return out

    @property
    def n(self):
        return self.perm.size

    def power(self, k):
        return self._power(self.perm, k % self.m)

    def cycles(self):
        seen = np.zeros(self.n, dtype=bool)
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            j = int(self.perm[start])
            while j != start:
                cyc.append(j)
                seen[j] = True
                j = int(self.perm[j])
            out.append(tuple(cyc))
        return out

    def graph_maps(self):
        """Index maps ``S, S^2, ..., S^{m-1}``."""
        return [self.power(k) for k in range(1, self.m)]

    def plan(self, measure):
        """``(I, S, ..., S^{m-1})_# mu``."""
        return plan_of_maps(measure, self.graph_maps())

    def tolist(self):
        return [int(i) for i in self.perm]

    def __eq__(self, other):
        return isinstance(other, MInvolution) and np.array_equal(self.perm, other.perm)

    __hash__ = None

    def __repr__(self):
        return f"MInvolution({self.tolist()}, m={self.m})"


def permutation_order(perm):
    """Smallest k >= 1 with ``perm^k = id``."""
    p = np.asarray(perm, dtype=int)
    order = 1
    seen = np.zeros(p.size, dtype=bool)
    for s in range(p.size):
        if seen[s]:
            continue
        length, j = 0, s
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        order = _lcm(order, length)
    return order


def enumerate_m_involutions(n, m, cap=EXHAUSTIVE_CAP):
    """Yield every permutation of ``range(n)`` whose cycle lengths divide ``m``.

    Each cycle is generated from its smallest element, so every permutation
    appears exactly once.
    """
    if n > cap:
        raise CapExceeded(f"exhaustive enumeration is capped at n = {cap}, got {n}")
    lengths = _divisors(m)
    perm = list(range(n))

    def rec(remaining):
        if not remaining:
            yield MInvolution(perm, m)
            return
        a, rest = remaining[0], remaining[1:]
        for L in lengths:
            if L - 1 > len(rest):
                break
            for others in itertools.permutations(rest, L - 1):
                cyc = (a,) + others
                for t in range(L):
                    perm[cyc[t]] = cyc[(t + 1) % L]
                left = tuple(r for r in rest if r not in others)
                yield from rec(left)
                for c in cyc:
                    perm[c] = c

    yield from rec(tuple(range(n)))


def _check_fields(fields):
    if isinstance(fields, SampledVectorField):
        fields = [fields]
    fields = list(fields)
    if not fields:
        raise BaseMismatch("need at least one field")
    base = fields[0].base
    for f in fields[1:]:
        if f.base != base:
            raise BaseMismatch("fields must share their base measure")
    check_uniform(base)
    return fields, base


def _grams(fields):
    """``W_k[i, j] = <u_k(x_i), x_j>`` for k = 1..m-1."""
    x = fields[0].base.points
    return [f.values @ x.T for f in fields]


def involution_objective(fields, S):
    """``(1/n) sum_i sum_k <u_k(x_i), x_{S^k(i)}>``."""
    fields, base = _check_fields(fields)
    if isinstance(S, MInvolution):
        powers = [S.power(k) for k in range(1, len(fields) + 1)]
    else:
        p = np.asarray(S, dtype=int)
        powers, cur = [], np.arange(p.size)
        for _ in fields:
            cur = p[cur]
            powers.append(cur)
    return _objective(_grams(fields), powers)


def _objective(grams, powers):
    n = grams[0].shape[0]
    rows = np.arange(n)
    return float(sum(W[rows, P].sum() for W, P in zip(grams, powers)) / n)


def _powers(perm, count):
    out, cur = [], np.arange(perm.size)
    for _ in range(count):
        cur = perm[cur]
        out.append(cur)
    return out


@dataclass(frozen=True, eq=False)
class PolarResult:
    S: MInvolution
    assignment: np.ndarray
    objective: float
    lp_bound: float
    certificate_gap: float
    mode: str = "exhaustive"
    message: str = ""
    potentials: tuple = field(default=())

    @property
    def attained(self):
        return self.certificate_gap <= NOT_ATTAINED_TOL


def _cycle_gain(grams, cyc):
    L = len(cyc)
    gain = 0.0
    for k, W in enumerate(grams, start=1):
        for t in range(L):
            gain += W[cyc[t], cyc[(t + k) % L]] - W[cyc[t], cyc[t]]
    return gain


def _greedy_fill(grams, perm, m):
    """Repeatedly close the best positive-gain cycle among fixed points."""
    perm = perm.copy()
    lengths = [L for L in _divisors(m) if L >= 2]
    while True:
        fixed = [i for i in range(perm.size) if perm[i] == i]
        best, best_cyc = 1e-12, None
        for L in lengths:
            for combo in itertools.combinations(fixed, L):
                a = combo[0]
                for others in itertools.permutations(combo[1:]):
                    cyc = (a,) + others
                    g = _cycle_gain(grams, cyc)
                    if g > best:
                        best, best_cyc = g, cyc
        if best_cyc is None:
            return perm
        L = len(best_cyc)
        for t in range(L):
            perm[best_cyc[t]] = best_cyc[(t + 1) % L]


def _cycles_of(perm):
    return [c for c in MInvolution.cycles(_Perm(perm)) if len(c) > 1]


class _Perm:
    # lightweight stand-in so MInvolution.cycles can run on raw arrays
    def __init__(self, perm):
        self.perm = perm
        self.n = perm.size


def _dissolve(perm, cyc):
    perm = perm.copy()
    for c in cyc:
        perm[c] = c
    return perm


def _local_search_2(grams, perm, m):
    """Pair moves for involutions: pair i with j (freeing old partners) or unpair."""
    n = perm.size
    cur = _objective(grams, _powers(perm, m - 1))
    improved = True
    while improved:
        improved = False
        for i in range(n):
            for j in range(i, n):
                cand = perm.copy()
                if j == i:
                    if cand[i] == i:
                        continue
                    cand[cand[i]] = cand[i]
                    cand[i] = i
                else:
                    if cand[i] == j:
                        continue
                    for a in (i, j):
                        if cand[a] != a:
                            cand[cand[a]] = cand[a]
                            cand[a] = a
                    cand[i], cand[j] = j, i
                val = _objective(grams, _powers(cand, m - 1))
                if val > cur + 1e-12:
                    perm, cur, improved = cand, val, True
    return perm


def _local_search_cycles(grams, perm, m):
    """Cycle reassembly: dissolve one cycle, greedily rebuild from fixed points."""
    cur = _objective(grams, _powers(perm, m - 1))
    improved = True
    while improved:
        improved = False
        for cyc in [None] + _cycles_of(perm):
            base = perm if cyc is None else _dissolve(perm, cyc)
            cand = _greedy_fill(grams, base, m)
            val = _objective(grams, _powers(cand, m - 1))
            if val > cur + 1e-12:
                perm, cur, improved = cand, val, True
                break
    return perm


def _random_m_involution(n, m, rng):
    order = rng.permutation(n)
    lengths = _divisors(m)
    perm = np.arange(n)
    pos = 0
    while pos < n:
        L = int(rng.choice([d for d in lengths if d <= n - pos]))
        cyc = order[pos:pos + L]
        for t in range(L):
            perm[cyc[t]] = cyc[(t + 1) % L]
        pos += L
    return perm


def _better(val, perm, best_val, best_perm, tol=1e-12):
    if best_perm is None or val > best_val + tol:
        return True
    return abs(val - best_val) <= tol and tuple(perm) < tuple(best_perm)


def best_involution(fields, m=None, mode="exhaustive", n_restarts=50, random_state=0,
                    with_lp_bound=True):
    """Best m-involution for ``sum_k <u_k(x), S^k x>`` and its LP certificate.

    ``mode`` is ``"exhaustive"`` (n <= 10, globally optimal), ``"matching"``
    (greedy cycle closing) or ``"local_search"`` (greedy start plus
    ``n_restarts`` seeded random restarts, each improved by pair moves for
    m = 2 and by cycle reassembly for m >= 3).  ``lp_bound`` is the value of
    the symmetric LP relaxation.
    """
    fields, base = _check_fields(fields)
    m = len(fields) + 1 if m is None else m
    if m != len(fields) + 1:
        raise BaseMismatch(f"m = {m} needs {m - 1} fields, got {len(fields)}")
    n = base.size
    grams = _grams(fields)

    best_val, best_perm = -np.inf, None
    if mode == "exhaustive":
        for S in enumerate_m_involutions(n, m):
            val = _objective(grams, [S.power(k) for k in range(1, m)])
            if _better(val, S.perm, best_val, best_perm):
                best_val, best_perm = val, S.perm.copy()
    elif mode in ("matching", "local_search"):
        start = _greedy_fill(grams, np.arange(n), m)
        starts = [start]
        if mode == "local_search":
            rng = check_random_state(random_state)
            starts += [_random_m_involution(n, m, rng) for _ in range(n_restarts)]
        for s in starts:
            if mode == "local_search":
                s = _local_search_2(grams, s, m) if m == 2 else _local_search_cycles(grams, s, m)
            val = _objective(grams, _powers(s, m - 1))
            if _better(val, s, best_val, best_perm):
                best_val, best_perm = val, s.copy()
    else:
        raise ValueError(f"unknown mode {mode!r}")

    S = MInvolution(best_perm, m)
    lp = solve_sym(vector_field_cost(fields), base, sense="max").primal_value if with_lp_bound else np.nan
    gap = lp - best_val
    msg = ""
    if gap > NOT_ATTAINED_TOL:
        msg = ("relaxation not attained at tested involutions" if mode != "exhaustive"
               else "relaxation not attained by any m-involution")
    return PolarResult(S=S, assignment=S.perm, objective=best_val, lp_bound=lp,
                       certificate_gap=gap, mode=mode, message=msg)


@dataclass(frozen=True)
class Characterization:
    symmetric_plan: bool
    measure_preserving_involution: bool
    annihilates_antisymmetric: bool

    @property
    def agree(self):
        return (self.symmetric_plan == self.measure_preserving_involution
                == self.annihilates_antisymmetric)

    def __iter__(self):
        return iter((self.symmetric_plan, self.measure_preserving_involution,
                     self.annihilates_antisymmetric))


def characterization_check(S, mu):
    """Three equivalent descriptions of an involutive graph, evaluated separately.

    ``S`` is any index map ``range(n) -> range(n)`` (not necessarily a
    bijection).  Returns (a) the plan ``(I, S)_# mu`` has both marginals ``mu``
    and is invariant under swapping coordinates, (b) ``S`` is measure
    preserving and ``S o S = id``, (c) ``sum_i w_i H(S x_i, x_i) = 0`` for each
    basis antisymmetric ``H = E_jk - E_kj``.
    """
    check_uniform(mu)
    s = np.asarray(S.perm if isinstance(S, MInvolution) else S, dtype=int).ravel()
    n = mu.size
    if s.size != n or np.any(s < 0) or np.any(s >= n):
        raise IndexOutOfRange(f"map must send range({n}) into itself")
    w = mu.weights

    M = np.zeros((n, n))
    np.add.at(M, (np.arange(n), s), w)
    a = bool(np.array_equal(M, M.T) and np.array_equal(M.sum(axis=0), M.sum(axis=1)))

    pushed = np.zeros(n)
    np.add.at(pushed, s, w)
    b = bool(np.array_equal(pushed, w) and np.array_equal(s[s], np.arange(n)))

    c = True
    for j in range(n):
        for k in range(j + 1, n):
            # sum_i w_i H(S i, i) with H = E_jk - E_kj
            total = w[k] * (s[k] == j) - w[j] * (s[j] == k)
            if total != 0:
                c = False
                break
        if not c:
            break
    return Characterization(a, b, c)


def swap_involution(i, j, n):
    """Transposition of atoms ``i`` and ``j`` on ``n`` atoms."""
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise IndexOutOfRange(f"need distinct indices in range({n}), got {i}, {j}")
    p = np.arange(n)
    p[i], p[j] = j, i
    return MInvolution(p, 2)


def polar_brenier(u):
    """Factor a sampled field as ``u = T o S`` with T monotone and S a permutation.

    ``T`` is the optimal assignment from the base atoms to the field values
    for the squared distance, so its graph is cyclically monotone;
    ``assignment[i]`` is the index j with ``T(x_i) = u(x_j)`` and
    ``S = assignment^{-1}``.  ``potentials`` holds the discrete convex
    potential on the base atoms and its conjugate on the values.
    """
    fields, base = _check_fields([u])
    if not u.is_injective():
        raise DegenerateField("field values repeat; S is not a well-defined permutation")
    x, v = base.points, u.values
    if v.shape[1] != x.shape[1]:
        raise BaseMismatch("field values must live in the base dimension")
    n = base.size
    sq = (np.sum(x * x, 1)[:, None] + np.sum(v * v, 1)[None, :] - 2.0 * x @ v.T)
    res = solve_assignment(sq, sense="min")
    tau = res.perm
    S = np.empty(n, dtype=int)
    S[tau] = np.arange(n)
    if not np.array_equal(tau[S], np.arange(n)):
        raise RuntimeError("polar factorization failed its round-trip check")
    # max-correlation duals: phi_i + psi_j >= <x_i, u_j>
    phi = 0.5 * (np.sum(x * x, 1) - res.row_potentials)
    psi = 0.5 * (np.sum(v * v, 1) - res.col_potentials)
    objective = float(np.sum(x * v[tau]) / n)
    bound = float(phi.mean() + psi.mean())
    return PolarResult(S=MInvolution(S, permutation_order(S)), assignment=tau,
                       objective=objective, lp_bound=bound,
                       certificate_gap=bound - objective, mode="assignment",
                       potentials=(phi, psi))


@dataclass(frozen=True, eq=False)
class HamiltonianRepresentation:
    polar: PolarResult
    potentials: DualPotentials
    residuals: np.ndarray

    @property
    def max_residual(self):
        return float(self.residuals.max())

    @property
    def represented(self):
        return self.max_residual <= 1e-8


def polar_hamiltonian(fields, m=None, mode="auto", **kwargs):
    """Best m-involution plus the symmetric-LP certificate on its graph.

    The residual at atom ``i`` is ``|sum_k u(S^k i) - c~(i, S i, ...)|`` for the
    symmetric optimal potential ``u`` and symmetrized cost ``c~``; all
    residuals vanish exactly when the involution's graph plan is LP optimal.
    """
    fields, base = _check_fields(fields)
    m = len(fields) + 1 if m is None else m
    if mode == "auto":
        mode = "exhaustive" if base.size <= EXHAUSTIVE_CAP else "local_search"
    polar = best_involution(fields, m, mode=mode, **kwargs)
    res = solve_sym(vector_field_cost(fields), base, sense="max")
    pot = res.dual
    S = polar.S
    idx = [np.arange(base.size)] + [S.power(k) for k in range(1, m)]
    lhs = sum(pot[k][idx[k]] for k in range(m))
    rhs = res.cost.values[tuple(idx)]
    return HamiltonianRepresentation(polar=polar, potentials=pot, residuals=np.abs(lhs - rhs))


def realize_plan_as_involution(plan, copies=None, max_copies=64, tol=1e-9):
    """Lift a shift-invariant plan with uniform marginals to an m-involution.

    Each atom ``i`` is split into ``copies`` equal copies (atom ``i`` becomes
    indices ``i*copies .. i*copies + copies - 1``).  When every plan entry is
    a multiple of ``1 / (n * copies)`` the plan is exactly the graph plan of
    the returned m-involution on the refined measure, pushed back to the
    original atoms.  ``copies=None`` searches for the smallest such value.
    """
    sizes = plan.support_sizes
    if len(set(sizes)) != 1:
        raise HeterogeneousSupports("plan axes must share one support")
    n, m = sizes[0], plan.arity
    if np.max(np.abs(shift_array(plan.mass, 1) - plan.mass)) > tol:
        raise MarginalMismatch("plan is not invariant under the cyclic shift")
    scaled = plan.mass * n
    if copies is None:
        for K in range(1, max_copies + 1):
            if np.max(np.abs(scaled * K - np.round(scaled * K))) <= tol * K:
                copies = K
                break
        else:
            raise MarginalMismatch(f"plan entries are not multiples of 1/(n*K) for K <= {max_copies}")
    counts = np.round(scaled * copies).astype(int)
    if np.max(np.abs(scaled * copies - counts)) > tol * copies:
        raise MarginalMismatch(f"plan entries are not multiples of 1/(n*{copies})")
    for k in range(m):
        if np.any(counts.sum(axis=tuple(j for j in range(m) if j != k)) != copies):
            raise MarginalMismatch("plan marginals are not uniform")
    nxt = np.zeros(n, dtype=int)
    perm = np.arange(n * copies)
    for t in map(tuple, np.argwhere(counts > 0)):
        rotations = [t[r:] + t[:r] for r in range(m)]
        if t != min(rotations):
            continue
        period = next(s for s in range(1, m + 1) if rotations[s % m] == t)
        for _ in range(counts[t]):
            atoms = []
            for a in t[:period]:
                atoms.append(a * copies + nxt[a])
                nxt[a] += 1
            for r in range(period):
                perm[atoms[r]] = atoms[(r + 1) % period]
    return MInvolution(perm, m), copies


def refine_fields(fields, copies):
    """Fields on the measure with each atom split into ``copies`` equal atoms."""
    fields, base = _check_fields(fields)
    pts = np.repeat(base.points, copies, axis=0)
    refined = DiscreteMeasure.uniform(pts)
    return [SampledVectorField(refined, np.repeat(f.values, copies, axis=0)) for f in fields]


# estimators

def _fields_from_arrays(X, U):
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(X), -1)
    U = np.asarray(U, dtype=float)
    base = DiscreteMeasure.uniform(X)
    if U.ndim == 1:
        U = U.reshape(-1, 1, 1)
    elif U.ndim == 2:
        U = U[:, None, :]
    return [SampledVectorField(base, U[:, k, :]) for k in range(U.shape[1])]


class InvolutionSearch(TransformerMixin, BaseEstimator):
    """Estimator wrapper of :func:`best_involution`.

    ``fit(X, U)`` takes base points ``X`` of shape (n, d) and field values
    ``U`` of shape (n, d) for m = 2 or (n, m-1, d).  ``transform(X)`` returns
    the points rearranged by the fitted involution, ``X[S]``.
    """

    def __init__(self, mode="exhaustive", n_restarts=50, random_state=0):
        self.mode = mode
        self.n_restarts = n_restarts
        self.random_state = random_state

    def fit(self, X, U):
        fields = _fields_from_arrays(X, U)
        res = best_involution(fields, mode=self.mode, n_restarts=self.n_restarts,
                              random_state=self.random_state)
        self.involution_ = res.S
        self.objective_ = res.objective
        self.lp_bound_ = res.lp_bound
        self.certificate_gap_ = res.certificate_gap
        self.result_ = res
        return self

    def transform(self, X):
        check_is_fitted(self, "involution_")
        X = np.asarray(X)
        return X[self.involution_.perm]


class BrenierPolar(TransformerMixin, BaseEstimator):
    """Estimator wrapper of :func:`polar_brenier`.

    After ``fit(X, U)``, ``monotone_map_`` holds ``T(x_i)`` for each atom and
    ``transform(X)`` returns ``X[S]`` so that ``monotone_map_[S] == U``.
    """

    def fit(self, X, U):
        (field_,) = _fields_from_arrays(X, U)
        res = polar_brenier(field_)
        self.involution_ = res.S
        self.assignment_ = res.assignment
        self.monotone_map_ = field_.values[res.assignment]
        self.potential_ = res.potentials[0]
        self.result_ = res
        return self

    def transform(self, X):
        check_is_fitted(self, "involution_")
        return np.asarray(X)[self.involution_.perm]
