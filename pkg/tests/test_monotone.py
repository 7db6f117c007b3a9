import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtransport.costs import SampledVectorField
from symtransport.exceptions import (
    CapExceeded,
    DimensionMismatch,
    EmptySample,
    GridMismatch,
    NonSquareGrid,
)
from symtransport.measures import DiscreteMeasure
from symtransport.monotone import (
    FitzpatrickFunction,
    GraphSample,
    GridFunction,
    antisymmetrize,
    fitzpatrick,
    fitzpatrick_grid,
    is_m_cyclically_monotone,
    is_monotone,
    legendre_conjugate,
    monotone_equivalence_report,
    partial_legendre,
    sandwich_violation,
    selfdual_interpolation,
)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def _square():
    return np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def _brute_cyclic_min(x, p, m):
    """Minimum of the cyclic sum over every index tuple, by enumeration."""
    n = len(x)
    best = np.inf
    for t in itertools.product(range(n), repeat=m):
        s = sum(p[t[(k + 1) % m]] @ (x[t[(k + 1) % m]] - x[t[k]]) for k in range(m))
        best = min(best, s)
    return best


def test_identity_is_monotone():
    x = np.linspace(-1, 1, 7)
    assert is_monotone((x, x)).holds


def test_negative_identity_two_points():
    res = is_monotone(([[-1.0], [1.0]], [[1.0], [-1.0]]))
    assert not res.holds and res.worst == (0, 1)
    assert res.worst_value == pytest.approx(-4.0)


def test_rotation_is_monotone():
    x = np.random.default_rng(0).normal(size=(9, 2))
    res = is_monotone((x, x @ ROT.T))
    assert res.holds and abs(res.worst_value) <= 1e-12


def test_sample_shape_check():
    with pytest.raises(DimensionMismatch):
        GraphSample(np.zeros((3, 2)), np.zeros((3, 1)))


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_identity_is_cyclically_monotone(m):
    x = np.random.default_rng(m).normal(size=(6, 2))
    assert is_m_cyclically_monotone((x, x), m).holds


def test_rotation_square_cyclic_orders():
    x = _square()
    sample = (x, x @ ROT.T)
    assert is_m_cyclically_monotone(sample, 2).holds
    res = is_m_cyclically_monotone(sample, 4)
    assert not res.holds
    assert res.worst_value == pytest.approx(-4.0)
    assert len(res.worst) == 4


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_walk_search_matches_enumeration(seed, m):
    rng = np.random.default_rng(seed)
    x, p = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    res = is_m_cyclically_monotone((x, p), m)
    assert res.worst_value == pytest.approx(_brute_cyclic_min(x, p, m), abs=1e-12)
    w = res.worst
    recomputed = sum(p[w[(k + 1) % m]] @ (x[w[(k + 1) % m]] - x[w[k]]) for k in range(m))
    assert recomputed == pytest.approx(res.worst_value, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_cyclic_implies_monotone_and_failures_propagate(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 2))
    A = rng.normal(size=(2, 2)) + rng.uniform(0, 2) * np.eye(2)
    sample = (x, x @ A.T)
    for m in (2, 3):
        if is_m_cyclically_monotone(sample, m).holds:
            assert is_monotone(sample, tol=1e-10).holds
        else:
            assert not is_m_cyclically_monotone(sample, 2 * m).holds


def test_random_mode_finds_violations():
    x = _square()
    res = is_m_cyclically_monotone((x, x @ ROT.T), 4, mode="random", trials=20_000)
    assert not res.holds


def test_cyclic_cap():
    x = np.zeros((11, 1))
    with pytest.raises(CapExceeded):
        is_m_cyclically_monotone((x, x), 6)


def test_fitzpatrick_graph_points():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 2))
    p = x @ np.diag([1.0, 3.0])
    for xi, pi in zip(x, p):
        assert fitzpatrick((x, p), pi, xi) == pytest.approx(xi @ pi, abs=1e-12)


def test_fitzpatrick_dense_identity_closed_form():
    y = np.linspace(-1, 1, 2001)
    P, X = np.meshgrid(np.linspace(-1, 1, 11), np.linspace(-1, 1, 11), indexing="ij")
    vals = fitzpatrick((y, y), P.ravel(), X.ravel())
    exact = (P.ravel() + X.ravel()) ** 2 / 4
    assert np.max(np.abs(vals - exact)) <= 1e-6
    assert np.all(vals <= exact + 1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_fitzpatrick_inequality_for_monotone_samples(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(6, 2))
    B = rng.normal(size=(2, 2))
    p = x @ (B @ B.T + 0.1 * np.eye(2)) + x @ (B - B.T)
    assert is_monotone((x, p)).holds
    vals = fitzpatrick((x, p), p, x)
    assert np.all(vals >= np.sum(x * p, axis=1) - 1e-10)


def test_fitzpatrick_empty():
    with pytest.raises(EmptySample):
        fitzpatrick((np.zeros((0, 1)), np.zeros((0, 1))), 0.0, 0.0)


def test_grid_validation():
    with pytest.raises(GridMismatch):
        GridFunction([[0.0, 0.0, 1.0]], [1.0, 2.0, 3.0])
    with pytest.raises(GridMismatch):
        GridFunction([[0.0, 1.0]], [1.0, 2.0, 3.0])


def test_legendre_of_half_square():
    p = np.linspace(-2, 2, 81)
    L = GridFunction.tabulate(lambda x, q: 0.5 * q ** 2, [np.linspace(0, 1, 3), p])
    K = partial_legendre(L, [1])
    y = K.axes[1]
    interior = np.abs(y) <= 1.5
    assert np.max(np.abs(K.values[:, interior] - 0.5 * y[interior] ** 2)) <= L.tolerance


def test_legendre_of_zero_is_abs():
    p = np.linspace(-1, 1, 21)
    K = partial_legendre(GridFunction([[0.0], p], np.zeros((1, 21))), [1])
    assert np.allclose(K.values[0], np.abs(p), atol=1e-15)


def test_double_legendre_recovers_convex_tabulation():
    p = np.linspace(-1, 1, 41)
    L = GridFunction.tabulate(lambda x, q: np.exp(q) + x * q, [np.linspace(-1, 1, 5), p])
    # the dual grid has to cover every slope of L for the round trip to close
    K = partial_legendre(L, [1], dual_axes=[np.linspace(-4, 4, 801)])
    back = partial_legendre(K, [1], dual_axes=[p])
    assert np.all(back.values <= L.values + 1e-12)
    assert np.max(np.abs(back.values - L.values)) <= L.tolerance * 0.01


def test_double_legendre_is_below_nonconvex_tabulation():
    p = np.linspace(-1, 1, 41)
    L = GridFunction.tabulate(lambda q: np.cos(3 * q), [p])
    back = partial_legendre(partial_legendre(L, [0]), [0])
    assert np.all(back.values <= L.values + 1e-12)
    assert np.max(L.values - back.values) > 0.1


def test_legendre_two_axis_block_matches_brute_force():
    rng = np.random.default_rng(2)
    a, b = np.linspace(-1, 1, 5), np.linspace(0, 2, 4)
    vals = rng.normal(size=(3, 5, 4))
    L = GridFunction([[0.0, 1.0, 2.0], a, b], vals)
    K = partial_legendre(L, [1, 2])
    for i, j, k in itertools.product(range(3), range(5), range(4)):
        brute = max(a[j] * a[s] + b[k] * b[t] - vals[i, s, t] for s in range(5) for t in range(4))
        assert K.values[i, j, k] == pytest.approx(brute, abs=1e-12)


def test_legendre_noncontiguous_axes():
    L = GridFunction([[0.0, 1.0]] * 3, np.zeros((2, 2, 2)))
    with pytest.raises(GridMismatch):
        partial_legendre(L, [0, 2])


def _identity_fitzpatrick(n=21):
    y = np.linspace(-1, 1, 201)
    axes = [np.linspace(-1, 1, n), np.linspace(-1, 1, n)]
    N = fitzpatrick_grid((y, y), [axes[0]], [axes[1]])
    return N, legendre_conjugate(N)


def test_selfdual_interpolation_sandwich_identity():
    N, Ns = _identity_fitzpatrick()
    L = selfdual_interpolation(N, Ns)
    tol = max(N.tolerance, Ns.tolerance)
    assert sandwich_violation(N, L, Ns) <= tol
    P, X = np.meshgrid(*N.axes, indexing="ij")
    assert np.min(L.values - P * X) >= -tol


def test_selfdual_interpolation_fixed_when_equal():
    # a function equal to its own swapped conjugate: N(p, x) = (p^2 + x^2) / 2
    axes = [np.linspace(-1, 1, 11)] * 2
    N = GridFunction.tabulate(lambda p, x: 0.5 * (p ** 2 + x ** 2), axes)
    L = selfdual_interpolation(N, N)
    assert np.max(np.abs(L.values - N.values)) <= N.tolerance


def test_selfdual_interpolation_grid_mismatch():
    N = GridFunction([[0.0, 1.0], [0.0, 1.0]], np.zeros((2, 2)))
    other = GridFunction([[0.0, 2.0], [0.0, 1.0]], np.zeros((2, 2)))
    with pytest.raises(GridMismatch):
        selfdual_interpolation(N, other)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15)
def test_sandwich_for_random_monotone_samples(seed):
    rng = np.random.default_rng(seed)
    y = np.sort(rng.uniform(-1, 1, size=6))
    q = np.cumsum(rng.uniform(0, 1, size=6)) - 1.5
    axes = np.linspace(-1.5, 1.5, 13)
    N = fitzpatrick_grid((y, q), [axes], [axes])
    Ns = legendre_conjugate(N)
    L = selfdual_interpolation(N, Ns)
    assert sandwich_violation(N, L, Ns) <= max(N.tolerance, Ns.tolerance)


def test_antisymmetrize_examples():
    x = np.linspace(-1, 1, 7)
    K = GridFunction.tabulate(lambda a, b: a * b ** 2, [x, x])
    H = antisymmetrize(K)
    A, B = np.meshgrid(x, x, indexing="ij")
    assert np.allclose(H.values, (A * B ** 2 - B * A ** 2) / 2, atol=1e-15)
    sym = GridFunction.tabulate(lambda a, b: np.cos(a) * np.cos(b), [x, x])
    assert np.all(antisymmetrize(sym).values == 0.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_antisymmetrize_is_exact(seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 1, 4)
    K = GridFunction([x, x, x, x], rng.normal(size=(4, 4, 4, 4)))
    H = antisymmetrize(K).values
    assert np.all(H + np.transpose(H, (2, 3, 0, 1)) == 0.0)
    for i, j in itertools.product(range(4), repeat=2):
        assert H[i, j, i, j] == 0.0


def test_antisymmetrize_dominates_subantisymmetric():
    # K(x, y) + K(y, x) <= 0 implies K <= H
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6))
    K = (A - A.T) / 2 - rng.uniform(size=(6, 6)) - rng.uniform(size=(6, 6)).T
    x = np.arange(6.0)
    H = antisymmetrize(GridFunction([x, x], K))
    assert np.all(K <= H.values + 1e-15)


def test_antisymmetrize_nonsquare():
    with pytest.raises(NonSquareGrid):
        antisymmetrize(GridFunction([[0.0, 1.0], [0.0, 2.0]], np.zeros((2, 2))))


def _field(x, v):
    return SampledVectorField(DiscreteMeasure.uniform(x), v)


def test_report_scaled_identity():
    x = np.linspace(-2, 2, 5).reshape(-1, 1)
    rep = monotone_equivalence_report(_field(x, 2 * x))
    assert rep.flags == (True, True, True, True)


def test_report_negative_identity():
    x = np.array([[-1.0], [1.0]])
    rep = monotone_equivalence_report(_field(x, -x))
    assert rep.flags == (False, False, False, False)


def test_report_rotation():
    x = _square()
    rep = monotone_equivalence_report(_field(x, x @ ROT.T))
    assert rep.all_equivalent and rep.monotone
    assert not is_m_cyclically_monotone((x, x @ ROT.T), 4).holds


def test_report_cap():
    x = np.arange(9.0).reshape(-1, 1)
    with pytest.raises(CapExceeded):
        monotone_equivalence_report(_field(x, x))


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
@settings(max_examples=60)
def test_report_flags_agree(seed, monotone):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    x = rng.normal(size=(n, 2))
    if monotone:
        B = rng.normal(size=(2, 2))
        v = x @ (B @ B.T + 0.2 * np.eye(2)) + x @ (B - B.T)
    else:
        v = rng.normal(size=(n, 2))
    assert monotone_equivalence_report(_field(x, v)).all_equivalent


def test_fitzpatrick_estimator():
    x = np.linspace(-1, 1, 5)
    est = FitzpatrickFunction().fit(x, x)
    assert est.monotone_
    assert est.predict(0.5, 0.5) == pytest.approx(0.25)
