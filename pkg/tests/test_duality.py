import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symtransport.costs import CostTensor, quadratic_cost
from symtransport.duality import (
    DualPotentials,
    barycenter_measure,
    barycenter_optimality_probe,
    barycentric_gradient_residual,
    c_transform,
    certificate_report,
    equivariant_duals,
    extract_duals,
    graph_test,
    gs_potential_maps,
    normalize_potentials,
    slackness_report,
)
from symtransport.exceptions import (
    AxisOutOfRange,
    DimensionMismatch,
    NotExactSolve,
    NotQuadraticCost,
)
from symtransport.measures import (
    CouplingPlan,
    DiscreteMeasure,
    plan_of_maps,
    product_plan,
    pushforward,
)
from symtransport.transport import sinkhorn_mm, solve_mm, solve_sym


def _random_instance(seed, m=None, n=None):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(2, 4))
    n = n or int(rng.integers(2, 5))
    marg = []
    for _ in range(m):
        w = rng.integers(1, 6, size=n).astype(float)
        marg.append(DiscreteMeasure(rng.normal(size=(n, 1)), w / w.sum()))
    return CostTensor(rng.normal(size=(n,) * m)), marg


def test_zero_cost_gives_zero_potentials():
    mu = DiscreteMeasure.uniform([[0.0], [1.0], [2.0]])
    res = solve_mm(CostTensor(np.zeros((3, 3))), [mu, mu])
    dual = extract_duals(res)
    assert dual.value(res.marginals) == 0.0
    assert dual.max_violation(res.cost) <= 1e-12
    normed = normalize_potentials(dual, mu.weights)
    assert np.allclose(normed.tensor_sum(), 0.0, atol=1e-12)


def test_two_by_two_diagonal_duals():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    for method in ("simplex", "assignment"):
        dual = extract_duals(solve_mm(CostTensor([[0.0, 1.0], [1.0, 0.0]]), [mu, mu], method=method))
        assert dual[0][0] + dual[1][0] == pytest.approx(0.0, abs=1e-12)
        assert dual[0][1] + dual[1][1] == pytest.approx(0.0, abs=1e-12)
        assert dual[0][0] + dual[1][1] <= 1.0 + 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_strong_duality_and_slackness(seed):
    cost, marg = _random_instance(seed)
    for sense in ("min", "max"):
        res = solve_mm(cost, marg, sense=sense)
        dual = extract_duals(res)
        assert abs(dual.value(marg) - res.primal_value) <= 1e-8
        assert slackness_report(res.plan, dual, cost) == []


def test_extract_duals_rejects_entropic():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    res = sinkhorn_mm(CostTensor(np.eye(2)), [mu, mu], 0.5)
    with pytest.raises(NotExactSolve):
        extract_duals(res)


def test_slackness_names_perturbed_tuple():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    cost = CostTensor([[0.0, 1.0], [1.0, 0.0]])
    res = solve_mm(cost, [mu, mu])
    dual = extract_duals(res)
    bumped = DualPotentials((dual[0] + np.array([0.0, 0.1]), dual[1]))
    report = slackness_report(res.plan, bumped, cost)
    assert [t for t, _ in report] == [(1, 1)]
    assert report[0][1] == pytest.approx(0.1)


def test_slackness_ignores_zero_mass_tuples():
    plan = CouplingPlan(np.diag([0.5, 0.5]))
    pots = DualPotentials((np.zeros(2), np.zeros(2)))
    cost = CostTensor([[0.0, 7.0], [7.0, 0.0]])
    assert slackness_report(plan, pots, cost) == []


@pytest.mark.parametrize("seed", range(10))
def test_c_transform_fixed_point_at_optimum(seed):
    cost, marg = _random_instance(seed)
    res = solve_mm(cost, marg)
    dual = extract_duals(res)
    # LP duals need not be c-concave; one transform makes them tight,
    # after which transforming again changes nothing
    for i in range(dual.arity):
        tight = c_transform(dual, i, cost)
        again = c_transform(tight, i, cost)
        assert np.max(np.abs(again[i] - tight[i])) <= 1e-12
        assert tight.value(marg) == pytest.approx(res.primal_value, abs=1e-9)


def test_c_transform_zero_start_quadratic():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    cost = quadratic_cost([mu, mu])
    out = c_transform(DualPotentials((np.zeros(2), np.zeros(2))), 0, cost)
    assert np.array_equal(out[0], np.zeros(2))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["min", "max"]))
def test_c_transform_is_ascent_and_idempotent(seed, sense):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 4))
    n = int(rng.integers(2, 4))
    cost = CostTensor(rng.normal(size=(n,) * m))
    marg = [DiscreteMeasure.uniform(rng.normal(size=(n, 1))) for _ in range(m)]
    sign = 1.0 if sense == "min" else -1.0
    start = DualPotentials(tuple(sign * (rng.uniform(size=n) - 5.0) for _ in range(m)), sense)
    assert start.max_violation(cost) == 0.0
    i = int(rng.integers(m))
    once = c_transform(start, i, cost)
    twice = c_transform(once, i, cost)
    assert once.max_violation(cost) <= 1e-12
    assert sign * once.value(marg) >= sign * start.value(marg) - 1e-12
    assert np.max(np.abs(twice[i] - once[i])) <= 1e-12


def test_alternating_c_transforms_reach_fixed_point():
    rng = np.random.default_rng(7)
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    cost = CostTensor(rng.uniform(size=(2, 2)))
    pots = DualPotentials((np.full(2, -10.0), np.full(2, -10.0)))
    prev = None
    for _ in range(10):
        pots = c_transform(c_transform(pots, 0, cost), 1, cost)
        if prev is not None and max(np.max(np.abs(a - b)) for a, b in zip(pots, prev)) <= 1e-12:
            break
        prev = tuple(pots.potentials)
    else:
        pytest.fail("no fixed point after 10 rounds")
    exact = solve_mm(cost, [mu, mu]).primal_value
    assert pots.value([mu, mu]) <= exact + 1e-12


def test_c_transform_axis_check():
    with pytest.raises(AxisOutOfRange):
        c_transform(DualPotentials((np.zeros(2), np.zeros(2))), 2, CostTensor(np.zeros((2, 2))))


def test_graph_test_permutation():
    mu = DiscreteMeasure.uniform(np.arange(4.0).reshape(-1, 1))
    plan = plan_of_maps(mu, [[2, 0, 3, 1], [1, 1, 0, 0]])
    maps = graph_test(plan, 1.0)
    assert maps.is_graph and maps.concentration == 1.0
    assert maps.maps[0].tolist() == [2, 0, 3, 1] and maps.maps[1].tolist() == [1, 1, 0, 0]


def test_graph_test_product_coupling():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    maps = graph_test(product_plan([mu, mu]), 0.9)
    assert maps.concentration == 0.5
    assert not maps.is_graph and maps.maps == ()


def test_graph_test_threshold_range():
    with pytest.raises(ValueError):
        graph_test(CouplingPlan(np.eye(2) / 2), 0.0)


def test_gs_instance_is_monotone_matching():
    rng = np.random.default_rng(11)
    mus = [DiscreteMeasure.uniform(rng.normal(size=(5, 1))) for _ in range(3)]
    res = solve_mm(quadratic_cost(mus), mus)
    maps = graph_test(res.plan)
    assert maps.concentration == 1.0
    ranks = [np.argsort(np.argsort(mu.points[:, 0])) for mu in mus]
    for k, t in enumerate(maps.maps, start=1):
        assert np.array_equal(ranks[k][t], ranks[0])


def test_gs_potentials_zero_duals():
    x = np.array([[0.0], [1.0], [3.0]])
    gs = gs_potential_maps(DualPotentials((np.zeros(3), np.zeros(3))), [x, x])
    assert np.allclose(gs.phi[0], 0.5 * x[:, 0] ** 2)
    assert np.allclose(gs.f[1], x[:, 0] ** 2)
    assert gs.is_discretely_convex()


def test_gs_identical_marginals():
    mu = DiscreteMeasure.uniform(np.linspace(-1, 2, 6).reshape(-1, 1))
    cost = quadratic_cost([mu] * 3)
    res = solve_sym(cost, mu, sense="min")
    maps = graph_test(res.plan)
    for t in maps.maps:
        assert np.array_equal(t, np.arange(6))
    gs = gs_potential_maps(equivariant_duals(res), [mu] * 3, cost)
    for fi in gs.f[1:]:
        assert np.max(np.abs(fi - gs.f[0])) <= 1e-8
    images = [mu.points[t] for t in maps.maps]
    # f_0 is quadratic in the identity case, so central differences are exact
    assert barycentric_gradient_residual(mu.points, gs.f[0], images) <= 1e-8


def test_gs_rejects_other_costs():
    x = np.array([[0.0], [1.0]])
    with pytest.raises(NotQuadraticCost):
        gs_potential_maps(DualPotentials((np.zeros(2), np.zeros(2))), [x, x],
                          CostTensor(np.ones((2, 2))))
    with pytest.raises(NotQuadraticCost):
        gs_potential_maps(DualPotentials((np.zeros(2), np.zeros(2)), "max"), [x, x])


def test_barycenter_of_diagonal_is_measure():
    mu = DiscreteMeasure([[0.0, 1.0], [2.0, -1.0], [5.0, 5.0]], [0.2, 0.3, 0.5])
    plan = plan_of_maps(mu, [np.arange(3), np.arange(3)])
    nu = barycenter_measure(plan, [mu] * 3)
    assert np.array_equal(nu.points, mu.points) and np.allclose(nu.weights, mu.weights)


def test_barycenter_point_mass():
    plan = CouplingPlan(np.array([[1.0]]))
    nu = barycenter_measure(plan, [np.array([[0.0]]), np.array([[2.0]])])
    assert nu.points.tolist() == [[1.0]] and nu.weights.tolist() == [1.0]


def test_barycenter_dimension_mismatch():
    plan = CouplingPlan(np.array([[1.0]]))
    with pytest.raises(DimensionMismatch):
        barycenter_measure(plan, [np.array([[0.0]]), np.array([[2.0, 1.0]])])
    with pytest.raises(DimensionMismatch):
        barycenter_measure(plan, [np.array([[0.0]])])


def test_barycenter_probe():
    mu = DiscreteMeasure.uniform([[0.0], [1.0], [4.0]])
    assert barycenter_optimality_probe(mu, [mu, mu], []) == {
        "value": 0.0, "candidates": [], "beaten": False}
    moved = DiscreteMeasure.uniform([[0.0], [1.5], [4.0]])
    report = barycenter_optimality_probe(mu, [mu, mu, mu], [moved])
    assert not report["beaten"]
    assert report["candidates"][0]["value"] > report["value"]


def test_barycenter_probe_on_solved_instance():
    rng = np.random.default_rng(5)
    mus = [DiscreteMeasure.uniform(rng.normal(size=(4, 2))) for _ in range(3)]
    res = solve_mm(quadratic_cost(mus), mus)
    nu = barycenter_measure(res.plan, mus)
    shifted = DiscreteMeasure(nu.points + 0.05, nu.weights)
    report = barycenter_optimality_probe(nu, mus, [shifted])
    assert not report["beaten"]


def test_potential_symmetry_under_self_adjoint_involution():
    # max <x, y> between mu and sigma_# mu where sigma swaps the two
    # coordinates; averaging u_0 with u_1 o sigma gives optimal potentials
    # with u_1(sigma x) = u_0(x) exactly
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(5, 2))
    mu = DiscreteMeasure.uniform(pts)
    swapped = pts[:, ::-1]
    nu = DiscreteMeasure.uniform(swapped)
    cost = CostTensor(pts @ swapped.T)
    res = solve_mm(cost, [mu, nu], sense="max")
    dual = extract_duals(res)
    w = 0.5 * (dual[0] + dual[1])  # atom i of nu is sigma(x_i)
    sym = DualPotentials((w, w), "max")
    assert sym.max_violation(cost) <= 1e-9
    assert sym.value([mu, nu]) == pytest.approx(res.primal_value, abs=1e-8)
    assert slackness_report(res.plan, sym, cost) == []


def test_certificate_report_keys():
    cost, marg = _random_instance(3, m=2, n=3)
    report = certificate_report(solve_mm(cost, marg))
    assert set(report) == {"primal", "dual", "gap", "concentration", "violations"}
    assert report["gap"] <= 1e-8 and report["violations"] == []


def test_symmetry_transfer_barycenter_is_invariant():
    from symtransport.costs import block_cycle
    from symtransport.transport import wasserstein2
    rng = np.random.default_rng(9)
    mu = DiscreteMeasure.uniform(rng.normal(size=(3, 3)))
    marg = [mu, pushforward(mu, block_cycle(mu.points, 1)), pushforward(mu, block_cycle(mu.points, 2))]
    cost = quadratic_cost(marg)
    res = solve_mm(cost, marg)
    nu = barycenter_measure(res.plan, marg)
    rotated = pushforward(nu, block_cycle(nu.points, 1))
    assert wasserstein2(nu, rotated) <= 1e-10
