"""Scenario runner: one JSON config per scenario, one JSON report per run.

A config looks like::

    {"name": "two_atoms", "command": "solve-sym", "seed": 0,
     "inputs": {"measure": "data/two_atoms.json", "fields": ["data/neg_id.json"]},
     "options": {"sense": "max"},
     "expect": ["strong_duality", {"path": "value", "equals": 1.0}]}

Input paths are relative to the config file.  Measures and fields may also
be given inline or as ``{"random": {...}}`` draws from the scenario seed.
``expect`` lists the checks that decide the exit code (all computed checks
when omitted); dict entries compare a result value.  Exit codes: 0 when
every expectation holds, 1 when one fails, 2 on unreadable input.
"""

import argparse
import hashlib
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DENSE_CAP
from .costs import (
    CostTensor,
    SampledVectorField,
    block_cycle,
    quadratic_cost,
    reduction_identity_residual,
    reduction_identity_terms,
    vector_field_cost,
)
from .duality import (
    barycenter_measure,
    barycenter_optimality_probe,
    certificate_report,
)
from .exceptions import TransportError
from .io import (
    InputError,
    field_from_dict,
    grid_from_dict,
    grid_to_dict,
    load_field,
    load_grid,
    load_measure,
    measure_from_dict,
    measure_to_dict,
    plan_to_dict,
    read_json,
    to_jsonable,
    write_json,
    write_plan_csv,
)
from .measures import DiscreteMeasure, is_shift_invariant, max_marginal_error, pushforward
from .monotone import (
    CONVERSE_NOTE,
    GraphSample,
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

DEFAULT_TOL = 1e-8
IDENTITY_TOL = 1e-9
SEED_LIMIT = 2 ** 64

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _Context:
    """Resolves scenario inputs relative to the config file; owns the one generator."""

    def __init__(self, base_dir, seed):
        self.base_dir = Path(base_dir)
        self.rng = np.random.default_rng(seed)

    def path(self, rel):
        return self.base_dir / rel

    def measure(self, item):
        if isinstance(item, str):
            return load_measure(self.path(item))
        if isinstance(item, dict) and "random" in item:
            r = item["random"]
            n, d = int(r.get("n", 5)), int(r.get("d", 2))
            if r.get("distribution", "normal") == "uniform":
                pts = self.rng.uniform(size=(n, d))
            else:
                pts = self.rng.normal(size=(n, d))
            if r.get("weights", "uniform") == "uniform":
                return DiscreteMeasure.uniform(pts)
            w = self.rng.integers(1, 6, size=n).astype(float)
            return DiscreteMeasure(pts, w / w.sum())
        if isinstance(item, dict):
            return measure_from_dict(item, "<inline measure>")
        raise InputError("<config>", f"cannot read a measure from {item!r}")

    def field(self, item, base=None):
        if isinstance(item, str):
            return load_field(self.path(item))
        if not isinstance(item, dict):
            raise InputError("<config>", f"cannot read a field from {item!r}")
        if "values" in item:
            return field_from_dict(item, self.base_dir, "<inline field>")
        if "measure" in item:
            base = self.measure(item["measure"])
        if base is None:
            raise InputError("<config>", "field needs a base measure")
        x = base.points
        if "random" in item:
            d = int(item["random"].get("d", x.shape[1]))
            return SampledVectorField(base, self.rng.normal(size=(base.size, d)))
        kind = item.get("function")
        if kind == "identity":
            vals = x
        elif kind == "negative_identity":
            vals = -x
        elif kind == "scale":
            vals = float(item["factor"]) * x
        elif kind == "linear":
            vals = x @ np.asarray(item["matrix"], dtype=float).T
        elif kind == "rotation90":
            vals = np.stack([-x[:, 1], x[:, 0]], axis=1)
        else:
            raise InputError("<config>", f"unknown field function {kind!r}")
        return SampledVectorField(base, vals)

    def fields(self, inputs, base=None):
        specs = inputs.get("fields")
        if specs is None:
            specs = [inputs["field"]] if "field" in inputs else None
        if specs is None:
            raise InputError("<config>", "scenario needs 'field' or 'fields'")
        return [self.field(s, base) for s in specs]

    def grid(self, item):
        if isinstance(item, str):
            return load_grid(self.path(item))
        return grid_from_dict(item, "<inline grid>")

    def cost(self, item, marginals, fields=None):
        sizes = tuple(mu.size for mu in marginals)
        if item is None or item == "fields":
            if fields is None:
                raise InputError("<config>", "no cost given")
            return vector_field_cost(fields)
        if item == "quadratic":
            return quadratic_cost(marginals)
        if isinstance(item, str):
            data = read_json(self.path(item))
            return CostTensor(np.asarray(data["values"], dtype=float))
        if "tensor" in item:
            return CostTensor(np.asarray(item["tensor"], dtype=float))
        if "random" in item:
            r = item["random"]
            return CostTensor(self.rng.uniform(r.get("low", 0.0), r.get("high", 1.0), size=sizes))
        raise InputError("<config>", f"cannot build a cost from {item!r}")


def _axis(item):
    if isinstance(item, dict) and "linspace" in item:
        a, b, num = item["linspace"]
        return np.linspace(float(a), float(b), int(num))
    return np.asarray(item, dtype=float)


# subcommand handlers: (ctx, inputs, options, tol) -> (result, checks, artifacts)

def _solve_mm(ctx, inputs, options, tol):
    from .transport import sinkhorn_mm, solve_mm

    marginals = [ctx.measure(s) for s in inputs["measures"]]
    fields = ctx.fields(inputs) if ("fields" in inputs or "field" in inputs) else None
    cost = ctx.cost(inputs.get("cost"), marginals, fields)
    res = solve_mm(cost, marginals, sense=options.get("sense", "min"),
                   method=options.get("method", "auto"))
    cert = certificate_report(res)
    result = {"value": res.primal_value, "dual_value": res.dual_value, "gap": res.gap,
              "sense": res.sense, "method": res.method, "iterations": res.iterations,
              "potentials": [u for u in res.dual.potentials], "certificate": cert}
    checks = {
        "strong_duality": res.gap <= tol,
        "complementary_slackness": not cert["violations"],
        "dual_feasible": res.dual.max_violation(res.cost) <= tol,
        "marginals": max_marginal_error(res.plan, marginals) <= 1e-9,
    }
    if options.get("epsilon") is not None:
        ent = sinkhorn_mm(cost, marginals, float(options["epsilon"]),
                          tol=float(options.get("sinkhorn_tol", 1e-9)),
                          max_iter=int(options.get("max_iter", 10_000)),
                          sense=options.get("sense", "min"))
        excess = abs(ent.value - res.primal_value)
        result["entropic"] = {"value": ent.value, "bound": ent.entropic_bound,
                              "iterations": ent.iterations, "converged": ent.converged}
        checks["entropic_bound"] = ent.converged and excess <= ent.entropic_bound + tol
    return result, checks, {"plan": res.plan}


def _solve_sym(ctx, inputs, options, tol):
    from .involution import best_involution
    from .transport import solve_sym

    mu = ctx.measure(inputs["measure"])
    fields = ctx.fields(inputs, mu) if ("fields" in inputs or "field" in inputs) else None
    arity = int(options.get("m", len(fields) + 1 if fields else 2))
    cost = ctx.cost(inputs.get("cost"), [mu] * arity, fields)
    res = solve_sym(cost, mu, sense=options.get("sense", "max"))
    result = {"value": res.primal_value, "dual_value": res.dual_value, "gap": res.gap,
              "sense": res.sense, "potential": res.dual.potentials[0], "iterations": res.iterations}
    checks = {
        "strong_duality": res.gap <= tol,
        "shift_invariant_plan": is_shift_invariant(res.plan, tol=1e-12),
        "dual_feasible": res.dual.max_violation(res.cost) <= tol,
    }
    uniform = np.all(mu.weights == mu.weights[0])
    if fields is not None and uniform and mu.size <= int(options.get("search_cap", 8)) \
            and res.sense == "max":
        inv = best_involution(fields, arity, mode="exhaustive")
        result["involution"] = inv.S.perm
        result["involution_objective"] = inv.objective
        checks["attained_by_involution"] = abs(inv.objective - res.primal_value) <= tol
    return result, checks, {"plan": res.plan}


def _assign(ctx, inputs, options, tol):
    from .transport import solve_assignment

    if "cost" in inputs:
        item = inputs["cost"]
        if isinstance(item, dict) and "tensor" in item:
            c = np.asarray(item["tensor"], dtype=float)
        else:
            marg = [ctx.measure(s) for s in inputs["measures"]]
            c = ctx.cost(item, marg).values
    else:
        marg = [ctx.measure(s) for s in inputs["measures"]]
        c = quadratic_cost(marg).values
    res = solve_assignment(c, sense=options.get("sense", "min"))
    n = c.shape[0]
    tight = res.row_potentials + res.col_potentials[res.perm] - c[np.arange(n), res.perm]
    slack = c - res.row_potentials[:, None] - res.col_potentials[None, :]
    if options.get("sense", "min") == "max":
        slack = -slack
    result = {"permutation": res.perm, "value": res.value, "sense": options.get("sense", "min"),
              "row_potentials": res.row_potentials, "col_potentials": res.col_potentials}
    checks = {"dual_feasible": float(slack.min()) >= -tol,
              "complementary_slackness": float(np.abs(tight).max()) <= tol}
    return result, checks, {}


def _wasserstein(ctx, inputs, options, tol):
    from .transport import wasserstein2

    mu = ctx.measure(inputs["measures"][0] if "measures" in inputs else inputs["measure"])
    if "measures" in inputs and len(inputs["measures"]) > 1:
        nu = ctx.measure(inputs["measures"][1])
    else:
        blocks = int(options.get("blocks", 2))
        nu = pushforward(mu, lambda p: block_cycle(p, 1, blocks=blocks))
    w = wasserstein2(mu, nu)
    back = wasserstein2(nu, mu)
    result = {"value": w}
    checks = {"nonnegative": w >= 0.0, "symmetric": abs(w - back) <= tol}
    return result, checks, {}


def _involution_search(ctx, inputs, options, tol):
    from .involution import best_involution

    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    fields = ctx.fields(inputs, base)
    m = int(options.get("m", len(fields) + 1))
    res = best_involution(fields, m, mode=options.get("mode", "exhaustive"),
                          n_restarts=int(options.get("n_restarts", 50)),
                          random_state=int(ctx.rng.integers(0, 2 ** 63)))
    result = {"involution": res.S.perm, "cycles": [list(c) for c in res.S.cycles()],
              "objective": res.objective, "lp_bound": res.lp_bound,
              "certificate_gap": res.certificate_gap, "mode": res.mode,
              "message": res.message}
    checks = {
        "is_m_involution": bool(np.array_equal(res.S.power(m), np.arange(res.S.n))),
        "lp_bound_dominates": res.objective <= res.lp_bound + tol,
        "attained": res.certificate_gap <= tol,
    }
    return result, checks, {}


def _polar_brenier(ctx, inputs, options, tol):
    from .involution import polar_brenier

    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    (u,) = ctx.fields(inputs, base)
    res = polar_brenier(u)
    n = u.size
    tau, S = res.assignment, res.S.perm
    graph = GraphSample(u.base.points, u.values[tau])
    cyclic = {}
    for m in range(2, int(options.get("max_m", 4)) + 1):
        if n ** m <= DENSE_CAP:
            chk = is_m_cyclically_monotone(graph, m, mode="exhaustive")
        else:
            chk = is_m_cyclically_monotone(graph, m, mode="random",
                                           trials=int(options.get("trials", 20_000)),
                                           random_state=int(ctx.rng.integers(0, 2 ** 63)))
        cyclic[str(m)] = {"holds": chk.holds, "worst_cycle": chk.worst, "value": chk.worst_value}
    result = {"S": S, "T": tau, "objective": res.objective, "lp_bound": res.lp_bound,
              "certificate_gap": res.certificate_gap, "potential": res.potentials[0],
              "cyclic_monotonicity": cyclic}
    checks = {
        "round_trip": bool(np.array_equal(tau[S], np.arange(n))
                           and np.array_equal(u.values[tau][S], u.values)),
        "cyclically_monotone": all(v["holds"] for v in cyclic.values()),
        "certificate": abs(res.certificate_gap) <= tol,
    }
    return result, checks, {}


def _polar_hamiltonian(ctx, inputs, options, tol):
    from .involution import polar_hamiltonian

    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    fields = ctx.fields(inputs, base)
    rep = polar_hamiltonian(fields, mode=options.get("mode", "auto"),
                            random_state=int(ctx.rng.integers(0, 2 ** 63)))
    result = {"involution": rep.polar.S.perm, "objective": rep.polar.objective,
              "lp_bound": rep.polar.lp_bound, "certificate_gap": rep.polar.certificate_gap,
              "residuals": rep.residuals, "max_residual": rep.max_residual,
              "potential": rep.potentials.potentials[0]}
    checks = {"represented": rep.max_residual <= tol,
              "lp_bound_dominates": rep.polar.objective <= rep.polar.lp_bound + tol}
    return result, checks, {}


def _check_monotone(ctx, inputs, options, tol):
    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    (u,) = ctx.fields(inputs, base)
    rep = monotone_equivalence_report(u)
    result = {"monotone": rep.monotone, "involution_sup_zero": rep.involution_sup_zero,
              "identity_projection": rep.identity_projection, "lp_diagonal": rep.lp_diagonal,
              "involution_sup": rep.involution_sup, "lp_value": rep.lp_value,
              "diagonal_value": rep.diagonal_value, "worst_pair": rep.worst_pair,
              "all_four_equivalent": rep.all_equivalent}
    return result, {"all_four_equivalent": rep.all_equivalent}, {}


def _check_cyclic(ctx, inputs, options, tol):
    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    (u,) = ctx.fields(inputs, base)
    ms = options.get("m", [2, 3])
    ms = [int(ms)] if np.isscalar(ms) else [int(m) for m in ms]
    mode = options.get("mode", "exhaustive")
    per_m = {}
    for m in ms:
        chk = is_m_cyclically_monotone(u, m, mode=mode, trials=int(options.get("trials", 10_000)),
                                       random_state=int(ctx.rng.integers(0, 2 ** 63)))
        per_m[m] = chk
    mono = is_monotone(u)
    downward = all(not (not per_m[a].holds and b % a == 0 and per_m[b].holds)
                   for a in ms for b in ms)
    implies = all(mono.holds for c in per_m.values() if c.holds) if mode == "exhaustive" else True
    result = {"cyclic": {str(m): {"holds": c.holds, "worst_cycle": c.worst, "value": c.worst_value}
                         for m, c in per_m.items()},
              "monotone": mono.holds}
    checks = {"downward_consistent": downward, "implies_monotone": implies}
    return result, checks, {}


def _fitzpatrick(ctx, inputs, options, tol):
    base = ctx.measure(inputs["measure"]) if "measure" in inputs else None
    (u,) = ctx.fields(inputs, base)
    sample = GraphSample.from_field(u)
    p_axes = [_axis(a) for a in options["p_axes"]]
    x_axes = [_axis(a) for a in options["x_axes"]]
    N = fitzpatrick_grid(sample, p_axes, x_axes)
    on_graph = np.asarray(fitzpatrick(sample, sample.values, sample.points)).ravel()
    pairing = np.sum(sample.points * sample.values, axis=1)
    mono = is_monotone(sample).holds
    result = {"grid_tolerance": N.tolerance, "monotone": mono,
              "graph_excess": float(np.max(on_graph - pairing)),
              "fitzpatrick_converse": CONVERSE_NOTE}
    checks = {"fitzpatrick_inequality": bool(np.all(on_graph >= pairing - 1e-10))}
    if mono:
        checks["graph_equality"] = bool(np.max(np.abs(on_graph - pairing)) <= 1e-10)
    artifacts = {"grids": {"N": N}}
    if options.get("reference") == "identity" and sample.dim == 1:
        P, X = np.meshgrid(p_axes[0], x_axes[0], indexing="ij")
        lo, hi = sample.points.min(), sample.points.max()
        attained = ((P + X) / 2 >= lo) & ((P + X) / 2 <= hi)
        err = float(np.max(np.abs(N.values - (P + X) ** 2 / 4)[attained]))
        result["closed_form_error"] = err
        checks["closed_form"] = err <= N.tolerance
    if options.get("interpolate", False):
        Ns = legendre_conjugate(N)
        L = selfdual_interpolation(N, Ns)
        viol = sandwich_violation(N, L, Ns)
        gtol = max(N.tolerance, Ns.tolerance)
        result["sandwich_violation"] = viol
        result["sandwich_tolerance"] = gtol
        checks["sandwich"] = viol <= gtol
        artifacts["grids"].update({"Nstar": Ns, "L": L})
    return result, checks, artifacts


def _legendre(ctx, inputs, options, tol):
    L = ctx.grid(inputs["grid"])
    axes = options.get("transform_axes", [L.ndim - 1])
    dual = options.get("dual_axes")
    dual = None if dual is None else [_axis(a) for a in dual]
    K = partial_legendre(L, axes, dual)
    result = {"grid_tolerance": K.tolerance, "shape": list(K.shape)}
    checks = {}
    grids = {"K": K}
    if options.get("double", True) and dual is None:
        KK = partial_legendre(K, axes)
        excess = float(np.max(KK.values - L.values))
        result["double_transform_excess"] = excess
        checks["double_transform_below"] = excess <= max(L.tolerance, 1e-12)
    if options.get("antisymmetrize", False):
        H = antisymmetrize(K)
        d = H.ndim // 2
        Ht = np.transpose(H.values, list(range(d, H.ndim)) + list(range(d)))
        checks["antisymmetric"] = bool(np.all(H.values + Ht == 0.0))
        grids["H"] = H
    return result, checks, {"grids": grids}


def _reduction_check(ctx, inputs, options, tol):
    from .acceptance import _random_admissible_plan

    base = ctx.measure(inputs["measure"])
    u1, u2 = ctx.fields(inputs, base)
    n = base.size
    worst = 0.0
    count = int(options.get("n_plans", 100))
    for _ in range(count):
        worst = max(worst, reduction_identity_residual(u1, u2, _random_admissible_plan(ctx.rng, n)))
    C, D, const = reduction_identity_terms(u1, u2, _random_admissible_plan(ctx.rng, n))
    limit = float(options.get("identity_tol", IDENTITY_TOL))
    result = {"max_residual": worst, "plans": count, "example": {"C": C, "D": D, "const": const},
              "identity_tolerance": limit}
    return result, {"identity": worst <= limit}, {}


def _barycenter(ctx, inputs, options, tol):
    from .transport import solve_mm, wasserstein2
    from .measures import symmetrize_plan

    mu = ctx.measure(inputs["measure"])
    m = int(options.get("blocks", 3))
    supports = [block_cycle(mu.points, k, blocks=m) for k in range(m)]
    marg = [DiscreteMeasure(s, mu.weights) for s in supports]
    res = solve_mm(quadratic_cost(supports), marg, sense="min")
    nu = barycenter_measure(symmetrize_plan(res.plan), supports)
    snu = pushforward(nu, lambda p: block_cycle(p, 1, blocks=m))
    w = wasserstein2(nu, snu)
    raw = barycenter_measure(res.plan, supports)
    probe = barycenter_optimality_probe(nu, marg, [raw, mu])
    result = {"barycenter": measure_to_dict(nu), "w2_to_shifted": w, "probe": probe,
              "gap": res.gap}
    checks = {"sigma_invariant": w <= 1e-10, "strong_duality": res.gap <= tol,
              "not_beaten": not probe["beaten"]}
    return result, checks, {}


def _acceptance(ctx, inputs, options, tol):
    from .acceptance import run_criterion

    res = run_criterion(int(options["criterion"]), seed=options.get("seed"))
    return res.to_dict(), {"criterion": res.passed}, {}


HANDLERS = {
    "solve-mm": _solve_mm,
    "solve-sym": _solve_sym,
    "assign": _assign,
    "wasserstein": _wasserstein,
    "involution-search": _involution_search,
    "polar-brenier": _polar_brenier,
    "polar-hamiltonian": _polar_hamiltonian,
    "check-monotone": _check_monotone,
    "check-cyclic": _check_cyclic,
    "fitzpatrick": _fitzpatrick,
    "legendre": _legendre,
    "reduction-check": _reduction_check,
    "barycenter": _barycenter,
    "acceptance": _acceptance,
}


def _lookup(result, path):
    cur = result
    for key in str(path).split("."):
        if isinstance(cur, list):
            cur = cur[int(key)]
        else:
            cur = cur[key]
    return cur


def _evaluate(expect, checks, result, tol):
    out = []
    for item in expect:
        if isinstance(item, str):
            if item not in checks:
                out.append({"expect": item, "passed": False, "reason": "unknown check"})
            else:
                out.append({"expect": item, "passed": bool(checks[item])})
            continue
        path = item.get("path")
        try:
            got = _lookup(result, path)
        except (KeyError, IndexError, ValueError, TypeError):
            out.append({"expect": path, "passed": False, "reason": "missing result value"})
            continue
        want = item.get("equals")
        t = float(item.get("tol", tol))
        a, b = np.asarray(got), np.asarray(want)
        if a.dtype.kind in "biuf" and b.dtype.kind in "biuf":
            ok = a.shape == b.shape and bool(np.all(np.abs(a.astype(float) - b.astype(float)) <= t))
        else:
            ok = got == want
        out.append({"expect": path, "passed": ok, "got": got, "want": want})
    return out


def load_config(path):
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict) or "command" not in data:
        raise InputError(path, "scenario config needs a 'command'")
    if data["command"] not in HANDLERS:
        raise InputError(path, f"unknown command {data['command']!r}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < SEED_LIMIT:
        raise InputError(path, "seed must be a 64-bit unsigned integer")
    return data


def run_scenario(config_path, out_dir=None, tol=DEFAULT_TOL, command=None):
    """Run one scenario; returns ``(exit_code, report)`` and writes the report files."""
    config_path = Path(config_path)
    try:
        config = load_config(config_path)
        if command is not None and command != config["command"]:
            raise InputError(config_path, f"config is for {config['command']!r}, not {command!r}")
        name = config.get("name", config_path.stem)
        ctx = _Context(config_path.parent, config.get("seed", 0))
        handler = HANDLERS[config["command"]]
        try:
            result, checks, artifacts = handler(ctx, config.get("inputs", {}),
                                                config.get("options", {}), tol)
        except InputError:
            raise
        except (TransportError, KeyError, TypeError, ValueError) as exc:
            raise InputError(config_path, f"{type(exc).__name__}: {exc}") from None
    except InputError as exc:
        return EXIT_INPUT, {"error": str(exc), "file": exc.path}

    expect = config.get("expect", sorted(checks))
    outcomes = _evaluate(expect, checks, to_jsonable(result), tol)
    passed = all(o["passed"] for o in outcomes)
    report = {
        "scenario": name,
        "command": config["command"],
        "version": __version__,
        "config_sha256": hashlib.sha256(config_path.read_bytes()).hexdigest(),
        "seed": config.get("seed", 0),
        "tolerances": {"report": tol, "monotone": 1e-10, "identity": IDENTITY_TOL},
        "result": result,
        "checks": checks,
        "expectations": outcomes,
        "failures": [o["expect"] for o in outcomes if not o["passed"]],
        "passed": passed,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / f"{name}.report.json", report)
        plan = artifacts.get("plan")
        if plan is not None and config.get("options", {}).get("write_plan", False):
            write_plan_csv(out / f"{name}.plan.csv", plan)
        for key, g in artifacts.get("grids", {}).items():
            if config.get("options", {}).get("write_grids", False):
                write_json(out / f"{name}.{key}.grid.json", grid_to_dict(g))
        if plan is not None and config.get("options", {}).get("write_plan_json", False):
            write_json(out / f"{name}.plan.json", plan_to_dict(plan))
    return (EXIT_OK if passed else EXIT_FAIL), to_jsonable(report)


def _run_one(args):
    path, out_dir, tol = args
    code, report = run_scenario(path, out_dir, tol)
    return str(path), code, report


def regression_suite(path, out_dir=None, tol=DEFAULT_TOL, workers=1):
    """Run every ``*.json`` scenario config in ``path`` (sorted by file name).

    Returns ``(exit_code, summary)``: 0 when all pass, 1 when any check
    fails, 2 when any input is unreadable.
    """
    path = Path(path)
    if not path.is_dir():
        return EXIT_INPUT, {"error": f"{path}: not a directory", "scenarios": 0}
    configs = sorted(path.glob("*.json"))
    jobs = [(c, out_dir, tol) for c in configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    status = {0: "pass", 1: "fail", 2: "error"}
    results = {Path(p).stem: {"status": status[code],
                              "failures": rep.get("failures", []),
                              "error": rep.get("error")} for p, code, rep in runs}
    codes = [code for _, code, _ in runs]
    summary = {"scenarios": len(runs), "passed": codes.count(0), "failed": codes.count(1),
               "errors": codes.count(2), "results": results, "version": __version__}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_json(Path(out_dir) / "summary.json", summary)
    code = EXIT_INPUT if EXIT_INPUT in codes else (EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK)
    return code, summary


def bundled_scenarios():
    """Directory of the desk-scale scenarios shipped with the package."""
    return Path(__file__).parent / "scenarios"


def _parser():
    parser = argparse.ArgumentParser(prog="symtransport",
                                     description="Run symmetric optimal transport scenarios.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(HANDLERS) + ["run"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="directory for report files")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="report tolerance")
        p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("regress", help="run every scenario in a directory")
    p.add_argument("path", nargs="?", default=None,
                   help="scenario directory (default: bundled suite)")
    p.add_argument("--out", default=None)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "regress":
        path = args.path if args.path is not None else bundled_scenarios()
        code, summary = regression_suite(path, args.out, args.tol, args.workers)
        for name, r in summary.get("results", {}).items():
            line = f"{r['status']:5s} {name}"
            if r["failures"]:
                line += "  failed: " + ", ".join(map(str, r["failures"]))
            if r["error"]:
                line += "  " + r["error"]
            print(line)
        if "error" in summary:
            print(summary["error"], file=sys.stderr)
        print(f"{summary['scenarios']} scenarios: {summary.get('passed', 0)} passed, "
              f"{summary.get('failed', 0)} failed, {summary.get('errors', 0)} errors")
        return code
    command = None if args.command == "run" else args.command
    code, report = run_scenario(args.config, args.out, args.tol, command)
    if code == EXIT_INPUT:
        print(f"input error: {report['error']}", file=sys.stderr)
    elif code == EXIT_FAIL:
        print(f"{report['scenario']}: failed checks: {', '.join(map(str, report['failures']))}",
              file=sys.stderr)
    else:
        print(f"{report['scenario']}: all checks passed")
    return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
