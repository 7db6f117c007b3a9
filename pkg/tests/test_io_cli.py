import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from symtransport import io
from symtransport.cli import bundled_scenarios, main, regression_suite, run_scenario
from symtransport.costs import SampledVectorField
from symtransport.measures import CouplingPlan, DiscreteMeasure
from symtransport.monotone import GridFunction

BUNDLED = bundled_scenarios()
SCENARIOS = sorted(p.stem for p in BUNDLED.glob("*.json"))


@pytest.fixture
def suite_copy(tmp_path):
    dst = tmp_path / "scenarios"
    shutil.copytree(BUNDLED, dst)
    return dst


def test_measure_round_trip(tmp_path, rng):
    mu = DiscreteMeasure(rng.normal(size=(4, 3)), [0.1, 0.2, 0.3, 0.4])
    io.save_measure(tmp_path / "m.json", mu)
    back = io.load_measure(tmp_path / "m.json")
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.weights, mu.weights)


def test_plan_round_trip(rng):
    mass = rng.uniform(size=(2, 3, 2))
    mass[0, 1, 1] = 0.0
    plan = CouplingPlan(mass / mass.sum())
    back = io.plan_from_dict(json.loads(io.dumps(io.plan_to_dict(plan))))
    assert np.array_equal(back.mass, plan.mass)


def test_field_round_trip_with_relative_measure(tmp_path):
    mu = DiscreteMeasure.uniform([[0.0, 1.0], [2.0, 3.0]])
    io.save_measure(tmp_path / "base.json", mu)
    (tmp_path / "f.json").write_text(json.dumps({"measure": "base.json", "values": [[1, 0], [0, 1]]}))
    u = io.load_field(tmp_path / "f.json")
    assert isinstance(u, SampledVectorField)
    assert np.array_equal(u.values, np.eye(2))
    io.save_field(tmp_path / "g.json", u)
    assert np.array_equal(io.load_field(tmp_path / "g.json").base.points, mu.points)


def test_grid_round_trip(tmp_path):
    g = GridFunction([[0.0, 1.0], [0.0, 0.5, 1.0]], np.arange(6.0).reshape(2, 3))
    io.save_grid(tmp_path / "g.json", g)
    back = io.load_grid(tmp_path / "g.json")
    assert back.same_grid(g) and np.array_equal(back.values, g.values)


def test_plan_csv(tmp_path):
    plan = CouplingPlan(np.diag([0.25, 0.75]))
    io.write_plan_csv(tmp_path / "p.csv", plan)
    assert (tmp_path / "p.csv").read_text() == "i0,i1,mass\n0,0,0.25\n1,1,0.75\n"


def test_bad_inputs_name_the_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(io.InputError) as err:
        io.load_measure(bad)
    assert err.value.path == str(bad)
    bad.write_text(json.dumps({"points": [[0.0]]}))
    with pytest.raises(io.InputError, match="weights"):
        io.load_measure(bad)
    with pytest.raises(io.InputError, match="not found"):
        io.load_measure(tmp_path / "missing.json")


def test_check_monotone_identity(tmp_path):
    code, report = run_scenario(BUNDLED / "check_monotone_identity.json", tmp_path)
    assert code == 0
    assert report["result"]["all_four_equivalent"] is True
    assert (tmp_path / "check_monotone_identity.report.json").exists()


def test_solve_sym_negative_identity(tmp_path):
    code, report = run_scenario(BUNDLED / "solve_sym_two_atoms.json", tmp_path)
    assert code == 0
    assert report["result"]["value"] == pytest.approx(1.0)
    assert report["result"]["involution"] == [1, 0]
    rows = (tmp_path / "solve_sym_two_atoms.plan.csv").read_text().splitlines()
    assert rows == ["i0,i1,mass", "0,1,0.5", "1,0,0.5"]


def test_reduction_check_random(tmp_path):
    code, report = run_scenario(BUNDLED / "reduction_check_random.json", tmp_path)
    assert code == 0
    assert report["result"]["max_residual"] <= 1e-9


def test_report_metadata():
    code, report = run_scenario(BUNDLED / "solve_sym_two_atoms.json")
    for key in ("version", "config_sha256", "tolerances", "seed"):
        assert key in report
    assert report["tolerances"]["report"] == 1e-8


def test_tol_flag_is_recorded(tmp_path, capsys):
    code = main(["check-monotone", "--config", str(BUNDLED / "check_monotone_identity.json"),
                 "--out", str(tmp_path), "--tol", "1e-6"])
    assert code == 0
    report = json.loads((tmp_path / "check_monotone_identity.report.json").read_text())
    assert report["tolerances"]["report"] == 1e-6
    assert "all checks passed" in capsys.readouterr().out


def test_command_must_match_config(capsys):
    code = main(["solve-mm", "--config", str(BUNDLED / "check_monotone_identity.json")])
    assert code == 2
    assert "check-monotone" in capsys.readouterr().err


def test_failed_expectation_exits_one(tmp_path, capsys):
    cfg = json.loads((BUNDLED / "solve_sym_two_atoms.json").read_text())
    cfg["expect"] = [{"path": "value", "equals": 2.0}]
    cfg["inputs"] = {"measure": str(BUNDLED / "data/two_atoms.json"),
                     "fields": [str(BUNDLED / "data/neg_identity_two_atoms.json")]}
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path)]) == 1
    assert "value" in capsys.readouterr().err


def test_bad_seed(tmp_path):
    cfg = json.loads((BUNDLED / "check_monotone_identity.json").read_text())
    cfg["seed"] = -1
    path = tmp_path / "s.json"
    path.write_text(json.dumps(cfg))
    code, report = run_scenario(path)
    assert code == 2 and "seed" in report["error"]


def test_corrupted_measure_exits_two_naming_file(suite_copy, capsys):
    bad = suite_copy / "data" / "two_atoms.json"
    bad.write_text('{"points": [[-1.0], [1.0]], "weights": [0.5,')
    code = main(["regress", str(suite_copy)])
    out = capsys.readouterr().out
    assert code == 2
    assert "two_atoms.json" in out
    line = next(l for l in out.splitlines() if "solve_sym_two_atoms" in l)
    assert line.startswith("error")


def test_empty_directory(tmp_path, capsys):
    code, summary = regression_suite(tmp_path)
    assert code == 0 and summary["scenarios"] == 0
    assert main(["regress", str(tmp_path)]) == 0


def test_not_a_directory(tmp_path):
    code, _ = regression_suite(tmp_path / "nope")
    assert code == 2


def test_reports_are_byte_identical(tmp_path):
    names = ["reduction_check_random", "solve_mm_random_three", "involution_search_local"]
    src = tmp_path / "src"
    src.mkdir()
    shutil.copytree(BUNDLED / "data", src / "data")
    for n in names:
        shutil.copy(BUNDLED / f"{n}.json", src)
    regression_suite(src, tmp_path / "a")
    regression_suite(src, tmp_path / "b", workers=3)
    for n in names:
        a = (tmp_path / "a" / f"{n}.report.json").read_bytes()
        b = (tmp_path / "b" / f"{n}.report.json").read_bytes()
        assert a == b
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenario(name, tmp_path):
    code, report = run_scenario(BUNDLED / f"{name}.json", tmp_path)
    assert code != 2, report.get("error")
    assert code == 0, f"{name} failed: {report['failures']}"


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "symtransport.cli", "check-monotone", "--config",
         str(BUNDLED / "check_monotone_identity.json"), "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
