import csv
import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from tokenwealth.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

TWO_CATEGORIES = {
    "taxonomy": {"categories": [{"id": "cm", "kind": "ControlMechanism"}, {"id": "h"}],
                 "rotations": [{"from": "h", "to": "cm"}]},
    "initial_wealth": [60.0, 40.0],
    "supply": {"variant": "constant", "M_initial": 100.0},
    "horizon": 5,
}


def write(tmp_path, raw, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw) if not isinstance(raw, str) else raw)
    return str(p)


def run(command, scenario, out, *extra):
    return main([command, "--scenario", scenario, "--out", str(out), *extra])


def check_manifest(out):
    manifest = json.loads((out / "manifest.json").read_text())
    paths = [f["path"] for f in manifest["files"]]
    assert len(paths) == len(set(paths))
    assert set(paths) == {p.name for p in out.iterdir()} - {"manifest.json"}
    for f in manifest["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    return manifest


def test_check(tmp_path):
    assert run("check", str(SCENARIOS / "macro_static.json"), tmp_path) == 0
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["valid"] and report["categories"] == ["treasury", "users", "validators", "burned"]
    check_manifest(tmp_path)


def test_simulate(tmp_path):
    assert run("simulate", str(SCENARIOS / "macro_dynamic.json"), tmp_path, "--ensemble", "2") == 0
    manifest = check_manifest(tmp_path)
    assert [r["index"] for r in manifest["runs"]] == [0, 1]
    assert json.loads((tmp_path / "symmetry_report.json").read_text())["passed"]
    with open(tmp_path / "trajectory_001.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["step", "t", "M"]
    values = np.array(rows[1:], dtype=float)
    assert np.allclose(values[:, 3:].sum(axis=1), values[:, 2], rtol=1e-9)


def test_zero_rates_keep_wealth_constant(tmp_path):
    raw = {**TWO_CATEGORIES, "rates": {"rotation": [{"from": "h", "to": "cm", "source": 0.0}]}}
    assert run("simulate", write(tmp_path, raw), tmp_path / "out") == 0
    with open(tmp_path / "out" / "trajectory_000.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert len(rows) == 6 and all(r[3:] == ["60.0", "40.0"] for r in rows)


def test_kinetic(tmp_path):
    raw = json.loads((SCENARIOS / "kinetic_global_saving.json").read_text())
    raw["kinetic"].update(agents=50, steps=20000, snapshot_every=5000)
    raw["kinetic"].pop("equilibrium_window", None)
    assert run("kinetic", write(tmp_path, raw), tmp_path / "out", "--ensemble", "2") == 0
    out = tmp_path / "out"
    check_manifest(out)
    report = json.loads((out / "fit_report.json").read_text())
    assert report["pooled_final"]["samples"] == 100
    assert "prediction" in report["pooled_final"] and "shape" in report["pooled_final"]["gamma"]
    with open(out / "snapshots_000.csv") as fh:
        rows = list(csv.reader(fh))
    assert [int(r[0]) for r in rows[1:]] == [0, 5000, 10000, 15000, 20000]
    assert np.isclose(np.array(rows[-1][1:], dtype=float).sum(), raw["kinetic"]["total_wealth"], rtol=1e-12)


def test_kinetic_not_converged_exits_4(tmp_path):
    raw = {"kinetic": {"model": "min_investment", "agents": 100, "total_wealth": 100.0, "steps": 20000,
                       "snapshot_every": 1000, "equilibrium_window": 5, "equilibrium_tol": 1e-6}, "seed": 1}
    assert run("kinetic", write(tmp_path, raw), tmp_path / "out") == 4
    report = json.loads((tmp_path / "out" / "fit_report.json").read_text())
    assert report["runs"][0]["equilibrium_step"] is None
    check_manifest(tmp_path / "out")


def test_invert(tmp_path):
    assert run("invert", str(SCENARIOS / "invert.json"), tmp_path / "inv") == 0
    check_manifest(tmp_path / "inv")
    patch = json.loads((tmp_path / "inv" / "patch.json").read_text())
    verification = json.loads((tmp_path / "inv" / "verification.json").read_text())
    assert verification["solution"]["converged"]

    # simulating from the target under the patched rates stays at the target
    raw = json.loads((SCENARIOS / "invert.json").read_text())
    raw.update(patch, initial_wealth=raw["inverse"]["target"])
    del raw["inverse"]
    assert run("simulate", write(tmp_path, raw, "patched.json"), tmp_path / "sim") == 0
    final = json.loads((tmp_path / "sim" / "summary.json").read_text())["final_wealth"][0]
    for k, v in raw["initial_wealth"].items():
        assert final[k] == pytest.approx(v, rel=1e-8)


def test_invert_not_converged_exits_4(tmp_path):
    raw = json.loads((SCENARIOS / "invert.json").read_text())
    raw["inverse"]["target"] = {"treasury": 100.0, "users": 100.0, "validators": 800.0}
    raw["inverse"]["free"] = {"gamma": [["validators", "treasury"], ["users", "treasury"]]}
    assert run("invert", write(tmp_path, raw), tmp_path / "out") == 4
    assert not json.loads((tmp_path / "out" / "verification.json").read_text())["solution"]["converged"]


@pytest.mark.parametrize("raw, code, reason", [
    ({**TWO_CATEGORIES, "initial_wealth": [59.0, 40.0]}, "ValidationError", "conservation"),
    ({**TWO_CATEGORIES, "supply": {"variant": "compound", "M_initial": 100.0, "r": 2.0}},
     "ValidationError", "RateOutOfRange"),
    ('{"horizon": ', "ScenarioSyntaxError", None),
])
def test_invalid_input_exits_2(tmp_path, raw, code, reason):
    assert run("simulate", write(tmp_path, raw), tmp_path / "out") == 2
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["code"].endswith(code)
    if reason:
        assert reason in json.dumps(err)
    assert not (tmp_path / "out" / "manifest.json").exists()


def test_missing_block_exits_2(tmp_path):
    assert run("kinetic", write(tmp_path, TWO_CATEGORIES), tmp_path / "out") == 2
    assert run("invert", write(tmp_path, TWO_CATEGORIES), tmp_path / "out2") == 2


def test_runtime_failure_exits_3(tmp_path):
    raw = {**TWO_CATEGORIES, "rates": {"rotation": [{"from": "h", "to": "cm", "source": 2.0}]}}
    assert run("simulate", write(tmp_path, raw), tmp_path / "out") == 3
    assert "NegativeWealth" in json.loads((tmp_path / "out" / "error.json").read_text())["code"]


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    scenario = str(SCENARIOS / "macro_dynamic.json")
    monkeypatch.setenv("DETECT_THREADS", "1")
    assert run("simulate", scenario, tmp_path / "one") == 0
    monkeypatch.setenv("DETECT_THREADS", "3")
    assert run("simulate", scenario, tmp_path / "three") == 0
    for f in (tmp_path / "one").iterdir():
        assert f.read_bytes() == (tmp_path / "three" / f.name).read_bytes()


def test_seed_override_changes_stochastic_output(tmp_path):
    scenario = str(SCENARIOS / "macro_dynamic.json")
    run("simulate", scenario, tmp_path / "a", "--seed", "1", "--ensemble", "1")
    run("simulate", scenario, tmp_path / "b", "--seed", "2", "--ensemble", "1")
    a = (tmp_path / "a" / "trajectory_000.csv").read_bytes()
    assert a != (tmp_path / "b" / "trajectory_000.csv").read_bytes()
    shutil.rmtree(tmp_path / "b")
    run("simulate", scenario, tmp_path / "b", "--seed", "1", "--ensemble", "1")
    assert a == (tmp_path / "b" / "trajectory_000.csv").read_bytes()
