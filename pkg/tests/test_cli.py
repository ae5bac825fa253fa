import json
import math
import time

import pytest

from hidden_dynamics.cli import main
from hidden_dynamics.scenarios import SCENARIOS, scenario_dict


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_example_reg_csv(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = run(["simulate", "--scenario", "example-reg", "--output", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,x2,lambda,mode,branch"
    t, x1, x2, lam, mode, branch = lines[-1].split(",")
    assert float(t) == 2.0 and mode == "slide" and branch == "0"
    assert float(x2) == pytest.approx(0.5 + 1.5 * (-1 + 3 / math.sqrt(2)) / 2, abs=1e-9)
    events = json.loads((tmp_path / "traj.csv.events.json").read_text())
    assert [e["kind"] for e in events] == ["hit_sigma", "begin_slide"]


def test_simulate_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run(["simulate", "--scenario", "example-fil", "--output", str(p)], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_simulate_flags(capsys):
    code, out, _ = run(["simulate", "--scenario", "example-reg", "--x0", "-0.25,0", "--t-end", "1",
                        "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["samples"][-1]["t"] == 1.0 and doc["events"][0]["t"] == pytest.approx(0.25)
    code, out, _ = run(["simulate", "--scenario", "example-reg", "--x0", "0,0", "--initial-lambda", "0.7071067811865476",
                        "--t-end", "1"], capsys)
    assert code == 0 and out.splitlines()[-1].split(",")[3].startswith("0.70710678")


def test_simulate_regularized(capsys):
    code, out, _ = run(["simulate", "--scenario", "example-reg", "--delta", "0.01"], capsys)
    assert code == 0
    last = out.splitlines()[-1].split(",")
    assert last[-2] == "smooth"
    assert float(last[2]) == pytest.approx(1.3409902577, abs=5e-3)


def test_analyze_example_fil(capsys):
    code, out, _ = run(["analyze", "--scenario", "example-fil"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["region"] == "nonlinear_sliding" and doc["linear_region"] == "linear_crossing"
    assert [r["lambda"] for r in doc["roots"]] == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)], abs=1e-10)
    assert doc["roots"][1]["sliding_field"][1] == pytest.approx(0.5606601718, abs=1e-9)


def test_analyze_off_manifold_point(capsys):
    assert run(["analyze", "--scenario", "example-fil", "--point", "0.5,0"], capsys)[0] == 2


def test_regularize_with_psi(capsys):
    code, out, _ = run(["regularize", "--scenario", "example-fil", "--psi", "nonmono_sine"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["regularization"] == {"kind": "phi", "transition": "poly_c1", "delta": 0.1}
    assert doc["psi"]["identity_error"] <= 1e-12


def test_regularize_non_monotonic_phi(capsys):
    code, _, err = run(["regularize", "--scenario", "example-fil", "--transition", "nonmono_sine"], capsys)
    assert code == 2 and "monotonic" in err


def test_exported_regularization_runs_as_config(tmp_path, capsys):
    code, out, _ = run(["regularize", "--scenario", "example-reg", "--delta", "0.05"], capsys)
    assert code == 0
    doc = json.loads(out)
    cfg = {"name": "exported", "smooth": doc["smooth"], "run": {"x0": [-0.5, 0.0], "t_span": [0, 1]}}
    path = tmp_path / "reg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(["simulate", "--config", str(path)], capsys)
    assert code == 0 and out.splitlines()[-1].split(",")[-2] == "smooth"


def test_pinch_s2(capsys):
    code, out, _ = run(["pinch", "--scenario", "s2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["rationale"] == "case_b_quadratic"
    assert all(abs(r[0][0]) <= 1e-12 for r in doc["roots"])


def test_pinch_prototypes(capsys):
    code, out, _ = run(["pinch", "--scenario", "proto-thm6"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["roots"][0][0] == pytest.approx([-0.5, 0.5], abs=1e-12)
    assert doc["order"] >= 2.5


def test_pinch_hypothesis_failure(capsys):
    code, _, err = run(["pinch", "--scenario", "proto-thm6", "--mode", "intrinsic-single"], capsys)
    assert code == 4 and "hypothesis" in err


def test_sweep_delta_slow_manifold(capsys):
    code, out, _ = run(["sweep", "--scenario", "example-reg", "--param", "delta",
                        "--values", "0.01,0.005,0.0025"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["task"] == "slow-manifold"
    assert [r["value"] for r in doc["results"]] == [0.0025, 0.005, 0.01]
    metric = [r["metric"] for r in doc["results"]]
    assert metric[0] < metric[1] < metric[2]
    assert doc["fit"]["order"] == pytest.approx(1.0, abs=0.1)


def test_sweep_eps_proto6(capsys):
    code, out, _ = run(["sweep", "--scenario", "proto-thm6", "--param", "eps", "--values", "0.1,0.05,0.025"],
                       capsys)
    assert code == 0
    assert json.loads(out)["fit"]["order"] >= 2.5


def test_sweep_model_parameter_csv(capsys, monkeypatch):
    monkeypatch.setenv("HD_THREADS", "1")
    code, out, _ = run(["sweep", "--scenario", "hill-intrinsic", "--param", "b", "--values", "20,10",
                        "--task", "pinch", "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "value,metric,error"
    b10, b20 = (float(l.split(",")[1]) for l in lines[1:])
    assert b20 < b10 and b20 <= 4e-3


@pytest.mark.parametrize("argv", [
    ["sweep", "--scenario", "example-reg", "--param", "delta", "--values", ""],
    ["sweep", "--scenario", "example-reg", "--param", "nope", "--values", "1"],
    ["simulate"],
    ["simulate", "--scenario", "example-reg", "--config", "x.json"],
    ["simulate", "--scenario", "example-reg", "--x0", "1,2,3"],
    ["simulate", "--scenario", "no-such-scenario"],
    ["frobnicate"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_bad_config_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", "--config", str(bad)], capsys)[0] == 2
    raw = scenario_dict("example-reg")
    raw["system"]["f_plus"] = ["1", "2x"]
    bad.write_text(json.dumps(raw))
    code, _, err = run(["simulate", "--config", str(bad)], capsys)
    assert code == 2 and "implicit multiplication" in err
    raw = scenario_dict("example-reg")
    raw["extra"] = {}
    bad.write_text(json.dumps(raw))
    assert run(["simulate", "--config", str(bad)], capsys)[0] == 2
    assert run(["simulate", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    raw = scenario_dict("example-reg")
    raw["run"]["options"] = {"max_steps": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    assert run(["simulate", "--config", str(path)], capsys)[0] == 3


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_simulates_quickly(name, capsys):
    start = time.perf_counter()
    code, out, _ = run(["simulate", "--scenario", name], capsys)
    assert code == 0 and out.startswith("t,x1,x2,lambda,mode,branch")
    assert time.perf_counter() - start < 10.0
