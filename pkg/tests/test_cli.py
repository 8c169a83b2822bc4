import json
import subprocess
import sys

import pytest

from fairguard.cli import main


def run(*args):
    return main([str(a) for a in args])


def test_experiment_reports_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run("experiment", "--solver", "err-tol-plus", "--eta", 0.05, "--trials", 1, "--seed", 7, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["config"]["seed"] == 7 and rep["trials"][0]["test"]["accuracy"] >= 0.97


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FAIRGUARD_SEED", "11")
    assert run("experiment", "--solver", "uncons", "--out", tmp_path / "e.json") == 0
    assert json.loads((tmp_path / "e.json").read_text())["config"]["seed"] == 11


def test_gen_perturb_train_evaluate(tmp_path):
    data, pert, rec = tmp_path / "d.csv", tmp_path / "p.csv", tmp_path / "rec.json"
    model, ev = tmp_path / "m.json", tmp_path / "ev.json"
    assert run("gen-data", "--n", 400, "--seed", 1, "--out", data) == 0
    assert run("perturb", "--data", data, "--adversary", "tn", "--eta", 0.05, "--out", pert, "--record", rec) == 0
    r = json.loads(rec.read_text())["record"]
    assert r["n_flipped"] <= 20 and len(r["flip_mask"]) == 400
    assert run("train", "--data", pert, "--solver", "reduced", "--out", model) == 0
    m = json.loads(model.read_text())
    assert "box" in m["solver_info"] and m["params"][0]["eta"] == 0.05
    assert run("evaluate", "--data", data, "--model", model, "--metric", "sr", "--metric", "tpr", "--out", ev) == 0
    e = json.loads(ev.read_text())
    assert e["n"] == 400 and set(e) >= {"accuracy", "sr", "tpr"}


def test_general_solver_two_metrics(tmp_path):
    out = tmp_path / "g.json"
    assert run("experiment", "--solver", "general", "--metric", "sr", "--metric", "fpr",
               "--lambda", 0.05, "--eta", 0.0, "--out", out) == 0
    assert set(json.loads(out.read_text())["aggregate"]) >= {"sr", "fpr"}


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--solver", "uncons", "--taus", "0.8,0.9", "--out", out) == 0
    assert len(out.read_text().splitlines()) == 3


def test_errors_exit_two(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "missing.csv") == 2
    assert run("experiment", "--solver", "err-tol", "--metric", "fpr") == 2
    assert "lambda" in capsys.readouterr().err


def _verify(tmp_path, params=None):
    argv = ["verify-theory", "--skip-monte-carlo", "--out", tmp_path / "v.json"]
    if params is not None:
        (tmp_path / "p.json").write_text(json.dumps(params))
        argv += ["--params", tmp_path / "p.json"]
    code = run(*argv)
    return code, json.loads((tmp_path / "v.json").read_text())


def test_verify_theory_exit_code_tracks_checks(tmp_path, capsys):
    code, rep = _verify(tmp_path)
    assert code == (0 if rep["passed"] else 1)
    failing = {c["name"] for c in rep["checks"] if not c["passed"]}
    # the strict family-A witness bound is met only with equality
    assert failing == {"family_A_witness"}
    assert "no witness for" in capsys.readouterr().out


def test_verify_theory_corrupted_bounds(tmp_path, capsys):
    code, rep = _verify(tmp_path, {"family_A": {"err_bound": 1.1, "omega_bound": 0.0}})
    assert code == 1
    bad = next(c for c in rep["checks"] if c["name"] == "family_A_no_common_good")
    assert not bad["passed"] and bad["counterexamples"]
    assert "counterexample:" in capsys.readouterr().out


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "fairguard.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
