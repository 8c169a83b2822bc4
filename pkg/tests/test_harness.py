import json

import numpy as np
import pytest

from fairguard.harness import ExperimentConfig, aggregate, run_experiment, sweep, trial_seed, write_sweep_csv


def test_trial_seeds_distinct_and_stable():
    seeds = [trial_seed(0, t) for t in range(50)]
    assert len(set(seeds)) == 50 and seeds == [trial_seed(0, t) for t in range(50)]


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(solver="sgd")
    with pytest.raises(ValueError):
        ExperimentConfig(adversary="gaussian")
    with pytest.raises(ValueError):
        ExperimentConfig(metrics=())
    with pytest.raises(ValueError):
        ExperimentConfig(solver_config={"restarts": 0})
    cfg = ExperimentConfig(solver="reduced", metrics=("sr", "tpr"))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_aggregate_recomputable():
    rows = [{"test": {"accuracy": a, "sr": s}, "feasible": f}
            for a, s, f in [(0.9, 0.8, True), (1.0, 0.7, True), (0.95, 0.9, False)]]
    agg = aggregate(rows, ("sr",))
    assert agg["accuracy"]["mean"] == pytest.approx(0.95)
    assert agg["sr"]["std"] == pytest.approx(np.std([0.8, 0.7, 0.9], ddof=1))
    assert agg["sr"]["stderr"] == pytest.approx(agg["sr"]["std"] / np.sqrt(3))
    assert agg["feasible_fraction"] == pytest.approx(2 / 3)


def test_report_contents(tmp_path):
    cfg = ExperimentConfig(solver="err-tol-plus", eta=0.05, trials=2, seed=3)
    rep = run_experiment(cfg, tmp_path / "r.json")
    assert len(rep["trials"]) == 2 and rep["config"]["seed"] == 3
    for row in rep["trials"]:
        assert {"test", "feasible", "seed", "flips", "params", "classifier"} <= set(row)
        assert row["flips"] <= int(np.ceil(0.05 * 700))
    timing = json.loads((tmp_path / "r.json.timing.json").read_text())
    assert len(timing["wall_time_s"]) == 2


def test_parallel_matches_serial():
    a = run_experiment(ExperimentConfig(solver="uncons", trials=3, jobs=1))
    b = run_experiment(ExperimentConfig(solver="uncons", trials=3, jobs=3))
    assert a["trials"] == b["trials"]


def test_partial_results_flushed(tmp_path):
    cfg = ExperimentConfig(solver="err-tol", metrics=("fpr",), trials=2)
    with pytest.raises(ValueError):
        run_experiment(cfg, tmp_path / "bad.json")
    rep = json.loads((tmp_path / "bad.json").read_text())
    assert "error" in rep and rep["trials"] == []


def test_every_adversary_runs():
    for adv, extra in [("none", {}), ("tn", {}), ("fn", {}), ("fp", {}), ("flip", {"rates": [0.05, 0.05]}),
                       ("prh", {}), ("nasty", {})]:
        rep = run_experiment(ExperimentConfig(adversary=adv, adversary_params=extra, solver="err-tol-plus"))
        assert 0.0 <= rep["aggregate"]["accuracy"]["mean"] <= 1.0


def test_coupling_on_family_data():
    cfg = ExperimentConfig(
        data={"kind": "family", "family": "A", "params": {}, "member": 1, "n": 2000},
        adversary="coupling", adversary_params={"target_member": 2}, eta=0.1, solver="uncons",
    )
    rep = run_experiment(cfg)
    assert rep["trials"][0]["flips"] < 0.1 * 1400


def test_sweep_tau_monotone(tmp_path):
    res = sweep(ExperimentConfig(solver="err-tol", trials=20), {"tau": [0.7, 0.8, 0.9, 1.0]})
    assert len(res) == 4
    sr = [rep["aggregate"]["sr"]["mean"] for _, rep in res]
    assert all(b >= a - 0.03 for a, b in zip(sr, sr[1:]))
    write_sweep_csv(res, ("sr",), tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 5


def test_sweep_group_fractions():
    grid = {"group_fraction": [0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75]}
    res = sweep(ExperimentConfig(solver="err-tol-plus", eta=0.05, trials=10, jobs=4), grid)
    for pt, rep in res:
        assert rep["aggregate"]["sr"]["mean"] >= 0.75, pt
        assert rep["aggregate"]["accuracy"]["mean"] >= 0.97, pt


def test_group_fraction_outside_assumption_raises():
    # the minority group's joint mass 0.15 * 0.4 equals eta + delta
    cfg = ExperimentConfig(data={"kind": "synthetic", "group_fractions": [0.85, 0.15]},
                           solver="err-tol-plus", eta=0.05, trials=1)
    with pytest.raises(ValueError, match="assumption violated"):
        run_experiment(cfg)


def test_empty_grid():
    with pytest.raises(ValueError):
        sweep(ExperimentConfig(), {})
