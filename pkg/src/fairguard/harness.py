"""Experiment orchestration: split, perturb, train, evaluate on clean test data."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .adversaries import (
    FlipMatrix,
    perturb_flip,
    perturb_nasty_labels,
    perturb_p_restricted,
    perturb_targeted,
    perturb_tv_coupling,
)
from .classifier import predict_dataset
from .data import SyntheticConfig, generate_synthetic, load_csv, split_train_test
from .metrics import Dataset, empirical_error, fairness_value, get_metric, group_performance
from .reduction import fit_reduced
from .solver import (
    SolverConfig,
    estimate_params,
    fit_err_tolerant,
    fit_err_tolerant_plus,
    fit_general_err_tolerant,
    fit_target_fair,
    fit_unconstrained,
)
from .theory import family_grid, sample_from

__all__ = [
    "ExperimentConfig",
    "SOLVERS",
    "ADVERSARIES",
    "trial_seed",
    "load_data",
    "apply_adversary",
    "train_solver",
    "run_trial",
    "run_experiment",
    "sweep",
    "write_sweep_csv",
]

SOLVERS = ("uncons", "target-fair", "err-tol", "err-tol-plus", "general", "reduced")
ADVERSARIES = ("none", "tn", "fn", "fp", "flip", "prh", "coupling", "nasty")
_NEEDS_FSTAR = {"tn", "fn", "fp", "nasty"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``data`` is one of ``{"kind": "synthetic", ...SyntheticConfig fields}``,
    ``{"kind": "csv", "path", "label_column", "group_column"}`` or
    ``{"kind": "family", "family", "params", "member", "n"}``.
    ``adversary_params`` may hold ``source_group``/``target_group``,
    ``rates`` (flip), ``matrix`` (prh) or ``target_member`` (coupling).
    """

    data: dict = field(default_factory=lambda: {"kind": "synthetic"})
    adversary: str = "tn"
    adversary_params: dict = field(default_factory=dict)
    solver: str = "err-tol"
    metrics: tuple = ("sr",)
    tau: float = 0.8
    eta: float = 0.05
    delta: float = 0.01
    alpha: float = 0.05
    lambda_mode: str = "joint"
    lambda_value: float | None = None
    train_fraction: float = 0.7
    trials: int = 1
    seed: int = 0
    jobs: int = 1
    solver_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {ADVERSARIES}")
        if not self.metrics:
            raise ValueError("at least one metric is required")
        for m in self.metrics:
            get_metric(m)
        if self.trials < 1 or self.jobs < 1:
            raise ValueError("trials and jobs must be positive")
        if not 0 <= self.eta <= 1 or not 0 < self.tau <= 1:
            raise ValueError("eta must lie in [0, 1] and tau in (0, 1]")
        SolverConfig(**self.solver_config)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["metrics"] = list(self.metrics)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "metrics" in d:
            d["metrics"] = tuple(d["metrics"])
        return cls(**d)


def trial_seed(seed: int, trial: int) -> int:
    """Independent 32-bit seed for one trial, spawned from the experiment seed."""
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)).generate_state(1)[0])


def _synthetic_config(d: dict) -> SyntheticConfig:
    kw = {k: v for k, v in d.items() if k != "kind"}
    if "cluster_means" in kw:
        kw["cluster_means"] = {
            tuple(int(t) for t in str(k).split(",")): tuple(v) for k, v in kw["cluster_means"].items()
        }
    for k in ("group_fractions", "positive_rates"):
        if k in kw:
            kw[k] = tuple(kw[k])
    return SyntheticConfig(**kw)


def _family_member(d: dict, member_key: str = "member"):
    dists = family_grid(d["family"], d.get("params", {}))
    return dists, dists[int(d.get(member_key, 1)) - 1]


def load_data(spec: dict) -> Dataset:
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        return generate_synthetic(_synthetic_config(spec))
    if kind == "csv":
        return load_csv(spec["path"], spec.get("label_column", "label"), spec.get("group_column", "group")).dataset
    if kind == "family":
        _, dist = _family_member(spec)
        return sample_from(dist, int(spec.get("n", 1000)), int(spec.get("seed", 0)))
    raise ValueError(f"unknown data kind {kind!r}")


def _solver_config(cfg: ExperimentConfig, seed: int) -> SolverConfig:
    return SolverConfig(**{**cfg.solver_config, "seed": int(seed)})


def apply_adversary(cfg: ExperimentConfig, train: Dataset, seed: int, fstar=None):
    kind = cfg.adversary
    ap = cfg.adversary_params
    if kind == "none":
        from .adversaries import PerturbationRecord

        return PerturbationRecord(train, np.zeros(train.n, dtype=bool), 0.0, "none", seed)
    if kind in ("tn", "fn", "fp"):
        return perturb_targeted(train, cfg.eta, kind.upper(), fstar,
                                int(ap.get("source_group", 1)), int(ap.get("target_group", 2)), seed)
    if kind == "nasty":
        return perturb_nasty_labels(train, cfg.eta, fstar, seed)
    if kind == "flip":
        return perturb_flip(train, ap.get("rates", [cfg.eta, cfg.eta]), seed)
    if kind == "prh":
        matrix = ap.get("matrix")
        if matrix is None:
            # default: move an eta fraction of the target group into the source group
            p = train.p
            matrix = np.eye(p)
            s, t = int(ap.get("source_group", 1)) - 1, int(ap.get("target_group", 2)) - 1
            matrix[t, t] = 1 - cfg.eta
            matrix[t, s] = cfg.eta
        return perturb_p_restricted(train, FlipMatrix(matrix), seed)
    if kind == "coupling":
        if cfg.data.get("kind") != "family":
            raise ValueError("the coupling adversary needs data sampled from a finite family")
        dists, source = _family_member(cfg.data)
        target = dists[int(ap.get("target_member", 2)) - 1]
        return perturb_tv_coupling(train, source, target, cfg.eta, seed)
    raise ValueError(f"unknown adversary {kind!r}")


def train_solver(cfg: ExperimentConfig, data: Dataset, seed: int):
    specs = [get_metric(m) for m in cfg.metrics]
    sc = _solver_config(cfg, seed)
    if cfg.solver == "uncons":
        return fit_unconstrained(data, sc), None
    if cfg.solver == "target-fair":
        return fit_target_fair(data, specs[0], cfg.tau, sc), None
    params = [estimate_params(data, s, cfg.eta, cfg.tau, cfg.delta, cfg.lambda_mode, cfg.lambda_value) for s in specs]
    if cfg.solver == "err-tol":
        res = fit_err_tolerant(data, specs[0], params[0], sc)
    elif cfg.solver == "err-tol-plus":
        res = fit_err_tolerant_plus(data, specs[0], params[0], sc)
    elif cfg.solver == "general":
        res = fit_general_err_tolerant(data, specs, params, sc)
    else:
        res = fit_reduced(data, specs[0], params[0], cfg.alpha, sc)
    return res, [p.to_dict() for p in params]


def _evaluate(clf, data: Dataset, metrics) -> dict:
    pred = predict_dataset(clf, data)
    out = {"accuracy": 1.0 - empirical_error(data, pred)}
    for m in metrics:
        out[m] = fairness_value(group_performance(data, pred, get_metric(m)))
    return out


def run_trial(cfg: ExperimentConfig, dataset: Dataset, t: int) -> tuple[dict, float]:
    """One trial; returns the report row and its wall time."""
    start = time.perf_counter()
    ts = trial_seed(cfg.seed, t)
    train, test = split_train_test(dataset, cfg.train_fraction, ts)
    fstar = None
    if cfg.adversary in _NEEDS_FSTAR:
        # the adversary always targets the optimal fair classifier on CLEAN training data
        fstar = fit_target_fair(train, get_metric(cfg.metrics[0]), cfg.tau, _solver_config(cfg, ts)).classifier
    rec = apply_adversary(cfg, train, ts, fstar)
    res, params = train_solver(cfg, rec.perturbed, ts)
    row = {
        "trial": t,
        "seed": ts,
        "test": _evaluate(res.classifier, test, cfg.metrics),
        "train_perturbed": _evaluate(res.classifier, rec.perturbed, cfg.metrics),
        "feasible": bool(res.feasible),
        "objective": float(res.objective),
        "restarts_used": int(res.restarts_used),
        "flips": rec.n_flipped,
        "adversary_info": rec.info,
        "params": params,
        "solver_info": _jsonable(res.info),
        "classifier": res.classifier.to_dict(),
    }
    return row, time.perf_counter() - start


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _aggregate(values) -> dict:
    v = np.asarray(values, dtype=float)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "std": sd, "stderr": sd / math.sqrt(v.size)}


def aggregate(rows: list, metrics) -> dict:
    out = {"accuracy": _aggregate([r["test"]["accuracy"] for r in rows])}
    for m in metrics:
        out[m] = _aggregate([r["test"][m] for r in rows])
    out["feasible_fraction"] = float(np.mean([r["feasible"] for r in rows]))
    return out


def _run_one(args):
    cfg, dataset, t = args
    return run_trial(cfg, dataset, t)


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> dict:
    """Run all trials; every reported metric is measured on the clean test split.

    The report embeds the full configuration and per-trial seeds.  Wall
    times go to ``<out>.timing.json`` so that the report itself is
    byte-identical across reruns.  If a trial raises, the rows finished so
    far are written with an ``error`` entry before the exception propagates.
    """
    dataset = load_data(cfg.data)
    rows, times = [], []
    error = None
    try:
        jobs = [(cfg, dataset, t) for t in range(cfg.trials)]
        if cfg.jobs > 1 and cfg.trials > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
                results = list(ex.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
        for row, dt in results:
            rows.append(_jsonable(row))
            times.append(dt)
    except Exception as exc:  # flush partial results, then re-raise
        error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        report = {
            "config": cfg.to_dict(),
            "seed_derivation": "numpy SeedSequence(seed, spawn_key=(trial,)).generate_state(1)[0]",
            "trials": rows,
            "aggregate": aggregate(rows, cfg.metrics) if rows else {},
        }
        if error is not None:
            report["error"] = error
        if out is not None:
            write_json(report, out)
            write_json({"wall_time_s": times}, str(out) + ".timing.json")
    return report


def write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sweep(cfg: ExperimentConfig, grid: dict) -> list[tuple[dict, dict]]:
    """One experiment per grid point.

    ``grid`` maps ``tau``, ``eta`` and/or ``group_fraction`` (size of
    group 1 in synthetic data) to lists of values; the cartesian product
    is run.  Returns ``(point, report)`` pairs.
    """
    keys = [k for k in ("tau", "eta", "group_fraction") if grid.get(k)]
    unknown = set(grid) - {"tau", "eta", "group_fraction"}
    if unknown:
        raise ValueError(f"unknown grid keys {sorted(unknown)}")
    if not keys:
        raise ValueError("empty parameter grid")
    points = [{}]
    for k in keys:
        points = [{**pt, k: v} for pt in points for v in grid[k]]
    out = []
    for pt in points:
        c = cfg
        if "tau" in pt:
            c = replace(c, tau=float(pt["tau"]))
        if "eta" in pt:
            c = replace(c, eta=float(pt["eta"]))
        if "group_fraction" in pt:
            if c.data.get("kind", "synthetic") != "synthetic":
                raise ValueError("group_fraction sweeps need synthetic data")
            f = float(pt["group_fraction"])
            c = replace(c, data={**c.data, "group_fractions": [f, 1.0 - f]})
        out.append((pt, run_experiment(c)))
    return out


def write_sweep_csv(results, metrics, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for pt, _ in results for k in pt})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = keys + ["acc_mean", "acc_stderr"]
        for m in metrics:
            header += [f"{m}_mean", f"{m}_stderr"]
        header.append("feasible_fraction")
        w.writerow(header)
        for pt, rep in results:
            agg = rep["aggregate"]
            row = [pt.get(k, "") for k in keys] + [agg["accuracy"]["mean"], agg["accuracy"]["stderr"]]
            for m in metrics:
                row += [agg[m]["mean"], agg[m]["stderr"]]
            row.append(agg["feasible_fraction"])
            w.writerow(row)
