"""Command-line entry point: ``fairguard <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .classifier import LinearClassifier, predict_dataset
from .data import SyntheticConfig, generate_synthetic, load_csv, save_csv
from .harness import (
    ADVERSARIES,
    SOLVERS,
    ExperimentConfig,
    apply_adversary,
    run_experiment,
    sweep,
    train_solver,
    write_json,
    write_sweep_csv,
)
from .metrics import METRICS, empirical_error, fairness_value, get_metric, group_performance
from .solver import SolverConfig, fit_target_fair
from .theory import family_grid, run_all_checks, sample_from


def _default_seed() -> int:
    return int(os.environ.get("FAIRGUARD_SEED", "0"))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--eta", type=float, default=0.05, help="perturbation budget")
    p.add_argument("--tau", type=float, default=0.8, help="fairness target")
    p.add_argument("--delta", type=float, default=0.01, help="slack added to eta")
    p.add_argument("--alpha", type=float, default=0.05, help="box width for the reduced solver")
    p.add_argument("--metric", action="append", choices=sorted(METRICS), help="repeatable; default sr")
    p.add_argument("--lambda-mode", choices=("joint", "prime"), default="joint",
                   help="plug-in estimate of the per-group mass constants")
    p.add_argument("--lambda", dest="lambda_value", type=float,
                   help="use this value for every per-group mass constant")
    p.add_argument("--seed", type=int, default=None, help="defaults to $FAIRGUARD_SEED or 0")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--temperature", type=float, default=1.0)


def _add_data(p: argparse.ArgumentParser, required: bool = False):
    p.add_argument("--data", required=required, help="CSV file (default: synthetic data)")
    p.add_argument("--label-column", default="label")
    p.add_argument("--group-column", default="group")


def _add_adversary(p: argparse.ArgumentParser):
    p.add_argument("--adversary", choices=ADVERSARIES, default="tn")
    p.add_argument("--source-group", type=int, default=1)
    p.add_argument("--target-group", type=int, default=2)
    p.add_argument("--rates", type=_floats, help="per-group flip rates for --adversary flip")
    p.add_argument("--matrix", help="JSON flip matrix for --adversary prh")
    p.add_argument("--family", choices=("A", "B", "C"), help="finite family (coupling adversary / gen-data)")
    p.add_argument("--family-params", default="{}", help="JSON parameters of the family")
    p.add_argument("--member", type=int, default=1, help="family member the data is drawn from")
    p.add_argument("--target-member", type=int, default=2, help="member the coupling adversary imitates")


def _seed(args) -> int:
    return _default_seed() if args.seed is None else args.seed


def _metrics(args) -> tuple:
    return tuple(args.metric or ["sr"])


def _solver_cfg(args) -> dict:
    return {"restarts": args.restarts, "max_iters": args.max_iters, "temperature": args.temperature}


def _data_spec(args) -> dict:
    if getattr(args, "data", None):
        return {"kind": "csv", "path": args.data, "label_column": args.label_column,
                "group_column": args.group_column}
    if getattr(args, "family", None):
        return {"kind": "family", "family": args.family, "params": json.loads(args.family_params),
                "member": args.member, "n": getattr(args, "n", 1000), "seed": _seed(args)}
    return {"kind": "synthetic"}


def _adversary_params(args) -> dict:
    ap = {"source_group": args.source_group, "target_group": args.target_group,
          "target_member": args.target_member}
    if args.rates is not None:
        ap["rates"] = args.rates
    if args.matrix is not None:
        ap["matrix"] = json.loads(args.matrix)
    return ap


def _experiment_config(args, **over) -> ExperimentConfig:
    kw = dict(
        data=_data_spec(args),
        adversary=args.adversary,
        adversary_params=_adversary_params(args),
        solver=getattr(args, "solver", "uncons"),
        metrics=_metrics(args),
        tau=args.tau,
        eta=args.eta,
        delta=args.delta,
        alpha=args.alpha,
        lambda_mode=args.lambda_mode,
        lambda_value=args.lambda_value,
        trials=getattr(args, "trials", 1),
        seed=_seed(args),
        jobs=getattr(args, "jobs", 1),
        solver_config=_solver_cfg(args),
    )
    kw.update(over)
    return ExperimentConfig(**kw)


def _load(args):
    if args.data:
        return load_csv(args.data, args.label_column, args.group_column).dataset
    return generate_synthetic(SyntheticConfig(seed=_seed(args)))


def _emit(obj, out):
    if out:
        write_json(obj, out)
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    seed = _seed(args)
    if args.family:
        dist = family_grid(args.family, json.loads(args.family_params))[args.member - 1]
        ds = sample_from(dist, args.n, seed)
        save_csv(ds, args.out, feature_names=list(dist.xs))
    else:
        cfg = SyntheticConfig(
            n=args.n,
            group_fractions=tuple(args.group_fractions),
            positive_rates=tuple(args.positive_rates),
            seed=seed,
            label_sampling=args.label_sampling,
        )
        save_csv(generate_synthetic(cfg), args.out)
    return 0


def cmd_perturb(args) -> int:
    cfg = _experiment_config(args, solver="uncons")
    data = _load(args)
    fstar = None
    if cfg.adversary in ("tn", "fn", "fp", "nasty"):
        sc = SolverConfig(seed=cfg.seed, **cfg.solver_config)
        fstar = fit_target_fair(data, get_metric(cfg.metrics[0]), cfg.tau, sc).classifier
    rec = apply_adversary(cfg, data, cfg.seed, fstar)
    save_csv(rec.perturbed, args.out, args.label_column, args.group_column)
    if args.record:
        write_json({"config": cfg.to_dict(), "record": rec.to_dict(),
                    "fstar": None if fstar is None else fstar.to_dict()}, args.record)
    return 0


def cmd_train(args) -> int:
    cfg = _experiment_config(args)
    data = _load(args)
    res, params = train_solver(cfg, data, cfg.seed)
    pred = predict_dataset(res.classifier, data)
    _emit({
        "config": cfg.to_dict(),
        "classifier": res.classifier.to_dict(),
        "feasible": bool(res.feasible),
        "objective": float(res.objective),
        "constraint_slacks": [float(v) for v in res.constraint_slacks],
        "restarts_used": int(res.restarts_used),
        "params": params,
        "solver_info": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in res.info.items()},
        "train_accuracy": 1.0 - empirical_error(data, pred),
    }, args.out)
    return 0


def cmd_evaluate(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        model = json.load(fh)
    clf = LinearClassifier.from_dict(model.get("classifier", model))
    data = load_csv(args.data, args.label_column, args.group_column).dataset
    pred = predict_dataset(clf, data)
    out = {"n": data.n, "accuracy": 1.0 - empirical_error(data, pred)}
    for m in _metrics(args):
        tab = group_performance(data, pred, get_metric(m))
        out[m] = {"fairness": fairness_value(tab),
                  "group_performance": [None if np.isnan(v) else float(v) for v in tab.q]}
    _emit(out, args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    report = run_experiment(cfg, args.out)
    if not args.out:
        _emit(report, None)
    agg = report["aggregate"]
    parts = [f"acc {agg['accuracy']['mean']:.4f} ({agg['accuracy']['std']:.4f})"]
    parts += [f"{m} {agg[m]['mean']:.4f} ({agg[m]['std']:.4f})" for m in cfg.metrics]
    print(" | ".join(parts), file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    grid = {}
    if args.taus:
        grid["tau"] = args.taus
    if args.etas:
        grid["eta"] = args.etas
    if args.group_fractions_grid:
        grid["group_fraction"] = args.group_fractions_grid
    cfg = _experiment_config(args)
    results = sweep(cfg, grid)
    write_sweep_csv(results, cfg.metrics, args.out)
    if args.report:
        write_json({"config": cfg.to_dict(), "grid": grid,
                    "points": [{"point": pt, "report": rep} for pt, rep in results]}, args.report)
    return 0


def cmd_verify_theory(args) -> int:
    params = None
    if args.params:
        with open(args.params, encoding="utf-8") as fh:
            params = json.load(fh)
    reports = run_all_checks(params, include_monte_carlo=not args.skip_monte_carlo)
    payload = {"passed": all(r.passed for r in reports), "checks": [r.to_dict() for r in reports]}
    if args.out:
        write_json(payload, args.out)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  (checked {r.checked})")
        for bad in r.counterexamples[:5]:
            print(f"      counterexample: {json.dumps(bad, sort_keys=True)}")
        if r.details.get("missing"):
            print(f"      no witness for: {', '.join(r.details['missing'])} [{r.details.get('criterion', '')}]")
    return 0 if payload["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairguard", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic or finite-family dataset to CSV")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--group-fractions", type=_floats, default=[0.5, 0.5])
    g.add_argument("--positive-rates", type=_floats, default=[0.5, 0.4])
    g.add_argument("--label-sampling", choices=("exact", "bernoulli"), default="exact")
    g.add_argument("--family", choices=("A", "B", "C"))
    g.add_argument("--family-params", default="{}")
    g.add_argument("--member", type=int, default=1)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("perturb", help="apply an adversary to a dataset")
    _add_data(p)
    _add_common(p)
    _add_adversary(p)
    p.add_argument("--out", required=True, help="perturbed CSV")
    p.add_argument("--record", help="JSON file for the perturbation record")
    p.set_defaults(func=cmd_perturb)

    t = sub.add_parser("train", help="fit one solver variant")
    _add_data(t)
    _add_common(t)
    t.add_argument("--solver", choices=SOLVERS, default="err-tol")
    t.add_argument("--out", help="model JSON (default: stdout)")
    t.set_defaults(func=cmd_train, adversary="none", source_group=1, target_group=2, rates=None,
                   matrix=None, family=None, family_params="{}", member=1, target_member=2)

    e = sub.add_parser("evaluate", help="accuracy and fairness of a saved model")
    _add_data(e, required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--metric", action="append", choices=sorted(METRICS))
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="repeated split / perturb / train / clean-test evaluation")
    _add_data(x)
    _add_common(x)
    _add_adversary(x)
    x.add_argument("--solver", choices=SOLVERS, default="err-tol")
    x.add_argument("--trials", type=int, default=1)
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--n", type=int, default=1000, help="sample size for family data")
    x.add_argument("--out", help="JSON report (default: stdout)")
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sweep", help="experiments over a grid of tau / eta / group sizes")
    _add_data(s)
    _add_common(s)
    _add_adversary(s)
    s.add_argument("--solver", choices=SOLVERS, default="err-tol")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--taus", type=_floats)
    s.add_argument("--etas", type=_floats)
    s.add_argument("--group-fractions-grid", type=_floats, help="sizes of group 1 (synthetic data)")
    s.add_argument("--out", required=True, help="summary CSV")
    s.add_argument("--report", help="optional full JSON report")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-theory", help="exhaustive checks of the lower-bound constructions")
    v.add_argument("--params", help="JSON overrides of the family parameters")
    v.add_argument("--skip-monte-carlo", action="store_true")
    v.add_argument("--out", help="JSON report")
    v.set_defaults(func=cmd_verify_theory)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"fairguard: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
