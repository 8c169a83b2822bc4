"""Interval-box reduction of the ratio fairness constraint.

``min q >= tau * max q`` is replaced by J programs, each forcing every group
performance into one box ``[L_j, U_j]``.  Any classifier meeting the ratio
constraint lies in some box, and any classifier in a box satisfies
``min q >= tau * max q - alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .classifier import predict_dataset
from .metrics import Dataset, MetricSpec, empirical_error, fairness_value, group_performance
from .solver import FairnessProgram, RobustParams, SolveResult, SolverConfig, robust_fairness_threshold
from .theory import as_fraction

__all__ = ["IntervalPartition", "partition_intervals", "fit_reduced"]


@dataclass(frozen=True)
class IntervalPartition:
    J: int
    lows: tuple
    highs: tuple
    tau: float
    alpha: float

    def boxes(self):
        return list(zip(self.lows, self.highs))


def partition_intervals(tau, alpha, exact: bool = False) -> IntervalPartition:
    """``J = ceil(tau/alpha)`` boxes with ``L_j = (j-1) alpha`` and ``U_j = j alpha / tau``.

    Arithmetic is done in exact fractions of the given decimals, so
    ``tau=0.8, alpha=0.2`` yields four boxes.  ``exact=True`` returns
    :class:`fractions.Fraction` bounds.
    """
    t, a = as_fraction(tau), as_fraction(alpha)
    if not (0 < t <= 1 and 0 < a <= 1):
        raise ValueError("tau and alpha must lie in (0, 1]")
    J = math.ceil(t / a)
    lows = [(j - 1) * a for j in range(1, J + 1)]
    highs = [j * a / t for j in range(1, J + 1)]
    if not exact:
        lows = [float(v) for v in lows]
        highs = [float(v) for v in highs]
        return IntervalPartition(J, tuple(lows), tuple(highs), float(tau), float(alpha))
    return IntervalPartition(J, tuple(lows), tuple(highs), t, a)


def fit_reduced(
    perturbed: Dataset,
    spec: MetricSpec,
    params: RobustParams,
    alpha: float = 0.05,
    config: SolverConfig = SolverConfig(),
    use_protected: bool = False,
) -> SolveResult:
    """Solve one box program per interval and keep the best feasible one.

    The ratio threshold is the deflated one from
    :func:`~fairguard.solver.robust_fairness_threshold`; each box program
    also carries the mass floors ``min lambda - eta - delta``.  Box
    constraints are imposed on the soft surrogate; a box solution counts as
    feasible when its hard predictions are alpha-feasible
    (``min q >= thr * max q - alpha``) and meet the floors, since hard group
    rates of a soft-feasible point can land just outside its box.  The
    winner is the feasible box solution of least training error.
    """
    if params.p != perturbed.p:
        raise ValueError(f"params describe {params.p} groups, dataset has {perturbed.p}")
    thr = robust_fairness_threshold(params)
    part = partition_intervals(thr, alpha)
    floors = np.full(params.p, params.lam_min - params.eta - params.delta)
    results = []
    for j, (lo, hi) in enumerate(part.boxes()):
        prog = FairnessProgram(
            perturbed,
            floors=[(spec, floors)],
            boxes=[(spec, lo, hi)],
            box_acceptance=(thr, float(alpha)),
            temperature=config.temperature,
            use_protected=use_protected,
        )
        res = prog.solve(config)
        pred = predict_dataset(res.classifier, perturbed)
        err = empirical_error(perturbed, pred)
        q = group_performance(perturbed, pred, spec)
        in_box = bool(q.defined.all() and np.all((q.q >= lo - 1e-12) & (q.q <= hi + 1e-12)))
        results.append((j, res, err, in_box))

    feasible = [r for r in results if r[1].feasible]
    pool = feasible or results
    j, best, err, _ = min(pool, key=lambda r: (r[2], r[1].objective, r[0]))
    pred = predict_dataset(best.classifier, perturbed)
    best.info.update({
        "threshold": thr,
        "alpha": float(alpha),
        "J": part.J,
        "box": j,
        "box_bounds": [part.lows[j], part.highs[j]],
        "train_error": err,
        "train_fairness": fairness_value(group_performance(perturbed, pred, spec)),
        "feasible_boxes": [r[0] for r in feasible],
        "in_box": results[j][3],
    })
    best.feasible = bool(feasible)
    best.restarts_used = sum(r[1].restarts_used for r in results)
    return best
