"""Perturbation models for protected attributes (and labels).

All adversaries return a :class:`PerturbationRecord`.  The Hamming-style
budget is ``ceil(eta * N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .classifier import LinearClassifier, design_matrix, predict_dataset
from .metrics import Dataset

__all__ = [
    "PerturbationRecord",
    "FlipMatrix",
    "hamming_budget",
    "adversary_rng",
    "perturb_targeted",
    "perturb_flip",
    "perturb_p_restricted",
    "perturb_tv_coupling",
    "coupling_keep_probabilities",
    "perturb_nasty_labels",
]

_OUTCOMES = {
    # kind: (prediction, label)
    "TN": (0, 0),
    "FN": (0, 1),
    "FP": (1, 0),
}


def hamming_budget(eta: float, n: int) -> int:
    # the 1e-9 guard keeps eta*n = 5.000000000000001 at 5
    return int(math.ceil(eta * n - 1e-9))


def adversary_rng(seed: int, kind: str) -> np.random.Generator:
    """Generator for one adversary, independent of other uses of the same seed.

    Data samplers seeded with the same integer would otherwise hand the
    adversary the very uniforms that placed each sample.
    """
    tag = int.from_bytes(kind.encode(), "little") % (2 ** 32)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(tag,)))


def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")


@dataclass
class PerturbationRecord:
    perturbed: Dataset
    flip_mask: np.ndarray
    budget_eta: float
    kind: str
    rng_seed: int
    info: dict = field(default_factory=dict)

    @property
    def n_flipped(self) -> int:
        return int(np.count_nonzero(self.flip_mask))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "budget_eta": float(self.budget_eta),
            "rng_seed": int(self.rng_seed),
            "n_flipped": self.n_flipped,
            "flip_mask": [int(v) for v in self.flip_mask],
            "info": self.info,
        }


def perturb_targeted(
    dataset: Dataset,
    eta: float,
    kind: str,
    fstar: LinearClassifier,
    source_group: int = 1,
    target_group: int = 2,
    seed: int = 0,
) -> PerturbationRecord:
    """Move the protected attribute of f*'s most confident TN/FN/FP samples.

    Candidates are samples of ``source_group`` whose (prediction, label)
    under ``fstar`` matches ``kind``.  The ``ceil(eta*N)`` candidates
    with largest ``|<x, theta>|`` are moved to ``target_group``; equal
    margins go to the lower index first.  A short candidate pool is flipped
    entirely and the shortfall is recorded in ``info``.
    """
    _check_eta(eta)
    kind = kind.upper()
    if kind not in _OUTCOMES:
        raise ValueError(f"kind must be one of {sorted(_OUTCOMES)}")
    for g in (source_group, target_group):
        if not 1 <= g <= dataset.p:
            raise ValueError(f"group {g} outside 1..{dataset.p}")
    if source_group == target_group:
        raise ValueError("source and target groups must differ")

    pred = predict_dataset(fstar, dataset)
    margin = np.abs(design_matrix(fstar, dataset) @ fstar.theta)
    want_pred, want_label = _OUTCOMES[kind]
    cand = np.flatnonzero((dataset.z == source_group) & (pred == want_pred) & (dataset.y == want_label))
    budget = hamming_budget(eta, dataset.n)
    order = cand[np.argsort(-margin[cand], kind="stable")]
    chosen = order[:budget]

    flip = np.zeros(dataset.n, dtype=bool)
    flip[chosen] = True
    z = dataset.z.copy()
    z[flip] = target_group
    return PerturbationRecord(
        dataset.replace(z=z), flip, float(eta), f"targeted-{kind.lower()}", int(seed),
        {
            "budget": budget,
            "candidates": int(cand.size),
            "shortfall": int(max(budget - cand.size, 0)),
            "source_group": int(source_group),
            "target_group": int(target_group),
        },
    )


def perturb_flip(dataset: Dataset, rates, seed: int) -> PerturbationRecord:
    """Independently move each group-l sample to the other group with probability ``rates[l]``."""
    if dataset.p != 2:
        raise ValueError("stochastic flipping is defined for two groups")
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (2,) or np.any(rates < 0) or np.any(rates > 1):
        raise ValueError("rates must be two probabilities")
    rng = adversary_rng(seed, "flip")
    flip = rng.random(dataset.n) < rates[dataset.z - 1]
    z = np.where(flip, 3 - dataset.z, dataset.z)
    return PerturbationRecord(
        dataset.replace(z=z), flip, float(rates.max()), "flip", int(seed),
        {"rates": rates.tolist()},
    )


@dataclass(frozen=True, eq=False)
class FlipMatrix:
    """Row-stochastic ``p x p`` matrix; entry (l, k) is the fraction of group l moved to k."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("flip matrix must be square")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("flip matrix entries must lie in [0, 1]")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("flip matrix rows must sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def p(self) -> int:
        return self.P.shape[0]

    @property
    def group_rates(self) -> np.ndarray:
        return 1.0 - np.diag(self.P)


def perturb_p_restricted(dataset: Dataset, P, seed: int) -> PerturbationRecord:
    """Move exactly ``floor(P[l,k] * |G_l|)`` random group-l samples to group k."""
    fm = P if isinstance(P, FlipMatrix) else FlipMatrix(P)
    if fm.p != dataset.p:
        raise ValueError("flip matrix size does not match the number of groups")
    rng = adversary_rng(seed, "p-restricted")
    z = dataset.z.copy()
    flip = np.zeros(dataset.n, dtype=bool)
    counts = np.zeros((fm.p, fm.p), dtype=np.int64)
    for l in range(fm.p):
        members = np.flatnonzero(dataset.z == l + 1)
        members = rng.permutation(members)
        start = 0
        for k in range(fm.p):
            if k == l:
                continue
            m = int(math.floor(fm.P[l, k] * members.size + 1e-9))
            idx = members[start:start + m]
            start += m
            z[idx] = k + 1
            flip[idx] = True
            counts[l, k] = m
    return PerturbationRecord(
        dataset.replace(z=z), flip, float(fm.group_rates.max()), "p-restricted", int(seed),
        {"moved": counts.tolist()},
    )


def _check_coupling_pair(source, target, dataset: Dataset):
    if source.xs != target.xs or source.p != 2 or target.p != 2:
        raise ValueError("coupling needs two-group distributions over the same domain")
    if dataset.p != 2 or dataset.dim != len(source.xs):
        raise ValueError("dataset does not live on the distributions' domain")
    mx_s, mx_t = source.marginal_x(), target.marginal_x()
    if any(abs(float(mx_s[x] - mx_t[x])) > 1e-9 for x in source.xs):
        raise ValueError("source and target must share the marginal on X")
    for dist in (source, target):
        by_x: dict = {}
        for x in dist.xs:
            for z in (1, 2):
                tot = sum((m for (a, b, _), m in zip(dist.points, dist.mass_exact) if a == x and b == z), Fraction(0))
                if tot == 0:
                    continue
                pos = sum((m for (a, b, y), m in zip(dist.points, dist.mass_exact) if a == x and b == z and y == 1), Fraction(0))
                if by_x.setdefault(x, pos / tot) != pos / tot:
                    raise ValueError(f"label depends on the group given x in {dist.name or 'distribution'}")


def coupling_keep_probabilities(source, target) -> np.ndarray:
    """``min(Q(x,z) / P(x,z), 1)`` per cell, 1 where the source has no mass."""
    ms, mt = source.marginal_xz(), target.marginal_xz()
    out = np.ones(source.n_cells)
    for i, cell in enumerate(source.cells):
        if ms[cell] > 0:
            out[i] = float(min(mt[cell] / ms[cell], Fraction(1)))
    return out


def perturb_tv_coupling(dataset: Dataset, source, target, eta: float, seed: int) -> PerturbationRecord:
    """Make iid draws from ``source`` look like iid draws from ``target``.

    Each sample keeps its group with probability ``min(Q/P, 1)`` at its
    (x, z) cell and otherwise switches to the other group.  If that would
    take ``eta * N`` or more flips, the data is returned unchanged and
    ``info['success']`` is False.
    """
    _check_eta(eta)
    _check_coupling_pair(source, target, dataset)
    keep = coupling_keep_probabilities(source, target)
    x_idx = dataset.X.argmax(axis=1)
    cell = x_idx * 2 + dataset.z - 1
    rng = adversary_rng(seed, "coupling")
    t = rng.random(dataset.n)
    flip = t > keep[cell]
    n_flip = int(flip.sum())
    ok = n_flip < eta * dataset.n
    if ok:
        perturbed = dataset.replace(z=np.where(flip, 3 - dataset.z, dataset.z))
    else:
        flip = np.zeros(dataset.n, dtype=bool)
        perturbed = dataset.replace()
    return PerturbationRecord(
        perturbed, flip, float(eta), "coupling", int(seed),
        {"success": bool(ok), "proposed_flips": n_flip},
    )


def perturb_nasty_labels(dataset: Dataset, eta: float, fstar: LinearClassifier, seed: int = 0) -> PerturbationRecord:
    """Flip labels of the ``ceil(eta*N)`` correctly classified samples with largest margin."""
    _check_eta(eta)
    pred = predict_dataset(fstar, dataset)
    margin = np.abs(design_matrix(fstar, dataset) @ fstar.theta)
    cand = np.flatnonzero(pred == dataset.y)
    budget = hamming_budget(eta, dataset.n)
    chosen = cand[np.argsort(-margin[cand], kind="stable")][:budget]
    flip = np.zeros(dataset.n, dtype=bool)
    flip[chosen] = True
    y = np.where(flip, 1 - dataset.y, dataset.y)
    return PerturbationRecord(
        dataset.replace(y=y), flip, float(eta), "nasty-labels", int(seed),
        {"budget": budget, "candidates": int(cand.size)},
    )
