"""Empirical errors, group performances and fairness ratios.

A linear-fractional metric is given by two events over (prediction, label):
``E`` and ``E'``.  The performance of a classifier on group ``l`` is
``Pr[E | E', Z=l]`` and fairness is the min/max ratio of those performances.

Groups are 1-indexed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "Sample",
    "Dataset",
    "MetricSpec",
    "PerformanceTable",
    "SR",
    "FPR",
    "TPR",
    "FDR",
    "METRICS",
    "get_metric",
    "empirical_error",
    "joint_event_mass",
    "group_performance",
    "fairness_value",
    "soft_group_sums",
]


class Sample(NamedTuple):
    features: np.ndarray
    label: int
    group: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature vectors with a protected group in ``1..p``.

    Arrays are copied and made read-only.  ``check_groups=False`` skips the
    requirement that every group occurs; perturbed datasets use it because
    an adversary may empty a group.
    """

    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    p: int
    check_groups: bool = field(default=True, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y)
        z = np.asarray(self.z)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must be a nonempty 2-d feature matrix")
        n = X.shape[0]
        if y.shape != (n,) or z.shape != (n,):
            raise ValueError("labels and groups must have one entry per sample")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.equal(np.mod(z, 1), 0)):
            raise ValueError("group codes must be integers")
        p = int(self.p)
        if p < 1:
            raise ValueError("p must be positive")
        z = z.astype(np.int64)
        if z.min() < 1 or z.max() > p:
            raise ValueError(f"group codes must lie in 1..{p}")
        if self.check_groups:
            missing = sorted(set(range(1, p + 1)) - set(np.unique(z).tolist()))
            if missing:
                raise ValueError(f"groups {missing} have no samples")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "p", p)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], p: int | None = None) -> "Dataset":
        if not samples:
            raise ValueError("dataset must be nonempty")
        X = np.array([np.asarray(s.features, dtype=float) for s in samples])
        y = np.array([s.label for s in samples])
        z = np.array([s.group for s in samples])
        return cls(X, y, z, int(z.max()) if p is None else p)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y[i]), int(self.z[i]))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def group_counts(self) -> np.ndarray:
        return np.bincount(self.z - 1, minlength=self.p)[: self.p]

    def take(self, idx, check_groups: bool = True) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.z[idx], self.p, check_groups)

    def replace(self, *, X=None, y=None, z=None) -> "Dataset":
        """Copy with some fields swapped; group coverage is not enforced."""
        return Dataset(
            self.X if X is None else X,
            self.y if y is None else y,
            self.z if z is None else z,
            self.p,
            check_groups=False,
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.p == other.p
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.z, other.z)
        )


def _as_table(mask) -> np.ndarray:
    t = np.asarray(mask, dtype=bool)
    if t.shape != (2, 2):
        raise ValueError("event masks are 2x2 tables indexed [prediction, label]")
    return t


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Events ``E`` and ``E'`` as boolean tables indexed ``[prediction, label]``."""

    name: str
    e_mask: np.ndarray
    e_prime_mask: np.ndarray

    def __post_init__(self):
        e = _frozen(_as_table(self.e_mask))
        ep = _frozen(_as_table(self.e_prime_mask))
        if not ep.any():
            raise ValueError("E' must not be the empty event")
        object.__setattr__(self, "e_mask", e)
        object.__setattr__(self, "e_prime_mask", ep)

    @property
    def joint(self) -> np.ndarray:
        return (self.e_mask & self.e_prime_mask).astype(np.float64)

    @property
    def prime(self) -> np.ndarray:
        return self.e_prime_mask.astype(np.float64)

    @property
    def prime_depends_on_prediction(self) -> bool:
        return bool((self.e_prime_mask[0] != self.e_prime_mask[1]).any())

    def __eq__(self, other):
        if not isinstance(other, MetricSpec):
            return NotImplemented
        return (
            np.array_equal(self.e_mask, other.e_mask)
            and np.array_equal(self.e_prime_mask, other.e_prime_mask)
        )

    def __hash__(self):
        return hash((self.e_mask.tobytes(), self.e_prime_mask.tobytes()))


_PRED1 = [[False, False], [True, True]]
_ALWAYS = [[True, True], [True, True]]
_LABEL0 = [[True, False], [True, False]]
_LABEL1 = [[False, True], [False, True]]

SR = MetricSpec("sr", _PRED1, _ALWAYS)
FPR = MetricSpec("fpr", _PRED1, _LABEL0)
TPR = MetricSpec("tpr", _PRED1, _LABEL1)
FDR = MetricSpec("fdr", _LABEL0, _PRED1)

METRICS = {m.name: m for m in (SR, FPR, TPR, FDR)}


def get_metric(name: str) -> MetricSpec:
    try:
        return METRICS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None


@dataclass(frozen=True, eq=False)
class PerformanceTable:
    """Per-group performances with the underlying event counts.

    ``q[l]`` is NaN when group ``l`` has no mass on ``E'`` (undefined).
    Counts are exact integers; ``numerators``/``denominators`` are the
    corresponding masses ``count / n``.
    """

    q: np.ndarray
    num_counts: np.ndarray
    den_counts: np.ndarray
    n: int

    @property
    def numerators(self) -> np.ndarray:
        return self.num_counts / self.n

    @property
    def denominators(self) -> np.ndarray:
        return self.den_counts / self.n

    @property
    def defined(self) -> np.ndarray:
        return self.den_counts > 0

    @classmethod
    def from_values(cls, q) -> "PerformanceTable":
        """Table holding only performances (None / NaN marks undefined)."""
        q = np.array([np.nan if v is None else v for v in q], dtype=float)
        den = np.where(np.isnan(q), 0, 1)
        num = np.where(np.isnan(q), 0.0, q)
        return cls(q, num, den, 1)


def _check_predictions(dataset: Dataset, predictions) -> np.ndarray:
    pred = np.asarray(predictions)
    if pred.shape != (dataset.n,):
        raise ValueError(
            f"expected {dataset.n} predictions, got shape {pred.shape}"
        )
    if not np.all((pred == 0) | (pred == 1)):
        raise ValueError("predictions must be binary")
    return pred.astype(np.int64)


def empirical_error(dataset: Dataset, predictions) -> float:
    pred = _check_predictions(dataset, predictions)
    return int(np.count_nonzero(pred != dataset.y)) / dataset.n


def _event_counts(dataset: Dataset, pred: np.ndarray, table: np.ndarray) -> np.ndarray:
    hit = table[pred, dataset.y]
    return np.bincount(dataset.z[hit] - 1, minlength=dataset.p)[: dataset.p]


def joint_event_mass(dataset: Dataset, predictions, spec: MetricSpec, group: int) -> float:
    """Fraction of all samples with ``E``, ``E'`` and ``Z = group``."""
    if not 1 <= int(group) <= dataset.p:
        raise ValueError(f"group must lie in 1..{dataset.p}")
    pred = _check_predictions(dataset, predictions)
    counts = _event_counts(dataset, pred, spec.e_mask & spec.e_prime_mask)
    return int(counts[int(group) - 1]) / dataset.n


def group_performance(dataset: Dataset, predictions, spec: MetricSpec) -> PerformanceTable:
    pred = _check_predictions(dataset, predictions)
    num = _event_counts(dataset, pred, spec.e_mask & spec.e_prime_mask)
    den = _event_counts(dataset, pred, spec.e_prime_mask)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(den > 0, num / np.maximum(den, 1), np.nan)
    return PerformanceTable(q, num, den, dataset.n)


def fairness_value(table: PerformanceTable) -> float:
    """Min/max ratio of the defined performances.

    An undefined group makes the ratio 0, unless every defined entry is 0
    (or none is defined), in which case the metric is vacuous and the
    value is 1.  A zero maximum also gives 1.
    """
    q = np.asarray(table.q, dtype=float)
    ok = ~np.isnan(q)
    if not ok.any():
        return 1.0
    vals = q[ok]
    hi = vals.max()
    if hi <= 0.0:
        return 1.0
    if not ok.all():
        return 0.0
    return float(vals.min() / hi)


def soft_group_sums(pos, dataset: Dataset, spec: MetricSpec) -> tuple[np.ndarray, np.ndarray]:
    """Expected per-group counts of ``E∧E'`` and ``E'``.

    ``pos[i]`` is the probability of predicting 1 on sample ``i``; with 0/1
    entries this reduces to the hard counts.
    """
    return _kernels.group_event_sums(
        np.asarray(pos, dtype=np.float64), dataset.y, dataset.z, spec.joint, spec.prime, dataset.p
    )
