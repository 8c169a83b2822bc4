"""Synthetic data, CSV ingestion and train/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import Dataset

__all__ = [
    "SyntheticConfig",
    "generate_synthetic",
    "load_csv",
    "save_csv",
    "split_train_test",
    "CsvLoad",
]


def _default_means():
    # (group, label) -> mean; positives near (2,2)/(2.5,2.5), negatives mirrored
    return {
        (1, 1): (2.0, 2.0),
        (1, 0): (-2.0, -2.0),
        (2, 1): (2.5, 2.5),
        (2, 0): (-2.5, -2.5),
    }


@dataclass(frozen=True)
class SyntheticConfig:
    """Mixture of 2-d Gaussians, one per (group, label).

    The defaults give linearly separable classes (no intercept needed) and a
    population statistical rate of 0.4 / 0.5 = 0.8.  With
    ``label_sampling="exact"`` each group gets ``round(rate * size)``
    positives at random positions; ``"bernoulli"`` draws labels independently.
    """

    n: int = 1000
    group_fractions: tuple = (0.5, 0.5)
    cluster_means: dict = field(default_factory=_default_means)
    cluster_cov_scale: float = 0.25
    positive_rates: tuple = (0.5, 0.4)
    seed: int = 0
    label_sampling: str = "exact"

    def __post_init__(self):
        fr = np.asarray(self.group_fractions, dtype=float)
        if self.n < 1:
            raise ValueError("n must be positive")
        if fr.ndim != 1 or fr.size < 1 or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
            raise ValueError("group_fractions must be nonnegative and sum to 1")
        rates = np.asarray(self.positive_rates, dtype=float)
        if rates.shape != fr.shape or np.any(rates < 0) or np.any(rates > 1):
            raise ValueError("positive_rates needs one probability per group")
        if self.label_sampling not in ("exact", "bernoulli"):
            raise ValueError("label_sampling must be 'exact' or 'bernoulli'")
        if not self.cluster_cov_scale > 0:
            raise ValueError("cluster_cov_scale must be positive")
        for g in range(1, fr.size + 1):
            for y in (0, 1):
                if (g, y) not in self.cluster_means:
                    raise ValueError(f"missing cluster mean for group {g}, label {y}")

    @property
    def p(self) -> int:
        return len(self.group_fractions)

    def group_sizes(self) -> np.ndarray:
        """``floor(n * fraction)`` per group; leftovers go to the largest remainders."""
        raw = np.asarray(self.group_fractions, dtype=float) * self.n
        sizes = np.floor(raw + 1e-9).astype(int)
        rest = self.n - sizes.sum()
        order = np.argsort(-(raw - sizes), kind="stable")
        sizes[order[:rest]] += 1
        return sizes

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "group_fractions": list(self.group_fractions),
            "cluster_means": {f"{g},{y}": list(m) for (g, y), m in sorted(self.cluster_means.items())},
            "cluster_cov_scale": self.cluster_cov_scale,
            "positive_rates": list(self.positive_rates),
            "seed": self.seed,
            "label_sampling": self.label_sampling,
        }


def generate_synthetic(cfg: SyntheticConfig = SyntheticConfig()) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    sd = np.sqrt(cfg.cluster_cov_scale)
    Xs, ys, zs = [], [], []
    for g, size in enumerate(cfg.group_sizes(), start=1):
        rate = cfg.positive_rates[g - 1]
        if cfg.label_sampling == "exact":
            y = np.zeros(size, dtype=np.int64)
            y[: int(round(rate * size))] = 1
            y = rng.permutation(y)
        else:
            y = (rng.random(size) < rate).astype(np.int64)
        means = np.array([cfg.cluster_means[(g, int(v))] for v in y], dtype=float).reshape(size, -1)
        Xs.append(means + sd * rng.standard_normal(means.shape))
        ys.append(y)
        zs.append(np.full(size, g))
    return Dataset(np.concatenate(Xs), np.concatenate(ys), np.concatenate(zs), cfg.p,
                   check_groups=bool(np.all(cfg.group_sizes() > 0)))


@dataclass(frozen=True)
class CsvLoad:
    dataset: Dataset
    feature_columns: list
    group_mapping: dict  # raw code -> group index


def _sort_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def load_csv(path, label_column: str, group_column: str) -> CsvLoad:
    """Read a header-first, comma-separated file.

    Every column other than the label and group is a numeric feature.  Group
    codes are sorted (numerically when possible) and mapped to ``1..p``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    for col in (label_column, group_column):
        if col not in header:
            raise ValueError(f"{path}: missing column {col!r}")
    li, gi = header.index(label_column), header.index(group_column)
    feat_idx = [i for i in range(len(header)) if i not in (li, gi)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    X = np.empty((len(rows), len(feat_idx)))
    y = np.empty(len(rows), dtype=np.int64)
    raw_groups = []
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        try:
            X[r - 2] = [float(row[i]) for i in feat_idx]
        except ValueError:
            raise ValueError(f"{path}:{r}: non-numeric feature value") from None
        try:
            lab = float(row[li])
        except ValueError:
            raise ValueError(f"{path}:{r}: non-numeric label {row[li]!r}") from None
        if lab not in (0.0, 1.0):
            raise ValueError(f"{path}:{r}: label must be 0 or 1, got {row[li]!r}")
        y[r - 2] = int(lab)
        raw_groups.append(row[gi])
    codes = sorted(set(raw_groups), key=_sort_key)
    if len(codes) < 2:
        raise ValueError(f"{path}: the group column has a single value")
    mapping = {c: i + 1 for i, c in enumerate(codes)}
    z = np.array([mapping[g] for g in raw_groups])
    if not feat_idx:
        raise ValueError(f"{path}: no feature columns")
    return CsvLoad(Dataset(X, y, z, len(codes)), [header[i] for i in feat_idx], mapping)


def save_csv(dataset: Dataset, path, label_column: str = "label", group_column: str = "group",
             feature_names=None) -> None:
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(dataset.dim)]
    if len(names) != dataset.dim:
        raise ValueError("one feature name per column is required")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + [label_column, group_column])
        for x, yv, zv in zip(dataset.X, dataset.y, dataset.z):
            # repr round-trips doubles exactly
            w.writerow([repr(float(v)) for v in x] + [int(yv), int(zv)])


def split_train_test(dataset: Dataset, train_fraction: float = 0.7, seed: int = 0, max_tries: int = 100):
    """Uniform random split into ``floor(f*N)`` training and remaining test samples.

    Reshuffles until both parts contain every group.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(np.floor(train_fraction * dataset.n + 1e-9))
    if n_train < dataset.p or dataset.n - n_train < dataset.p:
        raise ValueError("split too small to hold every group on both sides")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        perm = rng.permutation(dataset.n)
        tr, te = perm[:n_train], perm[n_train:]
        full = set(range(1, dataset.p + 1))
        if set(dataset.z[tr].tolist()) == full and set(dataset.z[te].tolist()) == full:
            return dataset.take(tr), dataset.take(te)
    raise ValueError(f"no split with every group on both sides after {max_tries} shuffles")
