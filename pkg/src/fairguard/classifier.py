"""Linear classifiers with logistic loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import Dataset, Sample

__all__ = [
    "LinearClassifier",
    "sigmoid",
    "design_matrix",
    "predict_hard",
    "predict_soft",
    "predict_dataset",
    "predict_proba_dataset",
    "logistic_loss",
    "PROB_CLAMP",
]

PROB_CLAMP = 1e-12


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """Predicts ``1[<x, theta> >= 0]``.

    With ``use_protected`` the group code is appended to ``x`` as an extra
    real feature.  ``temperature`` only affects :func:`predict_soft`.
    """

    theta: np.ndarray
    use_protected: bool = False
    temperature: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.size - int(self.use_protected)

    def to_dict(self) -> dict:
        return {
            "theta": [float(v) for v in self.theta],
            "use_protected": bool(self.use_protected),
            "temperature": float(self.temperature),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        return cls(np.asarray(d["theta"], dtype=float), bool(d.get("use_protected", False)),
                   float(d.get("temperature", 1.0)))


def _features(clf: LinearClassifier, x, z) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if clf.use_protected:
        x = np.concatenate([x, [float(z)]])
    if x.shape != clf.theta.shape:
        raise ValueError(f"feature dimension {x.shape[0]} does not match theta ({clf.theta.size})")
    return x


def design_matrix(clf: LinearClassifier, dataset: Dataset) -> np.ndarray:
    X = dataset.X
    if clf.use_protected:
        X = np.column_stack([X, dataset.z.astype(np.float64)])
    if X.shape[1] != clf.theta.size:
        raise ValueError(f"feature dimension {X.shape[1]} does not match theta ({clf.theta.size})")
    return X


def predict_hard(clf: LinearClassifier, sample: Sample) -> int:
    return int(_features(clf, sample.features, sample.group) @ clf.theta >= 0.0)


def predict_soft(clf: LinearClassifier, sample: Sample) -> float:
    t = _features(clf, sample.features, sample.group) @ clf.theta
    return float(sigmoid(np.array([t / clf.temperature]))[0])


def predict_dataset(clf: LinearClassifier, dataset: Dataset) -> np.ndarray:
    return (design_matrix(clf, dataset) @ clf.theta >= 0.0).astype(np.int64)


def predict_proba_dataset(clf: LinearClassifier, dataset: Dataset, temperature: float | None = None) -> np.ndarray:
    t = clf.temperature if temperature is None else temperature
    return sigmoid(design_matrix(clf, dataset) @ clf.theta / t)


def logistic_loss(clf: LinearClassifier, dataset: Dataset) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient in ``theta``.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]`` before the logs; the
    gradient is that of the unclamped loss, ``mean((sigma - y) x)``.
    """
    X = design_matrix(clf, dataset)
    s = sigmoid(X @ clf.theta)
    sc = np.clip(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = dataset.y
    loss = -np.mean(y * np.log(sc) + (1 - y) * np.log1p(-sc))
    grad = X.T @ (s - y) / dataset.n
    return float(loss), grad
