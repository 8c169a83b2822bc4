import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairguard.classifier import (
    LinearClassifier,
    logistic_loss,
    predict_dataset,
    predict_hard,
    predict_proba_dataset,
    predict_soft,
)
from fairguard.metrics import Dataset, Sample


def s(x, z=1):
    return Sample(np.asarray(x, float), 0, z)


def test_hard_predictions():
    assert predict_hard(LinearClassifier([1, 0]), s([2, 5])) == 1
    assert predict_hard(LinearClassifier([1, 0]), s([-2, 5])) == 0
    assert predict_hard(LinearClassifier([1, -1]), s([3, 3])) == 1


def test_soft_predictions():
    assert predict_soft(LinearClassifier([0.0]), s([1.0])) == 0.5
    assert math.isclose(predict_soft(LinearClassifier([math.log(3)]), s([1.0])), 0.75, rel_tol=1e-12)
    assert abs(predict_soft(LinearClassifier([1.0], temperature=1e12), s([1.0])) - 0.5) < 1e-9


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        predict_hard(LinearClassifier([1, 0, 0]), s([1, 2]))


def test_protected_feature_appended():
    clf = LinearClassifier([0.0, 1.0], use_protected=True)
    ds = Dataset([[5.0], [5.0]], [0, 1], [1, 2], 2)
    assert clf.dim == 1
    np.testing.assert_allclose(predict_proba_dataset(clf, ds), 1 / (1 + np.exp(-np.array([1.0, 2.0]))))


def test_invalid_classifier():
    with pytest.raises(ValueError):
        LinearClassifier([np.inf])
    with pytest.raises(ValueError):
        LinearClassifier([1.0], temperature=0.0)


def test_serialization_round_trip():
    clf = LinearClassifier([0.1, -2.0], True, 0.5)
    back = LinearClassifier.from_dict(clf.to_dict())
    assert back.use_protected and back.temperature == 0.5
    np.testing.assert_array_equal(back.theta, clf.theta)


def test_loss_examples():
    ds = Dataset(np.random.default_rng(0).normal(size=(7, 3)), [0, 1, 1, 0, 1, 0, 1], [1] * 7, 1)
    assert abs(logistic_loss(LinearClassifier(np.zeros(3)), ds)[0] - math.log(2)) < 1e-12
    one = Dataset([[1.0]], [1], [1], 1)
    assert math.isclose(logistic_loss(LinearClassifier([math.log(3)]), one)[0], math.log(4 / 3), rel_tol=1e-12)


def test_loss_clamped():
    one = Dataset([[1.0]], [0], [1], 1)
    loss, grad = logistic_loss(LinearClassifier([1e4]), one)
    assert math.isfinite(loss) and abs(loss + math.log(1e-12)) < 1e-3
    assert np.all(np.isfinite(grad))


def _random_instance(seed, n=10, d=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n)
    return Dataset(X, y, np.ones(n, int), 1), rng.normal(size=d)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    ds, theta = _random_instance(seed)
    _, g = logistic_loss(LinearClassifier(theta), ds)
    h = 1e-5
    fd = np.array([
        (logistic_loss(LinearClassifier(theta + h * e), ds)[0] - logistic_loss(LinearClassifier(theta - h * e), ds)[0]) / (2 * h)
        for e in np.eye(theta.size)
    ])
    assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2),
       st.floats(1e-3, 1e3))
def test_hard_soft_consistency_and_scale_invariance(theta, x, c):
    margin = float(np.dot(theta, x))
    if abs(margin) < 1e-9:
        return
    clf = LinearClassifier(theta)
    hard = predict_hard(clf, s(x))
    assert hard == int(margin > 0)
    assert hard == int(predict_soft(clf, s(x)) > 0.5)
    assert predict_hard(LinearClassifier(np.asarray(theta) * c), s(x)) == hard


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_loss_convex_along_segments(seed):
    ds, t1 = _random_instance(seed)
    t2 = np.random.default_rng(seed + 1).normal(size=t1.size) * 3
    f = lambda t: logistic_loss(LinearClassifier(t), ds)[0]
    assert f((t1 + t2) / 2) <= (f(t1) + f(t2)) / 2 + 1e-9


def test_predict_dataset_matches_samples():
    ds, theta = _random_instance(3)
    clf = LinearClassifier(theta)
    assert predict_dataset(clf, ds).tolist() == [predict_hard(clf, smp) for smp in ds]
