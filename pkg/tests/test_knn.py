"""Test the k-nearest-neighbor learner."""

import numpy as np
import pytest

from credit_stack.errors import ConfigError, DataError
from credit_stack.learners.knn import KnnModel, KnnParams, fit_knn
from credit_stack.tabular import LabeledDataset

THREE_POINTS = LabeledDataset(
    np.array([[0.0], [1.0], [10.0]]), np.array([0, 0, 1]), ("x",), ("Poor", "Good")
)


def test_k_one_recovers_training_labels(overlapping: LabeledDataset) -> None:
    """Test a training row is its own nearest neighbor."""
    model = fit_knn(overlapping, KnnParams(k=1))
    probabilities = model.predict_proba(overlapping.features[:20])
    assert probabilities.max(axis=1).tolist() == [1.0] * 20
    assert probabilities.argmax(axis=1).tolist() == overlapping.labels[:20].tolist()


def test_k_all_rows_gives_priors(overlapping: LabeledDataset) -> None:
    """Test voting over every training row predicts the class frequencies."""
    model = fit_knn(overlapping, KnnParams(k=overlapping.n_rows))
    priors = overlapping.class_counts() / overlapping.n_rows
    assert np.allclose(model.predict_proba([[0.0, 0.0], [9.0, 9.0]]), priors)


def test_three_point_vote() -> None:
    """Test the neighbor frequencies of a small example."""
    model = fit_knn(THREE_POINTS, KnnParams(k=3))
    assert model.predict_proba([[0.5]]).tolist() == [[2 / 3, 1 / 3]]

    nearest_two = fit_knn(THREE_POINTS, KnnParams(k=2)).predict_proba([[9.0]])
    assert nearest_two.tolist() == [[0.5, 0.5]]


def test_features_are_standardized() -> None:
    """Test a large-scale column does not swamp a small-scale one."""
    ds = LabeledDataset(
        np.array([[0.0, 0.0], [0.0, 1000.0], [1.0, 0.0], [1.0, 1000.0]]),
        np.array([0, 0, 1, 1]),
        ("small", "large"),
        ("Poor", "Good"),
    )
    model = fit_knn(ds, KnnParams(k=1))
    assert model.predict_proba([[0.9, 10.0]]).tolist() == [[0.0, 1.0]]


def test_k_exceeds_training_rows() -> None:
    """Test k must not exceed the training rows."""
    with pytest.raises(DataError, match="k = 4 exceeds the 3 training rows"):
        fit_knn(THREE_POINTS, KnnParams(k=4))


def test_params_validation() -> None:
    """Test k must be a positive integer."""
    assert KnnParams.from_mapping({"k": "7"}) == KnnParams(k=7)
    with pytest.raises(ConfigError, match="invalid kNN parameters"):
        KnnParams.from_mapping({"k": "0"})
    with pytest.raises(ConfigError):
        KnnParams(k=0)


def test_serialization(overlapping: LabeledDataset) -> None:
    """Test a serialized model predicts identically."""
    model = fit_knn(overlapping, KnnParams(k=7))
    restored = KnnModel.from_dict(model.to_dict())
    assert restored.n_features == 2
    assert restored.n_classes == 3
    assert np.array_equal(
        restored.predict_proba(overlapping.features),
        model.predict_proba(overlapping.features),
    )
