"""Test the baseline learners."""

import numpy as np
import pytest

from credit_stack.errors import ConfigError, DataError
from credit_stack.learners.dummy import DummyModel, DummyParams, Strategy, fit_dummy
from credit_stack.tabular import LabeledDataset

from .conftest import DatasetFactory


def test_prior_strategy(blobs: DatasetFactory) -> None:
    """Test the prior strategy predicts the training frequencies."""
    ds = blobs((2, 6, 2))
    model = fit_dummy(ds)
    assert model.predict_proba(ds.features[:2]).tolist() == [[0.2, 0.6, 0.2]] * 2


def test_uniform_strategy(blobs: DatasetFactory) -> None:
    """Test the uniform strategy ignores the class counts."""
    model = fit_dummy(blobs((2, 6)), DummyParams(strategy=Strategy.UNIFORM))
    assert model.distribution == (0.5, 0.5)


def test_constant_strategy(blobs: DatasetFactory) -> None:
    """Test the constant strategy repeats the configured distribution."""
    params = DummyParams.from_mapping(
        {"strategy": "constant", "probabilities": "0.1,0.2,0.7"}
    )
    model = fit_dummy(blobs(), params)
    assert model.predict_proba(np.zeros((3, 2))).tolist() == [[0.1, 0.2, 0.7]] * 3


def test_constant_strategy_width(blobs: DatasetFactory) -> None:
    """Test the constant distribution needs one entry per class."""
    params = DummyParams(strategy=Strategy.CONSTANT, probabilities=(0.5, 0.5))
    with pytest.raises(ConfigError, match="2 probabilities for 3 classes"):
        fit_dummy(blobs(), params)


@pytest.mark.parametrize(
    "probabilities", [(), (0.5, 0.6), (-0.1, 1.1)]
)
def test_constant_strategy_validation(probabilities: tuple[float, ...]) -> None:
    """Test the constant distribution must be a probability vector."""
    with pytest.raises(ConfigError):
        DummyParams(strategy=Strategy.CONSTANT, probabilities=probabilities)


def test_random_strategy_is_seeded(blobs: DatasetFactory) -> None:
    """Test random rows are distributions reproducible from the seed."""
    ds = blobs()
    params = DummyParams(strategy=Strategy.RANDOM)
    first = fit_dummy(ds, params, seed=3).predict_proba(ds.features)
    again = fit_dummy(ds, params, seed=3).predict_proba(ds.features)
    other = fit_dummy(ds, params, seed=4).predict_proba(ds.features)
    assert np.allclose(first.sum(axis=1), 1.0)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_prior_of_empty_training_set() -> None:
    """Test priors need at least one row."""
    empty = LabeledDataset(np.empty((0, 1)), np.empty(0), ("x",))
    with pytest.raises(DataError):
        fit_dummy(empty)


def test_unknown_strategy() -> None:
    """Test unknown strategies are configuration errors."""
    with pytest.raises(ConfigError, match="invalid dummy parameters"):
        DummyParams.from_mapping({"strategy": "stratified"})


def test_serialization(blobs: DatasetFactory) -> None:
    """Test a serialized model predicts identically."""
    ds = blobs((3, 5, 2))
    for strategy in Strategy:
        probabilities = (0.2, 0.3, 0.5) if strategy is Strategy.CONSTANT else ()
        model = fit_dummy(ds, DummyParams(strategy, probabilities), seed=8)
        restored = DummyModel.from_dict(model.to_dict())
        assert restored == model
        assert np.array_equal(
            restored.predict_proba(ds.features), model.predict_proba(ds.features)
        )
