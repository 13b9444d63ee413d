"""Test the bagged random forest."""

import numpy as np
import pytest

from credit_stack.errors import ConfigError
from credit_stack.learners.forest import (
    ForestModel,
    ForestParams,
    MaxFeatures,
    fit_forest,
)
from credit_stack.learners.tree import TreeParams, fit_tree, node_to_dict
from credit_stack.metrics import predict_labels
from credit_stack.preprocess import stratified_split
from credit_stack.synthetic import gaussian_mixture
from credit_stack.tabular import LabeledDataset

SMALL_FOREST = ForestParams(n_trees=15, tree=TreeParams(max_depth=5))


def test_degenerate_forest_equals_tree(overlapping: LabeledDataset) -> None:
    """Test one unbagged tree over all features is the plain tree."""
    tree_params = TreeParams(max_depth=4, min_samples_leaf=2)
    forest = fit_forest(
        overlapping,
        ForestParams(
            n_trees=1, bootstrap=False, max_features=MaxFeatures.ALL, tree=tree_params
        ),
        seed=3,
    )
    tree = fit_tree(overlapping, tree_params, seed=3)
    assert node_to_dict(forest.trees[0]) == node_to_dict(tree.root)
    assert np.array_equal(
        forest.predict_proba(overlapping.features),
        tree.predict_proba(overlapping.features),
    )


def test_predictions_are_distributions(overlapping: LabeledDataset) -> None:
    """Test averaged rows still sum to one."""
    probabilities = fit_forest(overlapping, SMALL_FOREST, seed=1).predict_proba(
        overlapping.features
    )
    assert (probabilities >= 0).all()
    assert np.allclose(probabilities.sum(axis=1), 1.0, atol=1e-9)


def test_tree_order_does_not_matter(overlapping: LabeledDataset) -> None:
    """Test permuting the trees leaves predictions unchanged."""
    model = fit_forest(overlapping, SMALL_FOREST, seed=2)
    shuffled = ForestModel(
        tuple(reversed(model.trees)), model.params, model.n_features, model.n_classes
    )
    assert np.allclose(
        model.predict_proba(overlapping.features),
        shuffled.predict_proba(overlapping.features),
        rtol=0,
        atol=1e-12,
    )


def test_fit_is_deterministic_across_workers(overlapping: LabeledDataset) -> None:
    """Test serial and parallel fits build identical trees."""
    serial = fit_forest(overlapping, SMALL_FOREST, seed=5, n_jobs=1)
    parallel = fit_forest(overlapping, SMALL_FOREST, seed=5, n_jobs=2)
    assert serial.to_dict() == parallel.to_dict()
    assert fit_forest(overlapping, SMALL_FOREST, seed=6).to_dict() != serial.to_dict()


def test_forest_is_not_worse_than_a_tree() -> None:
    """Test forest accuracy stays within 0.02 of a single tree, median of 5 seeds."""
    gaps = []
    for seed in range(5):
        train, test = stratified_split(
            gaussian_mixture(900, seed, n_features=6), 0.3, seed
        )
        tree = fit_tree(train, seed=seed)
        forest = fit_forest(train, ForestParams(n_trees=60), seed=seed)
        tree_accuracy = np.mean(
            predict_labels(tree.predict_proba(test.features)) == test.labels
        )
        forest_accuracy = np.mean(
            predict_labels(forest.predict_proba(test.features)) == test.labels
        )
        gaps.append(forest_accuracy - tree_accuracy)

    assert float(np.median(gaps)) >= -0.02


def test_serialization(overlapping: LabeledDataset) -> None:
    """Test a serialized forest predicts identically."""
    model = fit_forest(overlapping, SMALL_FOREST, seed=8)
    restored = ForestModel.from_dict(model.to_dict())
    assert restored.params == model.params
    assert np.array_equal(
        restored.predict_proba(overlapping.features),
        model.predict_proba(overlapping.features),
    )


def test_params_from_flat_mapping() -> None:
    """Test forest and tree keys share one flat mapping."""
    params = ForestParams.from_mapping(
        {"n_trees": "50", "bootstrap": "false", "max_depth": "4", "max_features": "all"}
    )
    assert params.n_trees == 50
    assert params.bootstrap is False
    assert params.max_features is MaxFeatures.ALL
    assert params.tree == TreeParams(max_depth=4)
    assert ForestParams.from_mapping(params.to_dict()) == params


def test_sqrt_candidates() -> None:
    """Test the default considers ceil(sqrt(d)) features per split."""
    assert ForestParams().n_candidates(23) == 5
    assert ForestParams().n_candidates(1) == 1
    assert ForestParams(max_features=MaxFeatures.ALL).n_candidates(23) == 23


@pytest.mark.parametrize("mapping", [{"n_trees": "0"}, {"bootstrap": "maybe"}])
def test_invalid_params(mapping: dict[str, str]) -> None:
    """Test invalid values are configuration errors."""
    with pytest.raises(ConfigError, match="invalid forest parameters"):
        ForestParams.from_mapping(mapping)
