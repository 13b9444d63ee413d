"""Test out-of-fold stacking and soft voting."""

import dataclasses

import numpy as np
import pytest

from credit_stack.errors import ConfigError, DataError
from credit_stack.learners import LearnerKind
from credit_stack.learners.dummy import DummyParams, Strategy
from credit_stack.learners.forest import ForestParams, MaxFeatures
from credit_stack.learners.knn import KnnParams
from credit_stack.learners.logistic import LogisticParams
from credit_stack.learners.tree import TreeParams
from credit_stack.metrics import evaluate
from credit_stack.stacking import (
    BaseSpec,
    MetaFeatures,
    SoftVoteModel,
    StackingModel,
    assemble_meta_features,
    build_layout,
    check_bases,
    fit_soft_vote,
    fit_stacking,
    oof_meta_features,
    predict_stacking,
    stacked_bases,
    stratified_folds,
)
from credit_stack.tabular import LabeledDataset

from .conftest import DatasetFactory

META = ForestParams(n_trees=10, tree=TreeParams(max_depth=4))
EXHAUSTIVE_META = dataclasses.replace(META, n_trees=25, max_features=MaxFeatures.ALL)
BASES = (
    BaseSpec("tree", LearnerKind.TREE, TreeParams(max_depth=3)),
    BaseSpec("knn", LearnerKind.KNN, KnnParams(k=5)),
    BaseSpec("logistic", LearnerKind.LOGISTIC, LogisticParams(max_iter=50)),
)


def test_layout_puts_features_first() -> None:
    """Test the meta input keeps X bitwise and appends base columns."""
    names = tuple(f"f{index}" for index in range(23))
    classes = ("Poor", "Standard", "Good")
    layout = build_layout(names, ["a", "b", "c"], classes)
    assert len(layout) == 32
    assert [column.source for column in layout[:23]] == [None] * 23
    assert [column.label for column in layout[23:26]] == [
        "a:Poor",
        "a:Standard",
        "a:Good",
    ]

    rng = np.random.default_rng(3)
    features = rng.normal(size=(7, 23))
    blocks = {name: rng.dirichlet(np.ones(3), size=7) for name in ("a", "b", "c")}
    meta = assemble_meta_features(features, blocks, layout)
    assert meta.shape == (7, 32)
    assert meta[:, :23].tobytes() == features.tobytes()
    assert np.array_equal(meta[:, 26:29], blocks["b"])


def test_stratified_folds_balance(overlapping: LabeledDataset) -> None:
    """Test fold sizes differ by at most one, per class and overall."""
    folds = stratified_folds(overlapping.labels, overlapping.class_names, 5, seed=1)
    sizes = np.bincount(folds, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    for code in range(3):
        per_class = np.bincount(folds[overlapping.labels == code], minlength=5)
        assert per_class.max() - per_class.min() <= 1


def test_stratified_folds_errors(blobs: DatasetFactory) -> None:
    """Test invalid fold requests."""
    ds = blobs((4, 4, 4))
    with pytest.raises(ConfigError, match="at least 2 folds"):
        stratified_folds(ds.labels, ds.class_names, 1)
    with pytest.raises(DataError, match="13 folds requested for 12 rows"):
        stratified_folds(ds.labels, ds.class_names, 13)

    lonely = blobs((4, 4, 1))
    with pytest.raises(DataError, match="class Good has 1 row"):
        stratified_folds(lonely.labels, lonely.class_names, 3)


def test_oof_rows_never_see_their_own_label() -> None:
    """Test a one-neighbor base memorizes in-sample rows but not out-of-fold ones."""
    rng = np.random.default_rng(5)
    features = rng.normal(size=(120, 2))
    labels = rng.integers(0, 3, size=120)
    ds = LabeledDataset(features, labels, ("a", "b"))
    spec = BaseSpec("knn", LearnerKind.KNN, KnnParams(k=1))

    leaky = fit_stacking(ds, [spec], META, seed=2, meta_features=MetaFeatures.IN_SAMPLE)
    assert leaky.meta_features is MetaFeatures.IN_SAMPLE
    in_sample = leaky.meta_input(features)[:, 2:5]
    assert np.mean(in_sample.argmax(axis=1) == labels) == 1.0

    oof = oof_meta_features(ds, [spec], n_folds=5, seed=2)
    assert np.mean(oof.block("knn").argmax(axis=1) == labels) < 0.6


def test_oof_constant_base(overlapping: LabeledDataset) -> None:
    """Test every out-of-fold row of a constant base is its distribution."""
    spec = BaseSpec(
        "constant",
        LearnerKind.DUMMY,
        DummyParams(Strategy.CONSTANT, (0.2, 0.5, 0.3)),
    )
    oof = oof_meta_features(overlapping, [spec], n_folds=4, seed=0)
    assert oof.values.shape == (overlapping.n_rows, 3)
    assert np.array_equal(oof.values, np.tile([0.2, 0.5, 0.3], (overlapping.n_rows, 1)))


def test_oof_blocks_follow_base_names(overlapping: LabeledDataset) -> None:
    """Test reordering deterministic bases reorders their blocks only."""
    knn, logistic = BASES[1], BASES[2]
    forward = oof_meta_features(overlapping, [knn, logistic], n_folds=3, seed=4)
    backward = oof_meta_features(overlapping, [logistic, knn], n_folds=3, seed=4)
    assert np.array_equal(forward.block("knn"), backward.block("knn"))
    assert np.array_equal(forward.block("logistic"), backward.block("logistic"))
    assert np.array_equal(forward.folds, backward.folds)
    assert np.allclose(forward.values.reshape(-1, 3).sum(axis=1), 1.0)


def test_fit_stacking(overlapping: LabeledDataset) -> None:
    """Test the fitted ensemble predicts distributions from raw rows."""
    model = fit_stacking(overlapping, BASES, META, n_folds=3, seed=6)
    assert model.meta_model.n_features == overlapping.n_features + 9
    assert model.meta_input(overlapping.features).shape == (overlapping.n_rows, 11)

    probabilities = model.predict_proba(overlapping.features)
    assert probabilities.shape == (overlapping.n_rows, 3)
    assert np.allclose(probabilities.sum(axis=1), 1.0)
    accuracy = np.mean(probabilities.argmax(axis=1) == overlapping.labels)
    assert accuracy > 0.6


def test_fit_stacking_is_deterministic(overlapping: LabeledDataset) -> None:
    """Test thread count and repetition leave the ensemble unchanged."""
    first = fit_stacking(overlapping, BASES, META, n_folds=3, seed=6)
    second = fit_stacking(overlapping, BASES, META, n_folds=3, seed=6, n_jobs=2)
    assert first.to_dict() == second.to_dict()


def test_perfect_base_gives_perfect_training_accuracy(
    separated: LabeledDataset,
) -> None:
    """Test an ensemble over one flawless base fits its training rows exactly."""
    spec = BaseSpec("knn", LearnerKind.KNN, KnnParams(k=1))
    oof = oof_meta_features(separated, [spec], n_folds=5, seed=3)
    assert np.mean(oof.block("knn").argmax(axis=1) == separated.labels) == 1.0

    model = fit_stacking(separated, [spec], EXHAUSTIVE_META, seed=3)
    probabilities = predict_stacking(model, separated.features)
    assert np.mean(probabilities.argmax(axis=1) == separated.labels) == 1.0


def test_random_base_barely_moves_macro_f1(
    separated: LabeledDataset, blobs: DatasetFactory
) -> None:
    """Test a base emitting random distributions costs at most 0.02 macro F1."""
    test = blobs((30, 30, 30), seed=7, spread=0.3)
    knn = BaseSpec("knn", LearnerKind.KNN, KnnParams(k=5))
    noise = BaseSpec("noise", LearnerKind.DUMMY, DummyParams(Strategy.RANDOM))

    plain = fit_stacking(separated, [knn], EXHAUSTIVE_META, seed=4)
    noisy = fit_stacking(separated, [knn, noise], EXHAUSTIVE_META, seed=4)
    assert noisy.meta_model.n_features == separated.n_features + 6

    plain_f1 = evaluate(plain, test, "Stacking").f1
    noisy_f1 = evaluate(noisy, test, "Stacking").f1
    assert plain_f1 > 0.95
    assert noisy_f1 >= plain_f1 - 0.02


def test_base_order_follows_layout(overlapping: LabeledDataset) -> None:
    """Test reordering the roster reorders meta columns and keeps predictions."""
    knn, logistic = BASES[1], BASES[2]
    forward = fit_stacking(overlapping, [knn, logistic], META, n_folds=3, seed=5)

    reordered = dataclasses.replace(forward, bases=tuple(reversed(forward.bases)))
    assert np.array_equal(
        predict_stacking(reordered, overlapping.features),
        predict_stacking(forward, overlapping.features),
    )

    backward = fit_stacking(overlapping, [logistic, knn], META, n_folds=3, seed=5)
    assert backward.layout[2].label == "logistic:Poor"
    labels = [column.label for column in backward.layout]
    order = [labels.index(column.label) for column in forward.layout]
    assert np.array_equal(
        backward.meta_input(overlapping.features)[:, order],
        forward.meta_input(overlapping.features),
    )


def test_constant_bases_end_to_end(overlapping: LabeledDataset) -> None:
    """Test constant bases fill their layout blocks and the ensemble still predicts."""
    first = (0.2, 0.5, 0.3)
    second = (0.6, 0.1, 0.3)
    bases = [
        BaseSpec("first", LearnerKind.DUMMY, DummyParams(Strategy.CONSTANT, first)),
        BaseSpec("second", LearnerKind.DUMMY, DummyParams(Strategy.CONSTANT, second)),
    ]
    model = fit_stacking(overlapping, bases, META, n_folds=3, seed=6)
    sources = [column.source for column in model.layout]
    assert sources == [None, None, *["first"] * 3, *["second"] * 3]

    meta = model.meta_input(overlapping.features)
    rows = overlapping.n_rows
    assert np.allclose(meta[:, 2:5], np.tile(first, (rows, 1)))
    assert np.allclose(meta[:, 5:8], np.tile(second, (rows, 1)))

    probabilities = predict_stacking(model, overlapping.features)
    assert probabilities.shape == (rows, 3)
    assert np.allclose(probabilities.sum(axis=1), 1.0, atol=1e-9)


def test_predict_rejects_wrong_width(overlapping: LabeledDataset) -> None:
    """Test rows of the wrong width are data errors."""
    model = fit_stacking(overlapping, BASES[1:], META, n_folds=3, seed=7)
    with pytest.raises(DataError, match="expected 2 feature columns, got 1"):
        predict_stacking(model, overlapping.features[:, :1])
    with pytest.raises(DataError, match="expected 2 feature columns, got 3"):
        predict_stacking(model, np.zeros((4, 3)))


def test_in_sample_meta_features(overlapping: LabeledDataset) -> None:
    """Test the in-sample variant is recorded and still predicts."""
    model = fit_stacking(
        overlapping, BASES, META, seed=1, meta_features=MetaFeatures.IN_SAMPLE
    )
    assert model.meta_features is MetaFeatures.IN_SAMPLE
    assert model.predict_proba(overlapping.features[:5]).shape == (5, 3)


def test_stacking_serialization(overlapping: LabeledDataset) -> None:
    """Test a serialized ensemble predicts identically."""
    model = fit_stacking(overlapping, BASES, META, n_folds=3, seed=2)
    restored = StackingModel.from_dict(model.to_dict())
    assert restored.layout == model.layout
    assert np.array_equal(
        restored.predict_proba(overlapping.features),
        model.predict_proba(overlapping.features),
    )


def test_soft_vote_averages_bases(overlapping: LabeledDataset) -> None:
    """Test soft voting is the mean of the refit bases."""
    model = fit_soft_vote(overlapping, BASES, seed=3)
    expected = np.mean(
        [base.model.predict_proba(overlapping.features) for base in model.bases],
        axis=0,
    )
    assert np.allclose(model.predict_proba(overlapping.features), expected)

    restored = SoftVoteModel.from_dict(model.to_dict())
    assert np.array_equal(
        restored.predict_proba(overlapping.features),
        model.predict_proba(overlapping.features),
    )


def test_base_roster_validation() -> None:
    """Test rosters need unique, non-empty names."""
    with pytest.raises(ConfigError, match="at least one base model"):
        check_bases([])
    with pytest.raises(ConfigError, match="duplicate base model name 'knn'"):
        check_bases([BASES[1], BaseSpec("knn", LearnerKind.TREE)])
    with pytest.raises(ConfigError):
        BaseSpec("", LearnerKind.TREE)
    with pytest.raises(ConfigError, match="unknown model kind 'svm'"):
        BaseSpec("svm", "svm")


def test_base_spec_defaults_and_round_trip() -> None:
    """Test missing parameters become defaults and specs serialize."""
    spec = BaseSpec("forest", "forest")
    assert spec.kind is LearnerKind.FOREST
    assert spec.params == ForestParams()
    assert BaseSpec.from_dict(spec.to_dict()) == spec


def test_comparison_only_spec_round_trip() -> None:
    """Test the stack flag serializes and defaults to stacking."""
    spec = BaseSpec("Decision Tree", LearnerKind.TREE, stack=False)
    assert BaseSpec.from_dict(spec.to_dict()) == spec
    legacy = {key: value for key, value in spec.to_dict().items() if key != "stack"}
    assert BaseSpec.from_dict(legacy).stack is True
    assert stacked_bases([*BASES, spec]) == BASES
