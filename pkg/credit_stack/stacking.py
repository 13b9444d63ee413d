"""Stacked generalization: out-of-fold base predictions feed a forest meta-model."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt

from .const import DEFAULT_N_FOLDS, LOGGER
from .errors import ConfigError, DataError
from .learners import (
    Classifier,
    LearnerKind,
    fit_learner,
    learner_kind,
    model_from_dict,
    params_from_mapping,
)
from .learners.base import check_features, check_header, model_header
from .learners.forest import ForestModel, ForestParams, fit_forest
from .parallel import run_parallel
from .seeding import Stream, derive_rng, derive_seed
from .tabular import LabeledDataset


class MetaFeatures(StrEnum):
    """Where the meta-model's base-prediction columns come from."""

    OOF = "oof"
    IN_SAMPLE = "in_sample"


@dataclass(frozen=True)
class BaseSpec:
    """A named base learner and its parameters.

    Entries with stack=False are fit and reported on their own but never feed
    an ensemble.
    """

    name: str
    kind: LearnerKind
    params: Any = None
    stack: bool = True

    def __post_init__(self) -> None:
        """Coerce the kind and fill in default parameters."""
        if not self.name:
            raise ConfigError("base model names must be non-empty")
        kind = learner_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.params is None:
            object.__setattr__(self, "params", params_from_mapping(kind, {}))

    def to_dict(self) -> dict[str, Any]:
        """Serialize the roster entry."""
        return {
            "name": self.name,
            "kind": str(self.kind),
            "params": self.params.to_dict(),
            "stack": self.stack,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BaseSpec":
        """Deserialize a roster entry."""
        kind = learner_kind(data["kind"])
        return cls(
            str(data["name"]),
            kind,
            params_from_mapping(kind, data["params"]),
            bool(data.get("stack", True)),
        )


def check_bases(bases: Sequence[BaseSpec]) -> None:
    """Require at least one base and unique names."""
    if not bases:
        raise ConfigError("an ensemble needs at least one base model")

    names = [spec.name for spec in bases]
    for name in names:
        if names.count(name) > 1:
            raise ConfigError(f"duplicate base model name '{name}'")


def stacked_bases(bases: Sequence[BaseSpec]) -> tuple[BaseSpec, ...]:
    """Return the roster entries that feed the ensembles, in roster order."""
    return tuple(spec for spec in bases if spec.stack)


@dataclass(frozen=True)
class MetaColumn:
    """One column of the meta-model input.

    source is None for an original feature, otherwise the base model name.
    """

    source: str | None
    index: int
    label: str

    def to_dict(self) -> dict[str, Any]:
        """Serialize the column."""
        return {"source": self.source, "index": self.index, "label": self.label}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetaColumn":
        """Deserialize the column."""
        return cls(data["source"], int(data["index"]), str(data["label"]))


def build_layout(
    feature_names: Sequence[str],
    base_names: Sequence[str],
    class_names: Sequence[str],
) -> tuple[MetaColumn, ...]:
    """Original features first, then one column per (base, class)."""
    layout = [MetaColumn(None, index, name) for index, name in enumerate(feature_names)]
    for base in base_names:
        layout.extend(
            MetaColumn(base, code, f"{base}:{name}")
            for code, name in enumerate(class_names)
        )

    return tuple(layout)


def assemble_meta_features(
    features: npt.NDArray[np.float64],
    base_probabilities: Mapping[str, npt.NDArray[np.float64]],
    layout: Sequence[MetaColumn],
) -> npt.NDArray[np.float64]:
    """Build the meta-model input matrix column by column from the layout."""
    meta = np.empty((features.shape[0], len(layout)))
    for position, column in enumerate(layout):
        if column.source is None:
            meta[:, position] = features[:, column.index]
        else:
            meta[:, position] = base_probabilities[column.source][:, column.index]

    return meta


@dataclass(frozen=True, eq=False)
class OofMatrix:
    """Out-of-fold base probabilities, bases concatenated in roster order."""

    values: npt.NDArray[np.float64]
    folds: npt.NDArray[np.int64]
    base_names: tuple[str, ...]
    n_classes: int

    def block(self, base: int | str) -> npt.NDArray[np.float64]:
        """Return the probability columns of one base."""
        index = self.base_names.index(base) if isinstance(base, str) else base
        return self.values[:, index * self.n_classes : (index + 1) * self.n_classes]

    def by_name(self) -> dict[str, npt.NDArray[np.float64]]:
        """Return every base's block keyed by base name."""
        return {name: self.block(index) for index, name in enumerate(self.base_names)}


def stratified_folds(
    labels: npt.ArrayLike,
    class_names: Sequence[str],
    n_folds: int = DEFAULT_N_FOLDS,
    seed: int = 0,
) -> npt.NDArray[np.int64]:
    """Assign folds class by class, round-robin over shuffled rows.

    A running counter continues across classes, so fold sizes differ by at
    most one and n_folds may equal the row count.
    """
    codes = np.asarray(labels, dtype=np.int64)
    if n_folds < 2:
        raise ConfigError(f"stacking needs at least 2 folds, got {n_folds}")
    if n_folds > len(codes):
        raise DataError(f"{n_folds} folds requested for {len(codes)} rows")

    folds = np.empty(len(codes), dtype=np.int64)
    counter = 0
    for code, name in enumerate(class_names):
        rows = np.flatnonzero(codes == code)
        if len(rows) == 0:
            continue
        if len(rows) < 2:
            raise DataError(
                f"class {name} has 1 row; stratified folding needs at least 2"
            )

        rng = derive_rng(seed, Stream.FOLDS, code)
        shuffled = rng.permutation(rows)
        folds[shuffled] = (counter + np.arange(len(rows))) % n_folds
        counter += len(rows)

    return folds


def _fit_fold(
    train: LabeledDataset,
    folds: npt.NDArray[np.int64],
    fold: int,
    spec: BaseSpec,
    seed: int,
) -> npt.NDArray[np.float64]:
    inside = folds == fold
    model = fit_learner(
        spec.kind, spec.params, train.take(np.flatnonzero(~inside)), seed
    )
    return model.predict_proba(train.features[inside])


def oof_meta_features(
    train: LabeledDataset,
    bases: Sequence[BaseSpec],
    n_folds: int = DEFAULT_N_FOLDS,
    seed: int = 0,
    n_jobs: int = 1,
) -> OofMatrix:
    """Predict every training row with base models that never saw its fold."""
    check_bases(bases)
    folds = stratified_folds(train.labels, train.class_names, n_folds, seed)
    keys = [(fold, index) for fold in range(n_folds) for index in range(len(bases))]
    predictions = run_parallel(
        _fit_fold,
        [
            (
                train,
                folds,
                fold,
                bases[index],
                derive_seed(seed, Stream.STACK_FOLD, fold, index),
            )
            for fold, index in keys
        ],
        n_jobs,
    )

    width = train.n_classes
    values = np.empty((train.n_rows, len(bases) * width))
    for (fold, index), block in zip(keys, predictions):
        values[folds == fold, index * width : (index + 1) * width] = block

    LOGGER.debug(
        "Built out-of-fold meta-features: %d bases x %d folds", len(bases), n_folds
    )
    return OofMatrix(values, folds, tuple(spec.name for spec in bases), width)


@dataclass(frozen=True, eq=False)
class FittedBase:
    """A base spec plus its model refit on the whole training set."""

    spec: BaseSpec
    model: Classifier


def _refit_base(train: LabeledDataset, spec: BaseSpec, seed: int) -> Classifier:
    return fit_learner(spec.kind, spec.params, train, seed)


def refit_bases(
    train: LabeledDataset, bases: Sequence[BaseSpec], seed: int = 0, n_jobs: int = 1
) -> tuple[FittedBase, ...]:
    """Fit every base on the full training set."""
    models = run_parallel(
        _refit_base,
        [
            (train, spec, derive_seed(seed, Stream.STACK_REFIT, index))
            for index, spec in enumerate(bases)
        ],
        n_jobs,
    )
    return tuple(FittedBase(spec, model) for spec, model in zip(bases, models))


def _fitted_base_from_dict(data: Mapping[str, Any]) -> FittedBase:
    return FittedBase(BaseSpec.from_dict(data["spec"]), model_from_dict(data["model"]))


def _base_probabilities(
    bases: Sequence[FittedBase], features: npt.NDArray[np.float64]
) -> dict[str, npt.NDArray[np.float64]]:
    return {base.spec.name: base.model.predict_proba(features) for base in bases}


@dataclass(frozen=True, eq=False)
class StackingModel:
    """Refit base models, the meta-model and the layout binding them."""

    model_type: ClassVar[str] = "stacking"

    bases: tuple[FittedBase, ...]
    meta_model: ForestModel
    layout: tuple[MetaColumn, ...]
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    n_folds: int = DEFAULT_N_FOLDS
    seed: int = 0
    meta_features: MetaFeatures = MetaFeatures.OOF

    @property
    def n_features(self) -> int:
        """Return the input width."""
        return len(self.feature_names)

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""
        return len(self.class_names)

    def meta_input(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the meta-model input for raw feature rows."""
        matrix = check_features(features, self.n_features)
        return assemble_meta_features(
            matrix, _base_probabilities(self.bases, matrix), self.layout
        )

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the meta-model probabilities."""
        return self.meta_model.predict_proba(self.meta_input(features))

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model, base models inline."""
        return {
            **model_header(
                self.model_type,
                {
                    "n_folds": self.n_folds,
                    "seed": self.seed,
                    "meta_features": str(self.meta_features),
                },
            ),
            "feature_names": list(self.feature_names),
            "class_names": list(self.class_names),
            "layout": [column.to_dict() for column in self.layout],
            "bases": [
                {"spec": base.spec.to_dict(), "model": base.model.to_dict()}
                for base in self.bases
            ],
            "meta_model": self.meta_model.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "StackingModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        params = data["params"]
        return cls(
            bases=tuple(_fitted_base_from_dict(item) for item in data["bases"]),
            meta_model=ForestModel.from_dict(data["meta_model"]),
            layout=tuple(MetaColumn.from_dict(item) for item in data["layout"]),
            feature_names=tuple(data["feature_names"]),
            class_names=tuple(data["class_names"]),
            n_folds=int(params["n_folds"]),
            seed=int(params["seed"]),
            meta_features=MetaFeatures(params["meta_features"]),
        )


def fit_stacking(
    train: LabeledDataset,
    bases: Sequence[BaseSpec],
    meta_params: ForestParams | None = None,
    n_folds: int = DEFAULT_N_FOLDS,
    seed: int = 0,
    meta_features: MetaFeatures | str = MetaFeatures.OOF,
    n_jobs: int = 1,
) -> StackingModel:
    """Fit base models, build the meta-feature matrix and fit the meta-model."""
    check_bases(bases)
    meta_features = MetaFeatures(meta_features)
    meta_params = meta_params or ForestParams()
    base_names = [spec.name for spec in bases]

    fitted = refit_bases(train, bases, seed, n_jobs)
    if meta_features is MetaFeatures.OOF:
        blocks = oof_meta_features(train, bases, n_folds, seed, n_jobs).by_name()
    else:
        blocks = _base_probabilities(fitted, train.features)

    layout = build_layout(train.feature_names, base_names, train.class_names)
    meta_train = LabeledDataset(
        assemble_meta_features(train.features, blocks, layout),
        train.labels,
        tuple(column.label for column in layout),
        train.class_names,
    )
    meta_model = fit_forest(
        meta_train, meta_params, derive_seed(seed, Stream.STACK_META), n_jobs
    )
    LOGGER.info(
        "Fitted stacking ensemble: %d bases, meta-model input width %d (%s)",
        len(bases),
        len(layout),
        meta_features,
    )
    return StackingModel(
        fitted,
        meta_model,
        layout,
        train.feature_names,
        train.class_names,
        n_folds,
        seed,
        meta_features,
    )


def predict_stacking(
    model: StackingModel, features: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities of the ensemble."""
    return model.predict_proba(features)


@dataclass(frozen=True, eq=False)
class SoftVoteModel:
    """Unweighted mean of the base model probabilities."""

    model_type: ClassVar[str] = "soft_vote"

    bases: tuple[FittedBase, ...]
    n_features: int
    n_classes: int

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Average the base distributions."""
        matrix = check_features(features, self.n_features)
        total = np.zeros((matrix.shape[0], self.n_classes))
        for base in self.bases:
            total += base.model.predict_proba(matrix)

        result: npt.NDArray[np.float64] = total / len(self.bases)
        return result

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model, base models inline."""
        return {
            **model_header(self.model_type, {}),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "bases": [
                {"spec": base.spec.to_dict(), "model": base.model.to_dict()}
                for base in self.bases
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SoftVoteModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            bases=tuple(_fitted_base_from_dict(item) for item in data["bases"]),
            n_features=int(data["n_features"]),
            n_classes=int(data["n_classes"]),
        )


def fit_soft_vote(
    train: LabeledDataset, bases: Sequence[BaseSpec], seed: int = 0, n_jobs: int = 1
) -> SoftVoteModel:
    """Refit the bases on the full training set and average them."""
    check_bases(bases)
    return SoftVoteModel(
        refit_bases(train, bases, seed, n_jobs), train.n_features, train.n_classes
    )

