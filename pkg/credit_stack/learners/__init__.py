"""Registry of the learner kinds that can be fit, stacked and serialized."""

from collections.abc import Callable, Mapping
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]
from typing import Any

from ..errors import ConfigError, DataError
from ..tabular import LabeledDataset
from .base import Classifier
from .boost import BoostModel, BoostParams, fit_gbdt
from .dummy import DummyModel, DummyParams, fit_dummy
from .forest import ForestModel, ForestParams, fit_forest
from .knn import KnnModel, KnnParams, fit_knn
from .logistic import LogisticModel, LogisticParams, fit_logistic
from .tree import TreeModel, TreeParams, fit_tree

LearnerParams = (
    TreeParams | ForestParams | BoostParams | KnnParams | LogisticParams | DummyParams
)


class LearnerKind(StrEnum):
    """Model kinds a base learner can be."""

    TREE = "tree"
    FOREST = "forest"
    GBDT = "gbdt"
    KNN = "knn"
    LOGISTIC = "logistic"
    DUMMY = "dummy"


def _fit_tree(train: LabeledDataset, params: Any, seed: int, n_jobs: int) -> Classifier:
    return fit_tree(train, params, seed)


def _fit_forest(
    train: LabeledDataset, params: Any, seed: int, n_jobs: int
) -> Classifier:
    return fit_forest(train, params, seed, n_jobs)


def _fit_gbdt(train: LabeledDataset, params: Any, seed: int, n_jobs: int) -> Classifier:
    return fit_gbdt(train, params, seed, n_jobs)


def _fit_knn(train: LabeledDataset, params: Any, seed: int, n_jobs: int) -> Classifier:
    return fit_knn(train, params)


def _fit_logistic(
    train: LabeledDataset, params: Any, seed: int, n_jobs: int
) -> Classifier:
    return fit_logistic(train, params)


def _fit_dummy(
    train: LabeledDataset, params: Any, seed: int, n_jobs: int
) -> Classifier:
    return fit_dummy(train, params, seed)


@dataclass(frozen=True)
class LearnerEntry:
    """How to configure, fit and load one learner kind."""

    params_type: type
    fit: Callable[[LabeledDataset, Any, int, int], Classifier]
    model_type: Any


LEARNERS: dict[LearnerKind, LearnerEntry] = {
    LearnerKind.TREE: LearnerEntry(TreeParams, _fit_tree, TreeModel),
    LearnerKind.FOREST: LearnerEntry(ForestParams, _fit_forest, ForestModel),
    LearnerKind.GBDT: LearnerEntry(BoostParams, _fit_gbdt, BoostModel),
    LearnerKind.KNN: LearnerEntry(KnnParams, _fit_knn, KnnModel),
    LearnerKind.LOGISTIC: LearnerEntry(LogisticParams, _fit_logistic, LogisticModel),
    LearnerKind.DUMMY: LearnerEntry(DummyParams, _fit_dummy, DummyModel),
}


def learner_kind(value: str) -> LearnerKind:
    """Parse a learner kind, raising ConfigError for unknown names."""
    try:
        return LearnerKind(value)
    except ValueError as err:
        raise ConfigError(f"unknown model kind '{value}'") from err


def params_from_mapping(kind: LearnerKind | str, data: Mapping[str, Any]) -> Any:
    """Build validated parameters of a learner kind."""
    entry = LEARNERS[learner_kind(kind)]
    return entry.params_type.from_mapping(data)


def default_params(kind: LearnerKind | str) -> Any:
    """Return the default parameters of a learner kind."""
    return LEARNERS[learner_kind(kind)].params_type()


def fit_learner(
    kind: LearnerKind | str,
    params: Any,
    train: LabeledDataset,
    seed: int = 0,
    n_jobs: int = 1,
) -> Classifier:
    """Fit a learner of the given kind."""
    entry = LEARNERS[learner_kind(kind)]
    if params is None:
        params = entry.params_type()
    if not isinstance(params, entry.params_type):
        raise ConfigError(
            f"{kind} learner expects {entry.params_type.__name__}, "
            f"got {type(params).__name__}"
        )

    return entry.fit(train, params, seed, n_jobs)


def model_from_dict(data: Mapping[str, Any]) -> Classifier:
    """Deserialize any learner model by its model_type."""
    model_type = data.get("model_type")
    for entry in LEARNERS.values():
        if entry.model_type.model_type == model_type:
            model: Classifier = entry.model_type.from_dict(data)
            return model

    raise DataError(f"unknown model type '{model_type}'")


__all__ = [
    "LEARNERS",
    "Classifier",
    "LearnerKind",
    "LearnerParams",
    "default_params",
    "fit_learner",
    "learner_kind",
    "model_from_dict",
    "params_from_mapping",
]
