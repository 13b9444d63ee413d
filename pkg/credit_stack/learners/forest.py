"""Random forest: bagged CART trees with per-split feature subsampling."""

from collections.abc import Mapping
from dataclasses import dataclass, field, fields
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]
import math
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..const import LOGGER
from ..errors import ConfigError
from ..parallel import run_parallel
from ..seeding import Stream, derive_rng
from ..tabular import LabeledDataset
from .base import POSITIVE_INT, check_features, check_header, model_header, validate
from .tree import (
    TREE_FIELDS,
    Node,
    TreeParams,
    evaluate_tree,
    fit_tree_rows,
    node_from_dict,
    node_to_dict,
)


class MaxFeatures(StrEnum):
    """Feature candidates per split."""

    SQRT = "sqrt"
    ALL = "all"


FOREST_SCHEMA = vol.Schema(
    {
        vol.Optional("n_trees"): POSITIVE_INT,
        vol.Optional("bootstrap"): vol.Boolean(),
        vol.Optional("max_features"): vol.Coerce(MaxFeatures),
        **TREE_FIELDS,
    }
)


@dataclass(frozen=True)
class ForestParams:
    """Forest size, sampling scheme and per-tree parameters."""

    n_trees: int = 200
    bootstrap: bool = True
    max_features: MaxFeatures = MaxFeatures.SQRT
    tree: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self) -> None:
        """Coerce enum fields and check ranges."""
        object.__setattr__(self, "max_features", MaxFeatures(self.max_features))
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ForestParams":
        """Build validated parameters from a flat mapping of forest and tree keys."""
        values = validate(FOREST_SCHEMA, data, "forest parameters")
        tree_keys = {item.name for item in fields(TreeParams)}
        tree = TreeParams(**{k: v for k, v in values.items() if k in tree_keys})
        return cls(
            tree=tree, **{k: v for k, v in values.items() if k not in tree_keys}
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters as one flat mapping."""
        return {
            "n_trees": self.n_trees,
            "bootstrap": self.bootstrap,
            "max_features": str(self.max_features),
            **self.tree.to_dict(),
        }

    def n_candidates(self, n_features: int) -> int:
        """Return how many features each split considers."""
        if self.max_features is MaxFeatures.ALL:
            return self.tree.n_candidates(n_features)

        return max(1, math.ceil(math.sqrt(n_features)))


@dataclass(frozen=True)
class ForestModel:
    """A fitted random forest."""

    model_type: ClassVar[str] = "forest"

    trees: tuple[Node, ...]
    params: ForestParams
    n_features: int
    n_classes: int

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the unweighted mean of the tree distributions."""
        matrix = check_features(features, self.n_features)
        total = np.zeros((matrix.shape[0], self.n_classes))
        for root in self.trees:
            total += evaluate_tree(root, matrix, self.n_classes)

        result: npt.NDArray[np.float64] = total / len(self.trees)
        return result

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "trees": [node_to_dict(root) for root in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ForestModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            trees=tuple(node_from_dict(item) for item in data["trees"]),
            params=ForestParams.from_mapping(data["params"]),
            n_features=int(data["n_features"]),
            n_classes=int(data["n_classes"]),
        )


def _fit_member(
    train: LabeledDataset, params: ForestParams, seed: int, index: int
) -> Node:
    # Every tree owns a stream keyed by its index
    rng = derive_rng(seed, Stream.FOREST, index)
    if params.bootstrap:
        rows = rng.integers(0, train.n_rows, size=train.n_rows)
    else:
        rows = np.arange(train.n_rows)

    return fit_tree_rows(
        train, rows, params.tree, params.n_candidates(train.n_features), rng
    )


def fit_forest(
    train: LabeledDataset,
    params: ForestParams | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> ForestModel:
    """Fit a bagged forest; trees are identical whatever n_jobs is."""
    params = params or ForestParams()
    trees = run_parallel(
        _fit_member,
        [(train, params, seed, index) for index in range(params.n_trees)],
        n_jobs,
    )
    LOGGER.debug("Fitted forest of %d trees on %d rows", len(trees), train.n_rows)
    return ForestModel(tuple(trees), params, train.n_features, train.n_classes)


def predict_forest(
    model: ForestModel, features: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities."""
    return model.predict_proba(features)
