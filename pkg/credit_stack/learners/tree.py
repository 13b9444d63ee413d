"""CART classification trees and the shared greedy tree grower."""

from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]
import heapq
import math
from typing import Any, ClassVar, Protocol

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..const import LOGGER
from ..errors import ConfigError, DataError
from ..seeding import Stream, derive_rng
from ..tabular import LabeledDataset
from .base import (
    NON_NEGATIVE_INT,
    POSITIVE_INT,
    UNIT_FRACTION,
    build_params,
    check_features,
    check_header,
    model_header,
)

# Smallest impurity decrease (or boosting gain) that counts as a split
MIN_GAIN = 1e-12


class Criterion(StrEnum):
    """Impurity measure of classification trees."""

    GINI = "gini"
    ENTROPY = "entropy"


class Growth(StrEnum):
    """Order in which the frontier of a tree is expanded."""

    DEPTHWISE = "depthwise"
    LEAFWISE = "leafwise"


TREE_FIELDS = {
    vol.Optional("max_depth"): NON_NEGATIVE_INT,
    vol.Optional("min_samples_leaf"): POSITIVE_INT,
    vol.Optional("criterion"): vol.Coerce(Criterion),
    vol.Optional("feature_subsample"): UNIT_FRACTION,
    vol.Optional("growth"): vol.Coerce(Growth),
    vol.Optional("max_leaves"): vol.Any(
        None, vol.All(vol.Coerce(int), vol.Range(min=2))
    ),
}

TREE_SCHEMA = vol.Schema(TREE_FIELDS)


@dataclass(frozen=True)
class TreeParams:
    """Hyperparameters of a single tree."""

    max_depth: int = 8
    min_samples_leaf: int = 5
    criterion: Criterion = Criterion.GINI
    feature_subsample: float = 1.0
    growth: Growth = Growth.DEPTHWISE
    max_leaves: int | None = None

    def __post_init__(self) -> None:
        """Coerce enum fields and check ranges."""
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        object.__setattr__(self, "growth", Growth(self.growth))
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ConfigError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ConfigError(
                f"feature_subsample must lie in (0, 1], got {self.feature_subsample}"
            )
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ConfigError(f"max_leaves must be >= 2, got {self.max_leaves}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "TreeParams":
        """Build validated parameters from a (string-valued) mapping."""
        return build_params(cls, TREE_SCHEMA, data, "tree parameters")

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters."""
        return {
            key: str(value) if isinstance(value, StrEnum) else value
            for key, value in asdict(self).items()
        }

    def n_candidates(self, n_features: int) -> int:
        """Return how many features each split considers."""
        return min(n_features, max(1, math.ceil(self.feature_subsample * n_features)))


@dataclass(frozen=True)
class Leaf:
    """Terminal node holding a per-class vector."""

    value: tuple[float, ...]
    n_samples: int


@dataclass(frozen=True)
class Split:
    """Internal node: rows with x[feature] <= threshold go left."""

    feature: int
    threshold: float
    gain: float
    n_samples: int
    left: "Node"
    right: "Node"


Node = Leaf | Split


@dataclass(frozen=True)
class SplitCandidate:
    """Best split found for a set of rows."""

    feature: int
    threshold: float
    gain: float


class SplitObjective(Protocol):
    """What the grower needs from a loss: split search and leaf values."""

    features: npt.NDArray[np.float64]
    n_features: int

    def find_split(
        self, rows: npt.NDArray[np.int64], candidates: npt.NDArray[np.int64]
    ) -> SplitCandidate | None:
        """Return the best split of the rows, if any."""

    def leaf_value(self, rows: npt.NDArray[np.int64]) -> tuple[float, ...]:
        """Return the value stored in a leaf holding the rows."""


def gini(counts: npt.ArrayLike) -> float:
    """Return the Gini impurity 1 - sum(p_i^2) of class counts."""
    values = np.asarray(counts, dtype=np.float64)
    total = values.sum()
    if total <= 0:
        raise DataError("impurity of an empty node is undefined")

    p = values / total
    return float(1.0 - np.sum(p * p))


def entropy(counts: npt.ArrayLike) -> float:
    """Return the Shannon entropy (nats) of class counts."""
    values = np.asarray(counts, dtype=np.float64)
    total = values.sum()
    if total <= 0:
        raise DataError("impurity of an empty node is undefined")

    p = values[values > 0] / total
    return float(-np.sum(p * np.log(p)))


def _impurity_rows(
    counts: npt.NDArray[np.float64], criterion: Criterion
) -> npt.NDArray[np.float64]:
    """Impurity of every row of a count matrix (rows with zero total give 0)."""
    totals = counts.sum(axis=1, keepdims=True)
    p = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    if criterion is Criterion.GINI:
        result: npt.NDArray[np.float64] = 1.0 - np.sum(p * p, axis=1)
        return result

    logs = np.log(p, out=np.zeros_like(p), where=p > 0)
    result = -np.sum(p * logs, axis=1)
    return result


def split_threshold(low: float, high: float) -> float:
    """Midpoint of two consecutive distinct values that still routes `low` left."""
    middle = (low + high) / 2.0
    return low if middle >= high else middle


def best_split(
    features: npt.NDArray[np.float64],
    labels: npt.NDArray[np.int64],
    n_classes: int,
    candidate_features: npt.ArrayLike | None = None,
    criterion: Criterion | str = Criterion.GINI,
    min_samples_leaf: int = 1,
) -> SplitCandidate | None:
    """Exhaustively search midpoints for the largest weighted impurity decrease.

    Ties resolve to the lowest feature index, then the lowest threshold.
    Returns None when no split decreases impurity with both children holding
    at least min_samples_leaf rows.
    """
    criterion = Criterion(criterion)
    n_rows = len(labels)
    if candidate_features is None:
        candidate_features = np.arange(features.shape[1])
    if n_rows < 2 * min_samples_leaf or n_rows < 2:
        return None

    parent_counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    parent = _impurity_rows(parent_counts[None, :], criterion)[0]
    if parent <= 0.0:
        return None

    # Left child after position i holds the first i + 1 sorted rows
    sizes_left = np.arange(1, n_rows, dtype=np.float64)
    sizes_right = n_rows - sizes_left
    size_ok = (sizes_left >= min_samples_leaf) & (sizes_right >= min_samples_leaf)

    best: SplitCandidate | None = None
    for feature in np.asarray(candidate_features, dtype=np.int64):
        order = np.argsort(features[:, feature], kind="stable")
        values = features[order, feature]
        indicator = np.zeros((n_rows, n_classes))
        indicator[np.arange(n_rows), labels[order]] = 1.0
        left = np.cumsum(indicator, axis=0)[:-1]
        right = parent_counts - left

        decrease = (
            parent
            - sizes_left / n_rows * _impurity_rows(left, criterion)
            - sizes_right / n_rows * _impurity_rows(right, criterion)
        )
        valid = size_ok & (values[:-1] < values[1:])
        if not valid.any():
            continue

        decrease = np.where(valid, decrease, -np.inf)
        position = int(np.argmax(decrease))
        gain = float(decrease[position])
        if gain > MIN_GAIN and (best is None or gain > best.gain):
            best = SplitCandidate(
                int(feature),
                split_threshold(values[position], values[position + 1]),
                gain,
            )

    return best


@dataclass
class ClassificationObjective:
    """Impurity-decrease objective over a labeled training matrix."""

    features: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    n_classes: int
    criterion: Criterion
    min_samples_leaf: int
    n_features: int = field(init=False)

    def __post_init__(self) -> None:
        """Record the input width."""
        self.n_features = int(self.features.shape[1])

    def find_split(
        self, rows: npt.NDArray[np.int64], candidates: npt.NDArray[np.int64]
    ) -> SplitCandidate | None:
        """Return the best impurity split of the rows."""
        return best_split(
            self.features[rows],
            self.labels[rows],
            self.n_classes,
            candidates,
            self.criterion,
            self.min_samples_leaf,
        )

    def leaf_value(self, rows: npt.NDArray[np.int64]) -> tuple[float, ...]:
        """Return the class-frequency distribution of the rows."""
        counts = np.bincount(self.labels[rows], minlength=self.n_classes)
        return tuple(float(value) for value in counts / counts.sum())


@dataclass
class _Pending:
    rows: npt.NDArray[np.int64]
    depth: int
    split: SplitCandidate | None = None
    children: tuple[int, int] | None = None


def grow_tree(
    objective: SplitObjective,
    rows: npt.NDArray[np.int64],
    params: TreeParams,
    n_candidates: int,
    rng: np.random.Generator,
) -> Node:
    """Grow a tree greedily from the given rows.

    Depthwise growth expands the frontier breadth-first; leafwise growth
    expands the highest-gain node first. Either stops at max_depth, at
    max_leaves, or when no node has an admissible split.
    """
    features = objective.features
    n_features = objective.n_features
    nodes: list[_Pending] = []
    frontier: list[tuple[float, int, int]] = []
    counter = 0

    def push(node_rows: npt.NDArray[np.int64], depth: int) -> int:
        nonlocal counter
        node_id = len(nodes)
        node = _Pending(node_rows, depth)
        nodes.append(node)

        if depth < params.max_depth and len(node_rows) >= 2 * params.min_samples_leaf:
            if n_candidates >= n_features:
                candidates = np.arange(n_features)
            else:
                candidates = np.sort(
                    rng.choice(n_features, size=n_candidates, replace=False)
                )
            node.split = objective.find_split(node_rows, candidates)

        if node.split is not None:
            priority = (
                float(depth)
                if params.growth is Growth.DEPTHWISE
                else -node.split.gain
            )
            heapq.heappush(frontier, (priority, counter, node_id))
            counter += 1

        return node_id

    push(rows, 0)
    n_leaves = 1
    while frontier:
        if params.max_leaves is not None and n_leaves >= params.max_leaves:
            break

        _priority, _order, node_id = heapq.heappop(frontier)
        node = nodes[node_id]
        assert node.split is not None
        goes_left = features[node.rows, node.split.feature] <= node.split.threshold
        left = push(node.rows[goes_left], node.depth + 1)
        right = push(node.rows[~goes_left], node.depth + 1)
        node.children = (left, right)
        n_leaves += 1

    def build(node_id: int) -> Node:
        node = nodes[node_id]
        if node.children is None or node.split is None:
            return Leaf(objective.leaf_value(node.rows), len(node.rows))

        return Split(
            feature=node.split.feature,
            threshold=node.split.threshold,
            gain=node.split.gain,
            n_samples=len(node.rows),
            left=build(node.children[0]),
            right=build(node.children[1]),
        )

    return build(0)


def evaluate_tree(
    root: Node, features: npt.NDArray[np.float64], width: int
) -> npt.NDArray[np.float64]:
    """Route every row to its leaf and return the leaf vectors."""
    result = np.empty((features.shape[0], width))
    stack: list[tuple[Node, npt.NDArray[np.int64]]] = [
        (root, np.arange(features.shape[0]))
    ]
    while stack:
        node, rows = stack.pop()
        if isinstance(node, Leaf):
            result[rows] = node.value
            continue

        goes_left = features[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[goes_left]))
        stack.append((node.right, rows[~goes_left]))

    return result


def node_to_dict(node: Node) -> dict[str, Any]:
    """Serialize a tree."""
    if isinstance(node, Leaf):
        return {"value": list(node.value), "n_samples": node.n_samples}

    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "n_samples": node.n_samples,
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(data: Mapping[str, Any]) -> Node:
    """Deserialize a tree."""
    if "value" in data:
        return Leaf(tuple(float(v) for v in data["value"]), int(data["n_samples"]))

    return Split(
        feature=int(data["feature"]),
        threshold=float(data["threshold"]),
        gain=float(data["gain"]),
        n_samples=int(data["n_samples"]),
        left=node_from_dict(data["left"]),
        right=node_from_dict(data["right"]),
    )


def tree_depth(node: Node) -> int:
    """Return the number of split levels below the node."""
    if isinstance(node, Leaf):
        return 0

    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def count_leaves(node: Node) -> int:
    """Return the number of leaves below the node."""
    if isinstance(node, Leaf):
        return 1

    return count_leaves(node.left) + count_leaves(node.right)


@dataclass(frozen=True)
class TreeModel:
    """A fitted classification tree."""

    model_type: ClassVar[str] = "tree"

    root: Node
    params: TreeParams
    n_features: int
    n_classes: int

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the leaf distribution of every row."""
        return evaluate_tree(
            self.root, check_features(features, self.n_features), self.n_classes
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "root": node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TreeModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            root=node_from_dict(data["root"]),
            params=TreeParams.from_mapping(data["params"]),
            n_features=int(data["n_features"]),
            n_classes=int(data["n_classes"]),
        )


def fit_tree_rows(
    train: LabeledDataset,
    rows: npt.NDArray[np.int64],
    params: TreeParams,
    n_candidates: int,
    rng: np.random.Generator,
) -> Node:
    """Grow a classification tree on a subset (or bootstrap sample) of rows."""
    if len(rows) == 0:
        raise DataError("cannot fit a tree on an empty training set")

    objective = ClassificationObjective(
        train.features,
        train.labels,
        train.n_classes,
        params.criterion,
        params.min_samples_leaf,
    )
    return grow_tree(objective, rows, params, n_candidates, rng)


def fit_tree(
    train: LabeledDataset, params: TreeParams | None = None, seed: int = 0
) -> TreeModel:
    """Fit a single CART classification tree."""
    params = params or TreeParams()
    root = fit_tree_rows(
        train,
        np.arange(train.n_rows),
        params,
        params.n_candidates(train.n_features),
        derive_rng(seed, Stream.TREE),
    )
    LOGGER.debug(
        "Fitted tree: depth %d, %d leaves", tree_depth(root), count_leaves(root)
    )
    return TreeModel(root, params, train.n_features, train.n_classes)


def predict_tree(model: TreeModel, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities."""
    return model.predict_proba(features)
