"""Second-order gradient-boosted trees with a softmax objective and L1/L2 terms."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..const import LOGGER
from ..errors import ConfigError, DataError
from ..parallel import run_parallel
from ..seeding import Stream, derive_rng
from ..tabular import LabeledDataset
from .base import (
    NON_NEGATIVE_FLOAT,
    NON_NEGATIVE_INT,
    UNIT_FRACTION,
    check_features,
    check_header,
    model_header,
    one_hot,
    softmax,
    validate,
)
from .tree import (
    MIN_GAIN,
    TREE_FIELDS,
    Node,
    SplitCandidate,
    TreeParams,
    evaluate_tree,
    grow_tree,
    node_from_dict,
    node_to_dict,
    split_threshold,
)

# Probabilities are clipped away from zero inside the log loss
LOSS_EPSILON = 1e-15

BOOST_SCHEMA = vol.Schema(
    {
        vol.Optional("n_rounds"): NON_NEGATIVE_INT,
        vol.Optional("learning_rate"): UNIT_FRACTION,
        vol.Optional("reg_lambda"): NON_NEGATIVE_FLOAT,
        vol.Optional("reg_alpha"): NON_NEGATIVE_FLOAT,
        vol.Optional("gamma"): NON_NEGATIVE_FLOAT,
        **TREE_FIELDS,
    }
)


def _boost_tree_defaults() -> TreeParams:
    return TreeParams(max_depth=6, min_samples_leaf=1)


@dataclass(frozen=True)
class BoostParams:
    """Boosting schedule, regularization and per-tree parameters."""

    n_rounds: int = 100
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    gamma: float = 0.0
    tree: TreeParams = field(default_factory=_boost_tree_defaults)

    def __post_init__(self) -> None:
        """Check ranges."""
        if self.n_rounds < 0:
            raise ConfigError(f"n_rounds must be >= 0, got {self.n_rounds}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(
                f"learning_rate must lie in (0, 1], got {self.learning_rate}"
            )
        for name in ("reg_lambda", "reg_alpha", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "BoostParams":
        """Build validated parameters from a flat mapping of boosting and tree keys."""
        values = validate(BOOST_SCHEMA, data, "boosting parameters")
        tree_keys = {item.name for item in fields(TreeParams)}
        tree_values = {k: v for k, v in values.items() if k in tree_keys}
        tree = TreeParams(
            **{
                "max_depth": 6,
                "min_samples_leaf": 1,
                **tree_values,
            }
        )
        return cls(
            tree=tree, **{k: v for k, v in values.items() if k not in tree_keys}
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters as one flat mapping."""
        return {
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "reg_lambda": self.reg_lambda,
            "reg_alpha": self.reg_alpha,
            "gamma": self.gamma,
            **self.tree.to_dict(),
        }


def soft_threshold(value: float, alpha: float) -> float:
    """Return sign(value) * max(|value| - alpha, 0)."""
    return float(np.sign(value) * max(abs(value) - alpha, 0.0))


def leaf_weight(
    grad_sum: float, hess_sum: float, reg_lambda: float, reg_alpha: float
) -> float:
    """Return the regularized optimal leaf weight."""
    denominator = hess_sum + reg_lambda
    if denominator <= 0.0:
        return 0.0

    return -soft_threshold(grad_sum, reg_alpha) / denominator


def softmax_gradients(
    scores: npt.NDArray[np.float64], labels: npt.ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Return per-row, per-class gradient p - y and diagonal hessian p(1 - p)."""
    p = softmax(scores)
    grad = p - one_hot(labels, scores.shape[1])
    hess = p * (1.0 - p)
    return grad, hess


def cross_entropy(
    probabilities: npt.NDArray[np.float64], labels: npt.ArrayLike
) -> float:
    """Return the mean negative log-likelihood of the true classes."""
    codes = np.asarray(labels, dtype=np.int64)
    picked = probabilities[np.arange(len(codes)), codes]
    return float(-np.mean(np.log(np.clip(picked, LOSS_EPSILON, None))))


def split_gain(
    grad_left: npt.ArrayLike,
    hess_left: npt.ArrayLike,
    grad_total: float,
    hess_total: float,
    reg_lambda: float,
    gamma: float,
) -> npt.NDArray[np.float64]:
    """Return the structure-score gain of splitting a node, less gamma."""
    g_left = np.asarray(grad_left, dtype=np.float64)
    h_left = np.asarray(hess_left, dtype=np.float64)
    g_right = grad_total - g_left
    h_right = hess_total - h_left

    def score(g: npt.NDArray[np.float64], h: npt.NDArray[np.float64]) -> Any:
        denominator = h + reg_lambda
        return np.divide(
            g * g,
            denominator,
            out=np.zeros_like(g * g),
            where=denominator > 0,
        )

    parent = score(np.asarray(grad_total, dtype=np.float64), np.asarray(hess_total))
    result: npt.NDArray[np.float64] = (
        0.5 * (score(g_left, h_left) + score(g_right, h_right) - parent) - gamma
    )
    return result


@dataclass
class BoostObjective:
    """Gain objective over the gradients of one class."""

    features: npt.NDArray[np.float64]
    grad: npt.NDArray[np.float64]
    hess: npt.NDArray[np.float64]
    params: BoostParams
    n_features: int = field(init=False)

    def __post_init__(self) -> None:
        """Record the input width."""
        self.n_features = int(self.features.shape[1])

    def find_split(
        self, rows: npt.NDArray[np.int64], candidates: npt.NDArray[np.int64]
    ) -> SplitCandidate | None:
        """Return the highest-gain split with gain above zero, if any."""
        n_rows = len(rows)
        min_leaf = self.params.tree.min_samples_leaf
        if n_rows < 2 * min_leaf or n_rows < 2:
            return None

        grad = self.grad[rows]
        hess = self.hess[rows]
        grad_total = float(grad.sum())
        hess_total = float(hess.sum())
        sizes_left = np.arange(1, n_rows)
        size_ok = (sizes_left >= min_leaf) & (n_rows - sizes_left >= min_leaf)

        best: SplitCandidate | None = None
        for feature in candidates:
            column = self.features[rows, feature]
            order = np.argsort(column, kind="stable")
            values = column[order]
            gain = split_gain(
                np.cumsum(grad[order])[:-1],
                np.cumsum(hess[order])[:-1],
                grad_total,
                hess_total,
                self.params.reg_lambda,
                self.params.gamma,
            )
            valid = size_ok & (values[:-1] < values[1:])
            if not valid.any():
                continue

            gain = np.where(valid, gain, -np.inf)
            position = int(np.argmax(gain))
            value = float(gain[position])
            if value > MIN_GAIN and (best is None or value > best.gain):
                best = SplitCandidate(
                    int(feature),
                    split_threshold(values[position], values[position + 1]),
                    value,
                )

        return best

    def leaf_value(self, rows: npt.NDArray[np.int64]) -> tuple[float, ...]:
        """Return the regularized leaf weight of the rows."""
        return (
            leaf_weight(
                float(self.grad[rows].sum()),
                float(self.hess[rows].sum()),
                self.params.reg_lambda,
                self.params.reg_alpha,
            ),
        )


@dataclass(frozen=True)
class BoostModel:
    """A fitted boosted ensemble: one regression tree per class per round."""

    model_type: ClassVar[str] = "gbdt"

    rounds: tuple[tuple[Node, ...], ...]
    base_score: tuple[float, ...]
    params: BoostParams
    n_features: int
    train_loss: tuple[float, ...] = ()

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""
        return len(self.base_score)

    def raw_scores(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return base score plus the learning-rate-scaled tree outputs."""
        matrix = check_features(features, self.n_features)
        scores = np.tile(np.asarray(self.base_score), (matrix.shape[0], 1))
        for group in self.rounds:
            for code, root in enumerate(group):
                scores[:, code] += (
                    self.params.learning_rate * evaluate_tree(root, matrix, 1)[:, 0]
                )

        return scores

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the softmax of the raw scores."""
        return softmax(self.raw_scores(features))

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_features": self.n_features,
            "base_score": list(self.base_score),
            "train_loss": list(self.train_loss),
            "rounds": [[node_to_dict(root) for root in group] for group in self.rounds],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BoostModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            rounds=tuple(
                tuple(node_from_dict(item) for item in group)
                for group in data["rounds"]
            ),
            base_score=tuple(float(value) for value in data["base_score"]),
            params=BoostParams.from_mapping(data["params"]),
            n_features=int(data["n_features"]),
            train_loss=tuple(float(value) for value in data.get("train_loss", [])),
        )


def prior_scores(
    labels: npt.NDArray[np.int64], class_names: Sequence[str]
) -> tuple[float, ...]:
    """Return the log class priors, the starting score of every row."""
    counts = np.bincount(labels, minlength=len(class_names))
    for code, count in enumerate(counts):
        if count == 0:
            raise DataError(
                f"class {class_names[code]} is absent from the boosting training set"
            )

    return tuple(float(value) for value in np.log(counts / counts.sum()))


def _fit_class_tree(
    features: npt.NDArray[np.float64],
    grad: npt.NDArray[np.float64],
    hess: npt.NDArray[np.float64],
    params: BoostParams,
    seed: int,
    round_index: int,
    code: int,
) -> Node:
    # Every (round, class) tree owns a stream
    rng = derive_rng(seed, Stream.BOOST, round_index, code)
    objective = BoostObjective(features, grad, hess, params)
    return grow_tree(
        objective,
        np.arange(features.shape[0]),
        params.tree,
        params.tree.n_candidates(features.shape[1]),
        rng,
    )


def fit_gbdt(
    train: LabeledDataset,
    params: BoostParams | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> BoostModel:
    """Fit a multiclass boosted ensemble on the softmax cross-entropy."""
    params = params or BoostParams()
    if train.n_rows == 0:
        raise DataError("cannot fit boosting on an empty training set")
    if train.n_classes < 2:
        raise DataError("boosting needs at least two classes")

    base_score = prior_scores(train.labels, train.class_names)
    scores = np.tile(np.asarray(base_score), (train.n_rows, 1))
    losses = [cross_entropy(softmax(scores), train.labels)]
    rounds: list[tuple[Node, ...]] = []

    for round_index in range(params.n_rounds):
        grad, hess = softmax_gradients(scores, train.labels)
        group = run_parallel(
            _fit_class_tree,
            [
                (
                    train.features,
                    grad[:, code],
                    hess[:, code],
                    params,
                    seed,
                    round_index,
                    code,
                )
                for code in range(train.n_classes)
            ],
            n_jobs,
        )
        for code, root in enumerate(group):
            scores[:, code] += (
                params.learning_rate * evaluate_tree(root, train.features, 1)[:, 0]
            )

        rounds.append(tuple(group))
        losses.append(cross_entropy(softmax(scores), train.labels))
        LOGGER.debug("Boosting round %d: train loss %.6f", round_index + 1, losses[-1])

    return BoostModel(
        tuple(rounds), base_score, params, train.n_features, tuple(losses)
    )


def predict_gbdt(model: BoostModel, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities."""
    return model.predict_proba(features)
