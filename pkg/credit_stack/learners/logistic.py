"""Multinomial logistic regression trained by full-batch gradient descent."""

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..const import LOGGER
from ..errors import ConfigError, DataError
from ..tabular import LabeledDataset
from .base import (
    NON_NEGATIVE_FLOAT,
    NON_NEGATIVE_INT,
    Standardizer,
    build_params,
    check_features,
    check_header,
    model_header,
    one_hot,
    softmax,
)

LOGISTIC_SCHEMA = vol.Schema(
    {
        vol.Optional("step_size"): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
        vol.Optional("max_iter"): NON_NEGATIVE_INT,
        vol.Optional("tol"): NON_NEGATIVE_FLOAT,
    }
)


@dataclass(frozen=True)
class LogisticParams:
    """Gradient descent schedule."""

    step_size: float = 0.1
    max_iter: int = 500
    tol: float = 1e-6

    def __post_init__(self) -> None:
        """Check ranges."""
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if self.max_iter < 0:
            raise ConfigError(f"max_iter must be >= 0, got {self.max_iter}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "LogisticParams":
        """Build validated parameters."""
        return build_params(cls, LOGISTIC_SCHEMA, data, "logistic parameters")

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters."""
        return {"step_size": self.step_size, "max_iter": self.max_iter, "tol": self.tol}


def with_bias(features: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Append the constant column the bias weights multiply."""
    return np.hstack([features, np.ones((features.shape[0], 1))])


def logistic_loss_and_gradient(
    weights: npt.NDArray[np.float64],
    design: npt.NDArray[np.float64],
    targets: npt.NDArray[np.float64],
) -> tuple[float, npt.NDArray[np.float64]]:
    """Return mean cross-entropy and its gradient w.r.t. the (C, d + 1) weights."""
    p = softmax(design @ weights.T)
    loss = float(-np.mean(np.sum(targets * np.log(np.clip(p, 1e-300, None)), axis=1)))
    gradient: npt.NDArray[np.float64] = (p - targets).T @ design / design.shape[0]
    return loss, gradient


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Weights of shape (n_classes, d + 1); the bias is the last column."""

    model_type: ClassVar[str] = "logistic"

    weights: npt.NDArray[np.float64]
    scaler: Standardizer
    params: LogisticParams
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        """Return the input width."""
        return int(self.weights.shape[1] - 1)

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""
        return int(self.weights.shape[0])

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return the softmax of the linear scores."""
        matrix = self.scaler.transform(check_features(features, self.n_features))
        return softmax(with_bias(matrix) @ self.weights.T)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_iter": self.n_iter,
            "scaler": self.scaler.to_dict(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LogisticModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            scaler=Standardizer.from_dict(data["scaler"]),
            params=LogisticParams.from_mapping(data["params"]),
            n_iter=int(data["n_iter"]),
        )


def fit_logistic(
    train: LabeledDataset, params: LogisticParams | None = None
) -> LogisticModel:
    """Fit unregularized softmax regression from zero weights."""
    params = params or LogisticParams()
    if train.n_rows == 0:
        raise DataError("cannot fit logistic regression on an empty training set")

    scaler = Standardizer.fit(train.features)
    design = with_bias(scaler.transform(train.features))
    targets = one_hot(train.labels, train.n_classes)
    weights = np.zeros((train.n_classes, design.shape[1]))

    n_iter = 0
    for n_iter in range(1, params.max_iter + 1):
        _loss, gradient = logistic_loss_and_gradient(weights, design, targets)
        if np.abs(gradient).max() < params.tol:
            n_iter -= 1
            break
        weights -= params.step_size * gradient

    loss, _gradient = logistic_loss_and_gradient(weights, design, targets)
    LOGGER.debug("Logistic regression: %d iterations, train loss %.6f", n_iter, loss)
    return LogisticModel(weights, scaler, params, n_iter)


def predict_logistic(
    model: LogisticModel, features: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities."""
    return model.predict_proba(features)

