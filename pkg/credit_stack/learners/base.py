"""Shared plumbing for the learners."""

from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any, ClassVar, Protocol, TypeVar

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..const import FORMAT_VERSION
from ..errors import ConfigError, DataError

T = TypeVar("T")

# Validators shared by the learner schemas
POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))
NON_NEGATIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=0))
NON_NEGATIVE_FLOAT = vol.All(vol.Coerce(float), vol.Range(min=0.0))
UNIT_FRACTION = vol.All(
    vol.Coerce(float), vol.Range(min=0.0, min_included=False, max=1.0)
)


class Classifier(Protocol):
    """A fitted model producing per-class probabilities."""

    model_type: ClassVar[str]

    @property
    def n_features(self) -> int:
        """Return the input width."""

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return an (n_rows, n_classes) matrix of probabilities."""

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""


def validate(
    schema: vol.Schema, data: Mapping[str, Any], what: str
) -> dict[str, Any]:
    """Validate a mapping, turning voluptuous failures into ConfigError."""
    try:
        result: dict[str, Any] = schema(dict(data))
    except vol.Invalid as err:
        raise ConfigError(f"invalid {what}: {err}") from err

    return result


def build_params(
    factory: Callable[..., T], schema: vol.Schema, data: Mapping[str, Any], what: str
) -> T:
    """Build a parameter object from a validated mapping."""
    return factory(**validate(schema, data, what))


def check_features(
    features: npt.ArrayLike, n_features: int
) -> npt.NDArray[np.float64]:
    """Return the features as a float matrix of the expected width."""
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1) if n_features else matrix.reshape(-1, 0)
    if matrix.ndim != 2 or matrix.shape[1] != n_features:
        width = matrix.shape[1] if matrix.ndim == 2 else matrix.shape
        raise DataError(f"expected {n_features} feature columns, got {width}")
    if not np.isfinite(matrix).all():
        raise DataError("features contain NaN or infinite values")

    return matrix


def softmax(scores: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Row-wise softmax, shifted by the row maximum."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    result: npt.NDArray[np.float64] = exp / exp.sum(axis=1, keepdims=True)
    return result


def one_hot(labels: npt.ArrayLike, n_classes: int) -> npt.NDArray[np.float64]:
    """Return the indicator matrix of integer labels."""
    codes = np.asarray(labels, dtype=np.int64)
    matrix = np.zeros((len(codes), n_classes))
    matrix[np.arange(len(codes)), codes] = 1.0
    return matrix


def model_header(model_type: str, params: Mapping[str, Any]) -> dict[str, Any]:
    """Return the common fields of a serialized model."""
    return {
        "format_version": FORMAT_VERSION,
        "model_type": model_type,
        "params": dict(params),
    }


def check_header(data: Mapping[str, Any], model_type: str) -> None:
    """Reject documents of another model type or format version."""
    if data.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported model format version {data.get('format_version')!r}"
        )
    if data.get("model_type") != model_type:
        raise DataError(
            f"expected a '{model_type}' model, got '{data.get('model_type')}'"
        )


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column mean and standard deviation fitted on the training set."""

    mean: npt.NDArray[np.float64]
    scale: npt.NDArray[np.float64]

    @classmethod
    def fit(cls, features: npt.NDArray[np.float64]) -> "Standardizer":
        """Fit on a training matrix; constant columns keep unit scale."""
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale[scale == 0.0] = 1.0
        return cls(mean, scale)

    def transform(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Standardize a matrix."""
        result: npt.NDArray[np.float64] = (features - self.mean) / self.scale
        return result

    def to_dict(self) -> dict[str, list[float]]:
        """Serialize the statistics."""
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Standardizer":
        """Deserialize the statistics."""
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["scale"], dtype=np.float64),
        )
