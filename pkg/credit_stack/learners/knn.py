"""k-nearest-neighbor classifier on standardized features."""

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt
import voluptuous as vol

from ..errors import ConfigError, DataError
from ..neighbors import NeighborIndex
from ..tabular import LabeledDataset
from .base import (
    POSITIVE_INT,
    Standardizer,
    build_params,
    check_features,
    check_header,
    model_header,
)

KNN_SCHEMA = vol.Schema({vol.Optional("k"): POSITIVE_INT})


@dataclass(frozen=True)
class KnnParams:
    """Number of neighbors that vote."""

    k: int = 5

    def __post_init__(self) -> None:
        """Check the neighbor count."""
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "KnnParams":
        """Build validated parameters."""
        return build_params(cls, KNN_SCHEMA, data, "kNN parameters")

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters."""
        return {"k": self.k}


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Stored standardized training rows answering majority-frequency queries."""

    model_type: ClassVar[str] = "knn"

    points: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    scaler: Standardizer
    params: KnnParams
    n_classes: int

    @property
    def n_features(self) -> int:
        """Return the input width."""
        return int(self.points.shape[1])

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return neighbor label frequencies among the k nearest training rows."""
        matrix = self.scaler.transform(check_features(features, self.n_features))
        neighbors = NeighborIndex(self.points).query_batch(matrix, self.params.k)

        votes = np.zeros((matrix.shape[0], self.n_classes))
        for column in range(self.params.k):
            votes[np.arange(matrix.shape[0]), self.labels[neighbors[:, column]]] += 1.0

        result: npt.NDArray[np.float64] = votes / self.params.k
        return result

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_classes": self.n_classes,
            "scaler": self.scaler.to_dict(),
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KnnModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        scaler = Standardizer.from_dict(data["scaler"])
        return cls(
            points=np.asarray(data["points"], dtype=np.float64).reshape(
                -1, len(scaler.mean)
            ),
            labels=np.asarray(data["labels"], dtype=np.int64),
            scaler=scaler,
            params=KnnParams.from_mapping(data["params"]),
            n_classes=int(data["n_classes"]),
        )


def fit_knn(train: LabeledDataset, params: KnnParams | None = None) -> KnnModel:
    """Store the standardized training set."""
    params = params or KnnParams()
    if train.n_rows == 0:
        raise DataError("cannot fit kNN on an empty training set")
    if params.k > train.n_rows:
        raise DataError(f"k = {params.k} exceeds the {train.n_rows} training rows")

    scaler = Standardizer.fit(train.features)
    return KnnModel(
        scaler.transform(train.features),
        train.labels.copy(),
        scaler,
        params,
        train.n_classes,
    )


def predict_knn(model: KnnModel, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Return per-row class probabilities."""
    return model.predict_proba(features)
