"""Baseline predictors that ignore the features."""

from collections.abc import Mapping
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
import voluptuous as vol

from ..errors import ConfigError, DataError
from ..seeding import Stream, derive_rng
from ..tabular import LabeledDataset
from .base import build_params, check_features, check_header, model_header


class Strategy(StrEnum):
    """How a dummy model fills its probability rows."""

    PRIOR = "prior"
    UNIFORM = "uniform"
    CONSTANT = "constant"
    RANDOM = "random"


def _float_list(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [item for item in value.split(",") if item.strip()]

    return tuple(float(item) for item in value)


DUMMY_SCHEMA = vol.Schema(
    {
        vol.Optional("strategy"): vol.Coerce(Strategy),
        vol.Optional("probabilities"): _float_list,
    }
)


@dataclass(frozen=True)
class DummyParams:
    """Strategy plus the distribution used by the constant strategy."""

    strategy: Strategy = Strategy.PRIOR
    probabilities: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Coerce the strategy and check the constant distribution."""
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "probabilities", tuple(self.probabilities))
        if self.strategy is Strategy.CONSTANT:
            if not self.probabilities or min(self.probabilities) < 0:
                raise ConfigError("constant strategy needs non-negative probabilities")
            if abs(sum(self.probabilities) - 1.0) > 1e-9:
                raise ConfigError("constant probabilities must sum to 1")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "DummyParams":
        """Build validated parameters."""
        return build_params(cls, DUMMY_SCHEMA, data, "dummy parameters")

    def to_dict(self) -> dict[str, Any]:
        """Serialize the parameters."""
        return {
            "strategy": str(self.strategy),
            "probabilities": list(self.probabilities),
        }


@dataclass(frozen=True)
class DummyModel:
    """Predicts the same (or seeded random) distribution for every row."""

    model_type: ClassVar[str] = "dummy"

    params: DummyParams
    distribution: tuple[float, ...]
    n_features: int
    seed: int = 0

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""
        return len(self.distribution)

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return one probability row per input row."""
        n_rows = check_features(features, self.n_features).shape[0]
        if self.params.strategy is Strategy.RANDOM:
            rng = derive_rng(self.seed, Stream.DUMMY)
            return rng.dirichlet(np.ones(self.n_classes), size=n_rows)

        return np.tile(np.asarray(self.distribution), (n_rows, 1))

    def to_dict(self) -> dict[str, Any]:
        """Serialize the model."""
        return {
            **model_header(self.model_type, self.params.to_dict()),
            "n_features": self.n_features,
            "distribution": list(self.distribution),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DummyModel":
        """Deserialize the model."""
        check_header(data, cls.model_type)
        return cls(
            params=DummyParams.from_mapping(data["params"]),
            distribution=tuple(float(value) for value in data["distribution"]),
            n_features=int(data["n_features"]),
            seed=int(data["seed"]),
        )


def fit_dummy(
    train: LabeledDataset, params: DummyParams | None = None, seed: int = 0
) -> DummyModel:
    """Record the distribution the strategy predicts."""
    params = params or DummyParams()
    if params.strategy is Strategy.PRIOR:
        if train.n_rows == 0:
            raise DataError("cannot compute class priors of an empty training set")
        distribution = train.class_counts() / train.n_rows
    elif params.strategy is Strategy.CONSTANT:
        if len(params.probabilities) != train.n_classes:
            raise ConfigError(
                f"constant strategy has {len(params.probabilities)} probabilities "
                f"for {train.n_classes} classes"
            )
        distribution = np.asarray(params.probabilities)
    else:
        distribution = np.full(train.n_classes, 1.0 / train.n_classes)

    return DummyModel(
        params,
        tuple(float(value) for value in distribution),
        train.n_features,
        seed,
    )
