"""Shared fixtures for credit_stack tests."""

from collections.abc import Callable, Iterator
import logging

import numpy as np
import pytest

from credit_stack.const import DOMAIN
from credit_stack.tabular import LabeledDataset

BLOB_CENTERS = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])

KAGGLE_LIKE_CSV = (
    "ID,Age,Annual_Income,Num_of_Loan,Credit_Mix,Credit_Score\n"
    "0x1602,23,19114.12,4,_,Good\n"
    "0x1603,abc,19114.12_,4,Good,Good\n"
    "0x1604,-500,34847.84,1,Standard,Standard\n"
    "0x1605,28_,,1,Bad,Poor\n"
    '0x1606,35,"143162.64",3,Good,Standard\n'
    "0x1607,31,30689.89,2_,Standard,Poor\n"
)

DatasetFactory = Callable[..., LabeledDataset]


def make_blobs(
    per_class: tuple[int, ...] = (20, 20, 20),
    seed: int = 0,
    spread: float = 1.0,
    centers: np.ndarray = BLOB_CENTERS,
) -> LabeledDataset:
    """Draw isotropic Gaussian blobs, one per class, in class order."""
    rng = np.random.default_rng(seed)
    dims = centers.shape[1]
    features = np.concatenate(
        [
            centers[code] + spread * rng.standard_normal((count, dims))
            for code, count in enumerate(per_class)
        ]
    )
    labels = np.repeat(np.arange(len(per_class)), per_class)
    names = tuple(f"x{index}" for index in range(dims))
    class_names = ("Poor", "Standard", "Good")[: len(per_class)]
    return LabeledDataset(features, labels, names, class_names)


@pytest.fixture
def blobs() -> DatasetFactory:
    """Return the blob factory."""
    return make_blobs


@pytest.fixture
def separated() -> LabeledDataset:
    """Three well separated, balanced clusters."""
    return make_blobs((30, 30, 30), seed=1, spread=0.3)


@pytest.fixture
def overlapping() -> LabeledDataset:
    """Three imbalanced, overlapping clusters."""
    return make_blobs((25, 60, 15), seed=2, spread=1.6)


@pytest.fixture
def kaggle_like_csv() -> str:
    """A few raw rows with the public dataset's blemishes."""
    return KAGGLE_LIKE_CSV


@pytest.fixture(autouse=True)
def restore_package_logger() -> Iterator[None]:
    """Undo the CLI's logging setup so caplog keeps seeing package records."""
    logger = logging.getLogger(DOMAIN)
    handlers, level, propagate = logger.handlers[:], logger.level, logger.propagate
    yield
    logger.handlers = handlers
    logger.setLevel(level)
    logger.propagate = propagate
