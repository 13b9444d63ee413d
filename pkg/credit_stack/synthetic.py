"""Seeded synthetic credit data shaped like the public credit score dataset."""

import numpy as np
import numpy.typing as npt
import pandas as pd

from .const import DEFAULT_CLASS_ORDER, DEFAULT_LABEL_COLUMN, LOGGER
from .errors import ConfigError
from .seeding import Stream, derive_rng
from .tabular import LabeledDataset, Table

# Poor / Standard / Good shares of the public dataset
CREDIT_CLASS_WEIGHTS = (0.29, 0.53, 0.18)
CREDIT_FEATURES = (
    "Annual_Income",
    "Monthly_Inhand_Salary",
    "Num_Bank_Accounts",
    "Num_Credit_Card",
    "Interest_Rate",
    "Num_of_Loan",
    "Delay_from_due_date",
    "Num_of_Delayed_Payment",
    "Outstanding_Debt",
    "Credit_Utilization_Ratio",
)
ID_COLUMN = "ID"
MIX_COLUMN = "Credit_Mix"
MIX_LEVELS = ("Bad", "Standard", "Good")
MIX_PLACEHOLDER = "_"
JUNK_VALUES = ("_______", "#F%$D@*&8", "!@9#%8", "nan")
DEFAULT_CORRUPTION = 0.03


def class_counts(rows: int, weights: tuple[float, ...]) -> npt.NDArray[np.int64]:
    """Split a row total by weights; the largest class takes the remainder."""
    shares = np.asarray(weights, dtype=np.float64)
    if rows < 1 or shares.min() <= 0:
        raise ConfigError("need at least one row and positive class weights")

    counts = np.floor(shares / shares.sum() * rows).astype(np.int64)
    counts[int(np.argmax(shares))] += rows - int(counts.sum())
    return counts


def feature_names(n_features: int) -> tuple[str, ...]:
    """Credit-like names for up to ten features, generic ones beyond."""
    if n_features <= len(CREDIT_FEATURES):
        return CREDIT_FEATURES[:n_features]

    return tuple(f"feature_{index:02d}" for index in range(n_features))


def gaussian_mixture(
    rows: int,
    seed: int,
    n_features: int = len(CREDIT_FEATURES),
    class_weights: tuple[float, ...] = CREDIT_CLASS_WEIGHTS,
    separation: float = 0.6,
    class_names: tuple[str, ...] = DEFAULT_CLASS_ORDER,
) -> LabeledDataset:
    """Draw an imbalanced mixture with one anisotropic Gaussian per class."""
    if len(class_weights) != len(class_names):
        raise ConfigError(
            f"{len(class_weights)} class weights for {len(class_names)} classes"
        )
    if n_features < 1:
        raise ConfigError("need at least one feature")

    rng = derive_rng(seed, Stream.SYNTHETIC, 0)
    counts = class_counts(rows, class_weights)
    labels = rng.permutation(np.repeat(np.arange(len(counts)), counts))

    centers = rng.normal(0.0, separation, size=(len(counts), n_features))
    scales = rng.uniform(0.8, 1.6, size=(len(counts), n_features))
    noise = rng.standard_normal((rows, n_features))
    features = centers[labels] + scales[labels] * noise

    return LabeledDataset(
        features, labels.astype(np.int64), feature_names(n_features), class_names
    )


def _corrupt(value: float, draw: float, choice: int, corruption: float) -> str | None:
    text = f"{value:.4f}"
    if draw >= corruption:
        return text
    if choice == 0:
        return text + "_"
    if choice == 1:
        return None

    return JUNK_VALUES[choice % len(JUNK_VALUES)]


def synthesize_credit_table(
    rows: int,
    seed: int,
    corruption: float = DEFAULT_CORRUPTION,
    label_column: str = DEFAULT_LABEL_COLUMN,
) -> Table:
    """Render a mixture as raw text cells with the public dataset's blemishes.

    A share of numeric cells get a trailing underscore, go blank or hold junk
    text. An ID column and a noisy Credit_Mix category ride along.
    """
    if not 0.0 <= corruption < 1.0:
        raise ConfigError(f"corruption must lie in [0, 1), got {corruption}")

    ds = gaussian_mixture(rows, seed)
    rng = derive_rng(seed, Stream.SYNTHETIC, 1)
    draws = rng.random(ds.features.shape)
    choices = rng.integers(0, 4, size=ds.features.shape)

    columns: dict[str, list[str | None]] = {
        ID_COLUMN: [f"0x{0x1602 + row:x}" for row in range(rows)]
    }
    for index, name in enumerate(ds.feature_names):
        columns[name] = [
            _corrupt(value, draw, choice, corruption)
            for value, draw, choice in zip(
                ds.features[:, index], draws[:, index], choices[:, index]
            )
        ]

    agrees = rng.random(rows) < 0.6
    random_mix = rng.integers(0, len(MIX_LEVELS), size=rows)
    placeholder = rng.random(rows) < 0.1
    columns[MIX_COLUMN] = [
        MIX_PLACEHOLDER
        if blank
        else MIX_LEVELS[min(int(code), len(MIX_LEVELS) - 1) if keep else int(other)]
        for code, keep, other, blank in zip(ds.labels, agrees, random_mix, placeholder)
    ]
    columns[label_column] = [ds.class_names[code] for code in ds.labels]

    LOGGER.info(
        "Synthesized %d rows, class counts %s",
        rows,
        dict(zip(ds.class_names, ds.class_counts().tolist())),
    )
    return Table(pd.DataFrame(columns, dtype=object))
