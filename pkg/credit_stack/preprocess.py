"""Row filters, balancing and splitting applied before model training."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import math
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd

from .const import (
    DEFAULT_IQR_MULTIPLIER,
    DEFAULT_TEST_FRACTION,
    DEFAULT_Z_THRESHOLD,
    LOGGER,
)
from .errors import ConfigError, DataError
from .seeding import Stream, derive_rng
from .tabular import LabeledDataset, format_number

# Slack for floor(test_fraction * count) against binary rounding (0.2 * 10)
SPLIT_EPSILON = 1e-9


@dataclass(frozen=True)
class FilterSummary:
    """Row bookkeeping of one filtering or sampling step."""

    rows_before: int
    rows_after: int
    removed_by_column: Mapping[str, int] = field(default_factory=dict)
    rows_added: int = 0
    notes: tuple[str, ...] = ()

    @property
    def rows_removed(self) -> int:
        """Return the number of input rows that were dropped."""
        return self.rows_before + self.rows_added - self.rows_after

    def to_key_values(self, prefix: str = "") -> dict[str, Any]:
        """Flatten the summary for a key=value file."""
        flat: dict[str, Any] = {
            f"{prefix}rows_before": self.rows_before,
            f"{prefix}rows_after": self.rows_after,
            f"{prefix}rows_added": self.rows_added,
        }
        for column, count in self.removed_by_column.items():
            flat[f"{prefix}removed_by_column.{column}"] = count
        for index, note in enumerate(self.notes):
            flat[f"{prefix}note.{index}"] = note

        return flat


@dataclass(frozen=True)
class ZScoreBounds:
    """Column statistics fitted once for the z-score filter."""

    columns: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    threshold: float
    skipped: tuple[str, ...] = ()

    def violations(self, ds: LabeledDataset) -> dict[str, npt.NDArray[np.bool_]]:
        """Return, per column, which rows lie strictly beyond the threshold."""
        result: dict[str, npt.NDArray[np.bool_]] = {}
        for column, mean, std in zip(self.columns, self.means, self.stds):
            values = ds.features[:, ds.column_index(column)]
            result[column] = np.abs(values - mean) / std > self.threshold

        return result

    def notes(self) -> tuple[str, ...]:
        """Return a note per skipped zero-variance column."""
        return tuple(
            f"skipped {column}: zero standard deviation" for column in self.skipped
        )


@dataclass(frozen=True)
class IqrBounds:
    """Inclusive [Q1 - m*IQR, Q3 + m*IQR] bounds fitted once per column."""

    columns: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def violations(self, ds: LabeledDataset) -> dict[str, npt.NDArray[np.bool_]]:
        """Return, per column, which rows fall outside the bounds."""
        result: dict[str, npt.NDArray[np.bool_]] = {}
        for column, low, high in zip(self.columns, self.lower, self.upper):
            values = ds.features[:, ds.column_index(column)]
            result[column] = (values < low) | (values > high)

        return result

    def notes(self) -> tuple[str, ...]:
        """IQR bounds never skip a column."""
        return ()


Bounds = ZScoreBounds | IqrBounds


def _select_columns(
    ds: LabeledDataset, columns: Sequence[str] | None
) -> tuple[str, ...]:
    if ds.n_rows == 0:
        raise DataError("cannot filter an empty dataset")
    if columns is None:
        return ds.feature_names

    for column in columns:
        ds.column_index(column)

    return tuple(columns)


def fit_zscore_bounds(
    ds: LabeledDataset,
    threshold: float = DEFAULT_Z_THRESHOLD,
    columns: Sequence[str] | None = None,
) -> ZScoreBounds:
    """Compute population mean and standard deviation of each selected column."""
    if not threshold > 0:
        raise ConfigError(f"z-score threshold must be positive, got {threshold}")

    kept: list[str] = []
    means: list[float] = []
    stds: list[float] = []
    skipped: list[str] = []
    for column in _select_columns(ds, columns):
        values = ds.features[:, ds.column_index(column)]
        std = float(np.std(values))
        if std == 0.0:
            LOGGER.warning(
                "Skipping z-score filter on %s: zero standard deviation", column
            )
            skipped.append(column)
            continue

        kept.append(column)
        means.append(float(np.mean(values)))
        stds.append(std)

    return ZScoreBounds(
        tuple(kept), tuple(means), tuple(stds), threshold, tuple(skipped)
    )


def fit_iqr_bounds(
    ds: LabeledDataset,
    multiplier: float = DEFAULT_IQR_MULTIPLIER,
    columns: Sequence[str] | None = None,
) -> IqrBounds:
    """Compute linear-interpolation quartiles and the IQR fences per column."""
    if not multiplier > 0:
        raise ConfigError(f"IQR multiplier must be positive, got {multiplier}")

    selected = _select_columns(ds, columns)
    lower: list[float] = []
    upper: list[float] = []
    for column in selected:
        values = ds.features[:, ds.column_index(column)]
        q1, q3 = np.quantile(values, [0.25, 0.75], method="linear")
        spread = q3 - q1
        lower.append(float(q1 - multiplier * spread))
        upper.append(float(q3 + multiplier * spread))

    return IqrBounds(selected, tuple(lower), tuple(upper))


def apply_bounds(
    ds: LabeledDataset, bounds: Bounds
) -> tuple[LabeledDataset, FilterSummary]:
    """Drop every row that violates the fitted bounds in any column."""
    violations = bounds.violations(ds)
    remove = np.zeros(ds.n_rows, dtype=bool)
    for mask in violations.values():
        remove |= mask

    filtered = ds.take(np.flatnonzero(~remove))
    summary = FilterSummary(
        rows_before=ds.n_rows,
        rows_after=filtered.n_rows,
        removed_by_column={
            column: int(mask.sum()) for column, mask in violations.items()
        },
        notes=bounds.notes(),
    )
    return filtered, summary


def zscore_filter(
    ds: LabeledDataset,
    threshold: float = DEFAULT_Z_THRESHOLD,
    columns: Sequence[str] | None = None,
) -> tuple[LabeledDataset, FilterSummary]:
    """Remove rows with |x - mean| / std above the threshold in any column."""
    filtered, summary = apply_bounds(ds, fit_zscore_bounds(ds, threshold, columns))
    LOGGER.info(
        "z-score filter (threshold %s) kept %d of %d rows",
        threshold,
        summary.rows_after,
        summary.rows_before,
    )
    return filtered, summary


def iqr_filter(
    ds: LabeledDataset,
    multiplier: float = DEFAULT_IQR_MULTIPLIER,
    columns: Sequence[str] | None = None,
) -> tuple[LabeledDataset, FilterSummary]:
    """Remove rows outside the IQR fences in any column."""
    filtered, summary = apply_bounds(ds, fit_iqr_bounds(ds, multiplier, columns))
    LOGGER.info(
        "IQR filter (multiplier %s) kept %d of %d rows",
        multiplier,
        summary.rows_after,
        summary.rows_before,
    )
    return filtered, summary


def random_oversample(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """Resample every class with replacement up to the majority count.

    Original rows come first in input order, followed by the drawn copies
    grouped by class code.
    """
    counts = ds.class_counts()
    for code, count in enumerate(counts):
        if count == 0:
            raise DataError(f"class {ds.class_names[code]} has no rows to oversample")

    target = int(counts.max())
    extra: list[npt.NDArray[np.int64]] = []
    for code, count in enumerate(counts):
        if count == target:
            continue

        # Each class draws from its own stream
        rng = derive_rng(seed, Stream.OVERSAMPLE, code)
        rows = np.flatnonzero(ds.labels == code)
        extra.append(rows[rng.integers(0, count, size=target - int(count))])

    LOGGER.debug("Random oversampling every class to %d rows", target)
    return ds.take(np.concatenate([np.arange(ds.n_rows), *extra]))


def stratified_split(
    ds: LabeledDataset,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    seed: int = 0,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Send floor(test_fraction * count) rows of every class to the test set."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must lie in (0, 1), got {test_fraction}")

    test_rows: list[npt.NDArray[np.int64]] = []
    for code, count in enumerate(ds.class_counts()):
        if count == 0:
            continue
        if count < 2:
            raise DataError(
                f"class {ds.class_names[code]} has {count} row; "
                "at least 2 are needed to split"
            )

        n_test = math.floor(test_fraction * count + SPLIT_EPSILON)
        rng = derive_rng(seed, Stream.SPLIT, code)
        rows = np.flatnonzero(ds.labels == code)
        test_rows.append(rng.permutation(rows)[:n_test])

    in_test = np.zeros(ds.n_rows, dtype=bool)
    for rows in test_rows:
        in_test[rows] = True

    train, test = ds.take(np.flatnonzero(~in_test)), ds.take(np.flatnonzero(in_test))
    LOGGER.info(
        "Stratified split: %d train rows, %d test rows", train.n_rows, test.n_rows
    )
    return train, test


def histogram_csv(
    before: LabeledDataset, after: LabeledDataset, column: str, bins: int = 20
) -> str:
    """Tabulate one column's distribution before and after a transform."""
    if bins < 1:
        raise ConfigError(f"histogram needs at least one bin, got {bins}")

    before_values = before.features[:, before.column_index(column)]
    after_values = after.features[:, after.column_index(column)]
    pooled = np.concatenate([before_values, after_values])
    edges = np.histogram_bin_edges(pooled, bins=bins)
    count_before, _ = np.histogram(before_values, bins=edges)
    count_after, _ = np.histogram(after_values, bins=edges)

    frame = pd.DataFrame(
        {
            "bin_left": [format_number(edge) for edge in edges[:-1]],
            "bin_right": [format_number(edge) for edge in edges[1:]],
            "count_before": count_before,
            "count_after": count_after,
        }
    )
    text: str = frame.to_csv(index=False, lineterminator="\n")
    return text
