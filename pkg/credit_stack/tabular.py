"""Parse, clean and encode raw CSV credit data into a dense labeled dataset."""

from collections.abc import Iterable, Mapping, Sequence
import csv
from dataclasses import dataclass, field, replace
import io
from typing import Any, TextIO

import numpy as np
import numpy.typing as npt
import pandas as pd

from .const import DEFAULT_CLASS_ORDER, LOGGER
from .errors import CsvParseError, DataError, UnknownClassError, UnknownColumnError

# A cell is Number (float), Text (str) or Missing (None)
Cell = float | str | None

# Columns are numeric when at least this share of observed cells coerce
NUMERIC_FRACTION = 0.5


def _check_column_names(names: Sequence[str]) -> None:
    seen: set[str] = set()
    for name in names:
        if not isinstance(name, str) or not name:
            raise DataError("column names must be non-empty")
        if name in seen:
            raise DataError(f"duplicate column name '{name}'")
        seen.add(name)


@dataclass(frozen=True, eq=False)
class Table:
    """Raw tabular data.

    Numeric columns are float64 with NaN for Missing; text columns are object
    columns holding str or None.
    """

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        """Validate column names."""
        _check_column_names(list(self.frame.columns))

    @property
    def column_names(self) -> tuple[str, ...]:
        """Return the column names in table order."""
        return tuple(str(name) for name in self.frame.columns)

    @property
    def row_count(self) -> int:
        """Return the number of rows."""
        return len(self.frame)

    def column(self, name: str) -> pd.Series:
        """Return a column, raising if it does not exist."""
        if name not in self.frame.columns:
            raise UnknownColumnError(name)

        return self.frame[name]

    def is_numeric(self, name: str) -> bool:
        """Return True if the column holds Number/Missing cells."""
        return bool(pd.api.types.is_float_dtype(self.column(name).dtype))

    def cell(self, row: int, name: str) -> Cell:
        """Return one cell as Number, Text or Missing."""
        value = self.column(name).iat[row]
        if self.is_numeric(name):
            return None if np.isnan(value) else float(value)
        if value is None or (isinstance(value, float) and np.isnan(value)):
            return None

        return str(value)

    def cells(self, name: str) -> list[Cell]:
        """Return every cell of a column."""
        return [self.cell(row, name) for row in range(self.row_count)]

    def missing_count(self, name: str) -> int:
        """Return the number of Missing cells in a column."""
        return int(self.column(name).isna().sum())

    def with_column(self, name: str, values: pd.Series | npt.ArrayLike) -> "Table":
        """Return a copy with a column replaced (or appended)."""
        frame = self.frame.copy()
        frame[name] = values.to_numpy() if isinstance(values, pd.Series) else values
        return Table(frame)

    def drop_columns(self, names: Iterable[str]) -> "Table":
        """Return a copy without the given columns."""
        names = list(names)
        for name in names:
            self.column(name)

        return Table(self.frame.drop(columns=names))

    def select_columns(self, names: Sequence[str]) -> "Table":
        """Return a copy holding only the given columns, in the given order."""
        for name in names:
            self.column(name)

        return Table(self.frame.loc[:, list(names)].copy())

    def equals(self, other: "Table") -> bool:
        """Return True if both tables hold the same columns and cells."""
        if self.column_names != other.column_names:
            return False

        return all(self.cells(name) == other.cells(name) for name in self.column_names)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Dense numeric features plus integer class labels."""

    features: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] = DEFAULT_CLASS_ORDER

    def __post_init__(self) -> None:
        """Normalize arrays, validate shapes and freeze the buffers."""
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, len(self.feature_names))
        if features.ndim != 2:
            raise DataError("features must be a two-dimensional matrix")
        if features.shape[1] != len(self.feature_names):
            raise DataError(
                f"{features.shape[1]} feature columns but "
                f"{len(self.feature_names)} feature names"
            )
        if not np.isfinite(features).all():
            raise DataError("features contain NaN or infinite values")
        if len(labels) != len(features):
            raise DataError(
                f"{len(labels)} labels for {len(features)} feature rows"
            )
        if len(self.class_names) < 1:
            raise DataError("at least one class name is required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError(f"labels must lie in 0..{len(self.class_names) - 1}")

        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_rows(self) -> int:
        """Return the number of rows."""
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        """Return the number of feature columns."""
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        """Return the size of the class codebook."""
        return len(self.class_names)

    def class_counts(self) -> npt.NDArray[np.int64]:
        """Return the number of rows per class code."""
        return np.bincount(self.labels, minlength=self.n_classes).astype(np.int64)

    def column_index(self, name: str) -> int:
        """Return the position of a feature column."""
        try:
            return self.feature_names.index(name)
        except ValueError as err:
            raise UnknownColumnError(name) from err

    def take(self, rows: npt.ArrayLike) -> "LabeledDataset":
        """Return the given rows, features and labels in lockstep."""
        index = np.asarray(rows, dtype=np.int64)
        return replace(self, features=self.features[index], labels=self.labels[index])


@dataclass(frozen=True)
class CleaningReport:
    """Per-column bookkeeping of the cleaning steps."""

    coerced_cells: Mapping[str, int] = field(default_factory=dict)
    imputed_cells: Mapping[str, int] = field(default_factory=dict)
    column_means: Mapping[str, float] = field(default_factory=dict)

    def to_key_values(self) -> dict[str, Any]:
        """Flatten the report for a key=value file."""
        flat: dict[str, Any] = {}
        for prefix, values in (
            ("coerced_cells", self.coerced_cells),
            ("imputed_cells", self.imputed_cells),
            ("column_means", self.column_means),
        ):
            for column, value in values.items():
                flat[f"{prefix}.{column}"] = value

        return flat


@dataclass(frozen=True)
class CategoricalEncoding:
    """Code book of a text column, codes by first appearance."""

    column: str
    levels: tuple[str, ...]

    @property
    def missing_code(self) -> int:
        """Return the code reserved for Missing (and unseen) values."""
        return len(self.levels)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the encoding."""
        return {"column": self.column, "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CategoricalEncoding":
        """Deserialize an encoding."""
        return cls(column=str(data["column"]), levels=tuple(data["levels"]))


@dataclass(frozen=True)
class CleaningState:
    """Everything needed to replay cleaning on new rows."""

    label_column: str
    dropped_columns: tuple[str, ...]
    feature_columns: tuple[str, ...]
    numeric_columns: tuple[str, ...]
    column_means: Mapping[str, float]
    encodings: tuple[CategoricalEncoding, ...]

    def to_dict(self) -> dict[str, Any]:
        """Serialize the state."""
        return {
            "label_column": self.label_column,
            "dropped_columns": list(self.dropped_columns),
            "feature_columns": list(self.feature_columns),
            "numeric_columns": list(self.numeric_columns),
            "column_means": dict(self.column_means),
            "encodings": [encoding.to_dict() for encoding in self.encodings],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CleaningState":
        """Deserialize a state."""
        return cls(
            label_column=str(data["label_column"]),
            dropped_columns=tuple(data["dropped_columns"]),
            feature_columns=tuple(data["feature_columns"]),
            numeric_columns=tuple(data["numeric_columns"]),
            column_means={str(k): float(v) for k, v in data["column_means"].items()},
            encodings=tuple(
                CategoricalEncoding.from_dict(item) for item in data["encodings"]
            ),
        )


def parse_csv(source: str | TextIO) -> Table:
    """Parse CSV text with a header row into a Table of Text/Missing cells."""
    text = source if isinstance(source, str) else source.read()
    text = text.removeprefix("﻿")
    if not text.strip():
        raise CsvParseError("empty input")

    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
        _check_column_names(header)

        records: list[list[str]] = []
        for row_no, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise CsvParseError(
                    f"row {row_no}: expected {len(header)} fields, got {len(record)}"
                )
            records.append(record)
    except csv.Error as err:
        raise CsvParseError(f"malformed CSV: {err}") from err

    frame = pd.DataFrame(
        {
            name: pd.Series(
                [record[index] or None for record in records], dtype=object
            )
            for index, name in enumerate(header)
        }
    )
    return Table(frame)


def format_number(value: float) -> str | None:
    """Render a number in shortest positional form, None for Missing."""
    if np.isnan(value):
        return None

    return np.format_float_positional(value, trim="-")


def serialize_csv(table: Table) -> str:
    """Render a Table as CSV text; Missing cells become empty fields."""
    frame = table.frame.copy()
    for name in table.column_names:
        if table.is_numeric(name):
            frame[name] = table.frame[name].map(format_number).astype(object)

    text: str = frame.to_csv(index=False, lineterminator="\n")
    return text


def _coerce_series(series: pd.Series) -> pd.Series:
    cleaned = series.astype(object).str.strip().str.removesuffix("_").str.strip()
    numbers = pd.to_numeric(cleaned, errors="coerce").astype(np.float64)
    return numbers.where(np.isfinite(numbers))


def coerce_numeric(table: Table, column: str) -> Table:
    """Parse a column's cells as reals; unparseable cells become Missing."""
    if table.is_numeric(column):
        return table

    return table.with_column(column, _coerce_series(table.column(column)))


def infer_numeric_columns(table: Table, exclude: Iterable[str] = ()) -> tuple[str, ...]:
    """Return the columns where most observed cells parse as numbers."""
    excluded = set(exclude)
    numeric: list[str] = []
    for name in table.column_names:
        if name in excluded:
            continue
        if table.is_numeric(name):
            numeric.append(name)
            continue

        series = table.column(name)
        observed = int(series.notna().sum())
        parsed = int(_coerce_series(series).notna().sum())
        if observed == 0 or parsed / observed >= NUMERIC_FRACTION:
            numeric.append(name)

    return tuple(numeric)


def impute_mean(
    table: Table, columns: Iterable[str] | None = None
) -> tuple[Table, CleaningReport]:
    """Replace Missing cells of numeric columns by the column mean."""
    if columns is None:
        columns = [name for name in table.column_names if table.is_numeric(name)]

    imputed: dict[str, int] = {}
    means: dict[str, float] = {}
    for name in columns:
        if not table.is_numeric(name):
            raise DataError(f"column {name} is not numeric")

        series = table.column(name)
        if series.notna().sum() == 0:
            raise DataError(f"column {name} has no observed values")

        mean = float(series.mean())
        imputed[name] = int(series.isna().sum())
        means[name] = mean
        if imputed[name]:
            table = table.with_column(name, series.fillna(mean))

    return table, CleaningReport(imputed_cells=imputed, column_means=means)


def fit_encoding(table: Table, column: str) -> CategoricalEncoding:
    """Learn first-appearance codes for a text column."""
    if table.is_numeric(column):
        raise DataError(f"column {column} is not a text column")

    _codes, uniques = pd.factorize(table.column(column), use_na_sentinel=True)
    return CategoricalEncoding(column, tuple(str(level) for level in uniques))


def apply_encoding(table: Table, encoding: CategoricalEncoding) -> tuple[Table, int]:
    """Replace a text column by its codes; returns the count of unseen values."""
    series = table.column(encoding.column)
    lookup = {level: code for code, level in enumerate(encoding.levels)}
    codes = series.map(lookup)
    unseen = int((series.notna() & codes.isna()).sum())
    codes = codes.fillna(encoding.missing_code).astype(np.float64)
    return table.with_column(encoding.column, codes), unseen


def encode_categorical(table: Table, column: str) -> Table:
    """Replace a text column by first-appearance integer codes."""
    encoded, _unseen = apply_encoding(table, fit_encoding(table, column))
    return encoded


def clean_table(
    table: Table,
    label_column: str,
    drop_columns: Iterable[str] = (),
    categorical_columns: Iterable[str] | None = None,
) -> tuple[Table, CleaningReport, CleaningState]:
    """Drop, coerce, impute and encode every non-label column."""
    table.column(label_column)
    dropped = tuple(drop_columns)
    table = table.drop_columns(dropped)
    features = [name for name in table.column_names if name != label_column]

    if categorical_columns is None:
        numeric = infer_numeric_columns(table, exclude=(label_column,))
    else:
        categorical = set(categorical_columns)
        for name in categorical:
            table.column(name)
        numeric = tuple(name for name in features if name not in categorical)

    coerced: dict[str, int] = {}
    for name in numeric:
        before = table.missing_count(name)
        table = coerce_numeric(table, name)
        coerced[name] = table.missing_count(name) - before

    table, report = impute_mean(table, numeric)

    encodings: list[CategoricalEncoding] = []
    for name in features:
        if name in numeric:
            continue
        encoding = fit_encoding(table, name)
        table, _unseen = apply_encoding(table, encoding)
        encodings.append(encoding)

    LOGGER.info(
        "Cleaned %d rows: %d numeric and %d categorical columns, %d cells imputed",
        table.row_count,
        len(numeric),
        len(encodings),
        sum(report.imputed_cells.values()),
    )

    state = CleaningState(
        label_column=label_column,
        dropped_columns=dropped,
        feature_columns=tuple(features),
        numeric_columns=tuple(numeric),
        column_means=dict(report.column_means),
        encodings=tuple(encodings),
    )
    return table, replace(report, coerced_cells=coerced), state


def apply_cleaning(table: Table, state: CleaningState) -> Table:
    """Replay a fitted cleaning on new rows; keeps the label column if present."""
    for name in state.feature_columns:
        table.column(name)

    columns = list(state.feature_columns)
    if state.label_column in table.column_names:
        columns.append(state.label_column)
    table = table.select_columns(columns)

    for name in state.numeric_columns:
        table = coerce_numeric(table, name)
        table = table.with_column(
            name, table.column(name).fillna(state.column_means[name])
        )

    for encoding in state.encodings:
        table, unseen = apply_encoding(table, encoding)
        if unseen:
            LOGGER.warning(
                "%d unseen values in column %s mapped to the missing code %d",
                unseen,
                encoding.column,
                encoding.missing_code,
            )

    return table


def to_dataset(
    table: Table,
    label_column: str,
    class_order: Sequence[str] = DEFAULT_CLASS_ORDER,
) -> LabeledDataset:
    """Build a dense labeled dataset from a fully numeric table."""
    label_series = table.column(label_column)
    feature_names = [name for name in table.column_names if name != label_column]

    for name in feature_names:
        if not table.is_numeric(name):
            raise DataError(f"column {name} is not numeric")
        if missing := table.missing_count(name):
            raise DataError(f"column {name} has {missing} missing cells")

    lookup = {name: code for code, name in enumerate(class_order)}
    labels = np.empty(table.row_count, dtype=np.int64)
    for row, value in enumerate(label_series):
        if value is None or (isinstance(value, float) and np.isnan(value)):
            raise DataError(f"row {row + 1}: missing label")
        key = str(value).strip()
        if key not in lookup:
            raise UnknownClassError(key)
        labels[row] = lookup[key]

    features = (
        table.frame.loc[:, feature_names].to_numpy(dtype=np.float64)
        if feature_names
        else np.empty((table.row_count, 0))
    )
    return LabeledDataset(features, labels, tuple(feature_names), tuple(class_order))


def dataset_to_table(ds: LabeledDataset, label_column: str) -> Table:
    """Render a dataset as a Table with label names in the label column."""
    frame = pd.DataFrame(ds.features, columns=list(ds.feature_names))
    frame[label_column] = pd.Series(
        [ds.class_names[code] for code in ds.labels], dtype=object
    )
    return Table(frame)


def read_dataset(
    source: str | TextIO,
    label_column: str,
    class_order: Sequence[str] = DEFAULT_CLASS_ORDER,
) -> LabeledDataset:
    """Parse an already cleaned CSV straight into a dataset."""
    table = parse_csv(source)
    for name in table.column_names:
        if name != label_column:
            table = coerce_numeric(table, name)

    return to_dataset(table, label_column, class_order)
