"""SMOTE oversampling, ENN cleaning and their SMOTE-ENN composition."""

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]

import numpy as np
import numpy.typing as npt
import pandas as pd

from .const import DEFAULT_ENN_K, DEFAULT_SMOTE_K, LOGGER
from .errors import ConfigError, DataError
from .neighbors import NeighborIndex
from .preprocess import FilterSummary, random_oversample
from .seeding import Stream, derive_rng
from .tabular import LabeledDataset


class ResampleMethod(StrEnum):
    """Resampling applied to a training set."""

    NONE = "none"
    ROS = "ros"
    SMOTE = "smote"
    ENN = "enn"
    SMOTEENN = "smoteenn"


@dataclass(frozen=True)
class ResampleParams:
    """Neighbor counts and seed for SMOTE and ENN."""

    smote_k: int = DEFAULT_SMOTE_K
    enn_k: int = DEFAULT_ENN_K
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the neighbor counts."""
        if self.smote_k < 1:
            raise ConfigError(f"smote_k must be at least 1, got {self.smote_k}")
        if self.enn_k < 1:
            raise ConfigError(f"enn_k must be at least 1, got {self.enn_k}")


@dataclass(frozen=True, eq=False)
class Provenance:
    """Origin of every synthetic row: row = seed + u * (neighbor - seed)."""

    rows: npt.NDArray[np.int64]
    seed_rows: npt.NDArray[np.int64]
    neighbor_rows: npt.NDArray[np.int64]
    u: npt.NDArray[np.float64]

    def __len__(self) -> int:
        """Return the number of synthetic rows."""
        return len(self.rows)

    def to_csv(self) -> str:
        """Render the sidecar file, one line per synthetic row."""
        frame = pd.DataFrame(
            {
                "row": self.rows,
                "seed_row": self.seed_rows,
                "neighbor_row": self.neighbor_rows,
                "u": self.u,
            }
        )
        text: str = frame.to_csv(index=False, lineterminator="\n")
        return text


@dataclass(frozen=True)
class SmoteResult:
    """Oversampled dataset plus the provenance of its synthetic rows."""

    dataset: LabeledDataset
    provenance: Provenance


@dataclass(frozen=True)
class ResampleOutcome:
    """Result of any resampling method."""

    dataset: LabeledDataset
    summary: FilterSummary
    provenance: Provenance | None = None


def smote_with_provenance(ds: LabeledDataset, params: ResampleParams) -> SmoteResult:
    """Interpolate synthetic rows until every class reaches the majority count.

    Original rows come first; synthetic rows follow, grouped by class code.
    Provenance indices refer to rows of the input dataset.
    """
    counts = ds.class_counts()
    target = int(counts.max()) if counts.size else 0

    new_features: list[npt.NDArray[np.float64]] = []
    new_labels: list[npt.NDArray[np.int64]] = []
    seed_rows: list[npt.NDArray[np.int64]] = []
    neighbor_rows: list[npt.NDArray[np.int64]] = []
    weights: list[npt.NDArray[np.float64]] = []

    for code, count in enumerate(counts):
        if count == target:
            continue
        if count < 2:
            raise DataError(
                f"SMOTE requires ≥ 2 rows per class; class "
                f"{ds.class_names[code]} has {count}"
            )

        rows = np.flatnonzero(ds.labels == code)
        points = ds.features[rows]
        k = min(params.smote_k, int(count) - 1)
        neighbors = NeighborIndex(points).query_rows(np.arange(count), k)

        # Each class draws from its own stream
        rng = derive_rng(params.seed, Stream.SMOTE, code)
        n_new = target - int(count)
        base = rng.integers(0, count, size=n_new)
        pick = rng.integers(0, k, size=n_new)
        u = rng.random(n_new)

        partner = neighbors[base, pick]
        origin = points[base]
        new_features.append(origin + u[:, None] * (points[partner] - origin))
        new_labels.append(np.full(n_new, code, dtype=np.int64))
        seed_rows.append(rows[base])
        neighbor_rows.append(rows[partner])
        weights.append(u)
        LOGGER.debug(
            "SMOTE: %d synthetic rows for class %s (k=%d)",
            n_new,
            ds.class_names[code],
            k,
        )

    n_added = sum(len(block) for block in new_labels)
    output = LabeledDataset(
        np.concatenate([ds.features, *new_features]) if n_added else ds.features,
        np.concatenate([ds.labels, *new_labels]) if n_added else ds.labels,
        ds.feature_names,
        ds.class_names,
    )
    empty_index = np.empty(0, dtype=np.int64)
    provenance = Provenance(
        rows=np.arange(ds.n_rows, ds.n_rows + n_added, dtype=np.int64),
        seed_rows=np.concatenate([empty_index, *seed_rows]),
        neighbor_rows=np.concatenate([empty_index, *neighbor_rows]),
        u=np.concatenate([np.empty(0), *weights]),
    )
    return SmoteResult(output, provenance)


def smote(ds: LabeledDataset, params: ResampleParams) -> LabeledDataset:
    """Oversample every class to the majority count with synthetic rows."""
    return smote_with_provenance(ds, params).dataset


def enn_keep_mask(
    ds: LabeledDataset, enn_k: int = DEFAULT_ENN_K
) -> tuple[npt.NDArray[np.bool_], tuple[str, ...]]:
    """Mark rows whose neighbor plurality agrees with their own label."""
    if ds.n_rows <= enn_k:
        raise DataError(f"ENN needs more than {enn_k} rows, got {ds.n_rows}")

    neighbors = NeighborIndex(ds.features).query_rows(np.arange(ds.n_rows), enn_k)
    votes = np.zeros((ds.n_rows, ds.n_classes), dtype=np.int64)
    for column in range(enn_k):
        votes[np.arange(ds.n_rows), ds.labels[neighbors[:, column]]] += 1

    # argmax resolves ties to the smallest class code
    keep = votes.argmax(axis=1) == ds.labels

    notes: list[str] = []
    for code, count in enumerate(ds.class_counts()):
        members = ds.labels == code
        if count and not keep[members].any():
            LOGGER.warning(
                "ENN would remove every row of class %s; keeping them",
                ds.class_names[code],
            )
            notes.append(f"kept class {ds.class_names[code]}: ENN would empty it")
            keep[members] = True

    return keep, tuple(notes)


def _enn_with_notes(
    ds: LabeledDataset, enn_k: int
) -> tuple[LabeledDataset, tuple[str, ...]]:
    keep, notes = enn_keep_mask(ds, enn_k)
    return ds.take(np.flatnonzero(keep)), notes


def enn(ds: LabeledDataset, enn_k: int = DEFAULT_ENN_K) -> LabeledDataset:
    """Remove, in one pass, every row its nearest neighbors misclassify."""
    cleaned, _notes = _enn_with_notes(ds, enn_k)
    LOGGER.debug("ENN removed %d of %d rows", ds.n_rows - cleaned.n_rows, ds.n_rows)
    return cleaned


def smote_enn(
    ds: LabeledDataset, params: ResampleParams
) -> tuple[LabeledDataset, FilterSummary]:
    """Run SMOTE, then ENN on the oversampled output."""
    result, summary, _provenance = _smote_enn(ds, params)
    return result, summary


def _smote_enn(
    ds: LabeledDataset, params: ResampleParams
) -> tuple[LabeledDataset, FilterSummary, Provenance]:
    oversampled = smote_with_provenance(ds, params)
    cleaned, notes = _enn_with_notes(oversampled.dataset, params.enn_k)
    removed = oversampled.dataset.n_rows - cleaned.n_rows

    LOGGER.info(
        "SMOTE-ENN: %d synthetic rows added, %d rows removed by ENN",
        len(oversampled.provenance),
        removed,
    )
    summary = FilterSummary(
        rows_before=ds.n_rows,
        rows_after=cleaned.n_rows,
        rows_added=len(oversampled.provenance),
        notes=(f"enn removed {removed} rows", *notes),
    )
    return cleaned, summary, oversampled.provenance


def resample(
    ds: LabeledDataset, method: ResampleMethod | str, params: ResampleParams
) -> ResampleOutcome:
    """Apply one resampling method and summarize its row bookkeeping."""
    try:
        method = ResampleMethod(method)
    except ValueError as err:
        raise ConfigError(f"unknown resampling method '{method}'") from err

    if method is ResampleMethod.NONE:
        return ResampleOutcome(ds, FilterSummary(ds.n_rows, ds.n_rows))

    if method is ResampleMethod.ROS:
        output = random_oversample(ds, params.seed)
        return ResampleOutcome(
            output,
            FilterSummary(
                ds.n_rows, output.n_rows, rows_added=output.n_rows - ds.n_rows
            ),
        )

    if method is ResampleMethod.SMOTE:
        result = smote_with_provenance(ds, params)
        summary = FilterSummary(
            ds.n_rows, result.dataset.n_rows, rows_added=len(result.provenance)
        )
        return ResampleOutcome(result.dataset, summary, result.provenance)

    if method is ResampleMethod.ENN:
        cleaned, notes = _enn_with_notes(ds, params.enn_k)
        return ResampleOutcome(
            cleaned, FilterSummary(ds.n_rows, cleaned.n_rows, notes=notes)
        )

    cleaned, summary, provenance = _smote_enn(ds, params)
    return ResampleOutcome(cleaned, summary, provenance)
