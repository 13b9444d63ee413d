"""Confusion matrices, averaged metrics, one-vs-rest ROC AUC and report tables."""

from collections.abc import Sequence
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Backport of enum.StrEnum: members are str, str() gives the value."""

        __str__ = str.__str__  # type: ignore[assignment]
        __format__ = str.__format__  # type: ignore[assignment]
import io
import math
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.stats import rankdata

from .const import LOGGER
from .errors import ConfigError, DataError
from .learners import Classifier
from .tabular import LabeledDataset

# Rendered tables, in column order
REPORT_COLUMNS = ("Model", "F1 Score", "Recall", "Precision", "ROC AUC")
MISSING_VALUE = "N/A"
DECIMALS = 4


class Average(StrEnum):
    """How per-class metrics are combined."""

    MACRO = "macro"
    WEIGHTED = "weighted"


class ReportFormat(StrEnum):
    """Rendering of a comparison table."""

    TEXT = "text"
    MARKDOWN = "markdown"
    CSV = "csv"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Entry (i, j) counts rows of true class i predicted as j."""

    counts: npt.NDArray[np.int64]

    @property
    def n_classes(self) -> int:
        """Return the number of classes."""
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        """Return the number of evaluated rows."""
        return int(self.counts.sum())

    def to_list(self) -> list[list[int]]:
        """Return the counts as nested lists."""
        return [[int(value) for value in row] for row in self.counts]


def confusion(
    y_true: npt.ArrayLike, y_pred: npt.ArrayLike, n_classes: int
) -> ConfusionMatrix:
    """Count (true, predicted) label pairs."""
    truth = np.asarray(y_true, dtype=np.int64)
    predicted = np.asarray(y_pred, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise DataError(
            f"{len(truth)} true labels but {len(predicted)} predicted labels"
        )
    for codes in (truth, predicted):
        if codes.size and (codes.min() < 0 or codes.max() >= n_classes):
            raise DataError(f"labels must lie in 0..{n_classes - 1}")

    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (truth, predicted), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class breakdown."""

    name: str
    precision: float
    recall: float
    f1: float
    support: int


def per_class_metrics(
    cm: ConfusionMatrix, class_names: Sequence[str] | None = None
) -> tuple[ClassMetrics, ...]:
    """Return precision, recall and F1 of every class; zero denominators give 0."""
    names = class_names or [str(code) for code in range(cm.n_classes)]
    result: list[ClassMetrics] = []
    for code in range(cm.n_classes):
        hits = float(cm.counts[code, code])
        predicted = float(cm.counts[:, code].sum())
        actual = float(cm.counts[code, :].sum())
        precision = hits / predicted if predicted else 0.0
        recall = hits / actual if actual else 0.0
        denominator = precision + recall
        f1 = 2 * precision * recall / denominator if denominator else 0.0
        result.append(ClassMetrics(names[code], precision, recall, f1, int(actual)))

    return tuple(result)


def precision_recall_f1(
    cm: ConfusionMatrix, average: Average | str = Average.MACRO
) -> tuple[float, float, float]:
    """Return averaged (precision, recall, f1)."""
    average = Average(average)
    classes = per_class_metrics(cm)
    if average is Average.MACRO:
        weights = np.full(len(classes), 1.0 / len(classes))
    else:
        support = np.array([item.support for item in classes], dtype=np.float64)
        weights = support / support.sum() if support.sum() else support

    return (
        float(np.dot(weights, [item.precision for item in classes])),
        float(np.dot(weights, [item.recall for item in classes])),
        float(np.dot(weights, [item.f1 for item in classes])),
    )


def binary_auc(positive: npt.ArrayLike, scores: npt.ArrayLike) -> float:
    """Mann-Whitney AUC with mid-ranks, so tied pairs count one half."""
    flags = np.asarray(positive, dtype=bool)
    values = np.asarray(scores, dtype=np.float64)
    n_pos = int(flags.sum())
    n_neg = len(flags) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: need both positive and negative rows")

    ranks = rankdata(values, method="average")
    return float((ranks[flags].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_ovr(
    y_true: npt.ArrayLike,
    scores: npt.ArrayLike,
    average: Average | str = Average.MACRO,
) -> float:
    """Average the one-vs-rest AUC of every class present in y_true."""
    average = Average(average)
    truth = np.asarray(y_true, dtype=np.int64)
    matrix = np.asarray(scores, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(truth):
        raise DataError("scores must hold one probability row per label")

    present = [code for code in range(matrix.shape[1]) if (truth == code).any()]
    if len(present) < 2:
        raise DataError("AUC undefined: only one class present")

    aucs = np.array([binary_auc(truth == code, matrix[:, code]) for code in present])
    if average is Average.MACRO:
        return float(aucs.mean())

    support = np.array([(truth == code).sum() for code in present], dtype=np.float64)
    return float(np.dot(support / support.sum(), aucs))


def predict_labels(probabilities: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
    """Return the argmax class per row; ties go to the lowest class code."""
    return np.argmax(probabilities, axis=1).astype(np.int64)


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation of one model on one test set."""

    model_name: str
    f1: float
    recall: float
    precision: float
    roc_auc: float | None
    per_class: tuple[ClassMetrics, ...]
    confusion: tuple[tuple[int, ...], ...]
    n_test: int
    average: Average = Average.MACRO

    def to_dict(self) -> dict[str, Any]:
        """Serialize the report."""
        return {
            "model": self.model_name,
            "average": str(self.average),
            "f1": self.f1,
            "recall": self.recall,
            "precision": self.precision,
            "roc_auc": self.roc_auc,
            "n_test": self.n_test,
            "confusion": [list(row) for row in self.confusion],
            "per_class": [
                {
                    "class": item.name,
                    "precision": item.precision,
                    "recall": item.recall,
                    "f1": item.f1,
                    "support": item.support,
                }
                for item in self.per_class
            ],
        }


def evaluate_probabilities(
    probabilities: npt.NDArray[np.float64],
    test: LabeledDataset,
    name: str,
    average: Average | str = Average.MACRO,
) -> MetricsReport:
    """Score predicted probabilities against the test labels."""
    average = Average(average)
    cm = confusion(test.labels, predict_labels(probabilities), test.n_classes)
    precision, recall, f1 = precision_recall_f1(cm, average)
    try:
        auc: float | None = roc_auc_ovr(test.labels, probabilities, average)
    except DataError as err:
        LOGGER.warning("ROC AUC of %s not reported: %s", name, err)
        auc = None

    return MetricsReport(
        model_name=name,
        f1=f1,
        recall=recall,
        precision=precision,
        roc_auc=auc,
        per_class=per_class_metrics(cm, test.class_names),
        confusion=tuple(tuple(row) for row in cm.to_list()),
        n_test=test.n_rows,
        average=average,
    )


def evaluate(
    model: Classifier,
    test: LabeledDataset,
    name: str,
    average: Average | str = Average.MACRO,
) -> MetricsReport:
    """Predict the test set and score the predictions."""
    if test.n_rows == 0:
        raise DataError("cannot evaluate on an empty test set")

    probabilities = model.predict_proba(test.features)
    return evaluate_probabilities(probabilities, test, name, average)


@dataclass(frozen=True)
class ReportRow:
    """One line of a comparison table; metrics may be missing."""

    model: str
    f1: float | None
    recall: float | None
    precision: float | None
    roc_auc: float | None

    @classmethod
    def from_report(cls, report: MetricsReport) -> "ReportRow":
        """Take the table fields of a report."""
        return cls(
            report.model_name,
            report.f1,
            report.recall,
            report.precision,
            report.roc_auc,
        )

    def cells(self) -> list[str]:
        """Return the formatted cells in column order."""
        return [
            self.model,
            *(
                format_metric(value)
                for value in (self.f1, self.recall, self.precision, self.roc_auc)
            ),
        ]


def format_metric(value: float | None) -> str:
    """Fixed four-decimal formatting, N/A for a missing value."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return MISSING_VALUE

    return f"{value:.{DECIMALS}f}"


def _as_rows(reports: Sequence[MetricsReport | ReportRow]) -> list[ReportRow]:
    return [
        item if isinstance(item, ReportRow) else ReportRow.from_report(item)
        for item in reports
    ]


def render_reports(
    reports: Sequence[MetricsReport | ReportRow],
    fmt: ReportFormat | str = ReportFormat.TEXT,
) -> str:
    """Render a comparison table as aligned text, markdown or CSV."""
    try:
        fmt = ReportFormat(fmt)
    except ValueError as err:
        raise ConfigError(f"unknown report format '{fmt}'") from err

    rows = [row.cells() for row in _as_rows(reports)]
    if fmt is ReportFormat.CSV:
        frame = pd.DataFrame(rows, columns=list(REPORT_COLUMNS))
        text: str = frame.to_csv(index=False, lineterminator="\n")
        return text

    if fmt is ReportFormat.MARKDOWN:
        lines = [
            "| " + " | ".join(REPORT_COLUMNS) + " |",
            "|" + "|".join(["---"] + ["---:"] * (len(REPORT_COLUMNS) - 1)) + "|",
        ]
        lines.extend("| " + " | ".join(cells) + " |" for cells in rows)
        return "\n".join(lines) + "\n"

    widths = [
        max([len(header), *(len(cells[index]) for cells in rows)])
        for index, header in enumerate(REPORT_COLUMNS)
    ]

    def line(cells: Sequence[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = (cell.rjust(width) for cell, width in zip(cells[1:], widths[1:]))
        return "  ".join([first, *rest]).rstrip()

    return "\n".join([line(REPORT_COLUMNS), *(line(cells) for cells in rows)]) + "\n"


def read_reports_csv(text: str) -> list[ReportRow]:
    """Read a CSV comparison table back into rows."""
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise DataError(f"malformed report CSV: {err}") from err

    missing = [column for column in REPORT_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"report CSV lacks columns: {', '.join(missing)}")

    def parse(value: str) -> float | None:
        value = value.strip()
        if not value or value == MISSING_VALUE:
            return None
        try:
            return float(value)
        except ValueError as err:
            raise DataError(f"invalid metric value '{value}'") from err

    return [
        ReportRow(
            str(record["Model"]),
            parse(record["F1 Score"]),
            parse(record["Recall"]),
            parse(record["Precision"]),
            parse(record["ROC AUC"]),
        )
        for record in frame.to_dict("records")
    ]
