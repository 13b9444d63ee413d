"""End-to-end experiment runner: clean, filter, split, resample, fit, evaluate."""

from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
import time
from typing import Any

from .bundle import Bundle, save_bundle, slugify, write_json
from .config import PipelineConfig
from .const import (
    ENSEMBLE_MODEL_NAME,
    FORMAT_VERSION,
    LOGGER,
    MANIFEST_FILE,
    MODELS_DIR,
    SOFT_VOTE_MODEL_NAME,
    TIMINGS_FILE,
)
from .errors import ConfigError, DataError
from .kvfile import format_key_values
from .learners import Classifier, fit_learner
from .metrics import MetricsReport, ReportFormat, evaluate, render_reports
from .preprocess import (
    FilterSummary,
    histogram_csv,
    iqr_filter,
    stratified_split,
    zscore_filter,
)
from .resample import ResampleMethod, resample
from .seeding import Stream, derive_seed
from .stacking import fit_soft_vote, fit_stacking
from .synthetic import synthesize_credit_table
from .tabular import (
    CleaningState,
    LabeledDataset,
    Table,
    clean_table,
    parse_csv,
    to_dataset,
)

CLEANING_REPORT_FILE = "cleaning_report.txt"
FILTER_SUMMARY_FILE = "filter_summary.txt"
RESAMPLE_SUMMARY_FILE = "resample_summary.txt"
PROVENANCE_FILE = "provenance.csv"
HISTOGRAM_DIR = "histograms"
REPORT_EXTENSIONS = {
    ReportFormat.TEXT: "txt",
    ReportFormat.MARKDOWN: "md",
    ReportFormat.CSV: "csv",
}

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class StageRecord:
    """Row bookkeeping of one pipeline stage."""

    name: str
    rows_before: int
    rows_after: int
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the record."""
        return {
            "name": self.name,
            "rows_before": self.rows_before,
            "rows_after": self.rows_after,
            **self.details,
        }


@dataclass
class VariantResult:
    """One pass of resample, fit and evaluate on the shared split."""

    name: str
    method: ResampleMethod
    stages: list[StageRecord] = field(default_factory=list)
    reports: list[MetricsReport] = field(default_factory=list)
    bundles: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the result."""
        return {
            "name": self.name,
            "resample_method": str(self.method),
            "stages": [stage.to_dict() for stage in self.stages],
            "reports": [report.to_dict() for report in self.reports],
            "bundles": dict(self.bundles),
        }


@dataclass
class RunManifest:
    """Configuration, row counts and results of a run; stages in run order."""

    config: dict[str, Any]
    stages: list[StageRecord] = field(default_factory=list)
    variants: list[VariantResult] = field(default_factory=list)
    status: str = STATUS_RUNNING
    failed_stage: str | None = None
    error: str | None = None
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict[str, Any]:
        """Serialize the manifest."""
        return {
            "format_version": self.format_version,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "config": self.config,
            "stages": [stage.to_dict() for stage in self.stages],
            "variants": [variant.to_dict() for variant in self.variants],
        }


class StageClock:
    """Wall-clock time per stage; remembers the stage that is running."""

    def __init__(self) -> None:
        """Start with no stages timed."""
        self.seconds: dict[str, float] = {}
        self.current: str | None = None

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time the enclosed block under a stage name."""
        self.current = name
        LOGGER.info("Stage %s started", name)
        start = time.perf_counter()
        yield
        self.seconds[name] = time.perf_counter() - start
        LOGGER.debug("Stage %s took %.3f s", name, self.seconds[name])
        self.current = None


def read_table(path: Path) -> Table:
    """Parse a CSV file, reporting I/O failures as DataError."""
    try:
        with path.open(encoding="utf-8", newline="") as source:
            return parse_csv(source)
    except OSError as err:
        raise DataError(f"cannot read {path}: {err.strerror}") from err


def write_text(path: Path, text: str) -> None:
    """Write a text artifact, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_input(config: PipelineConfig) -> tuple[Table, str]:
    path = config.input_file
    if path is None:
        table = synthesize_credit_table(
            config.synthetic_rows, config.seed, label_column=config.label_column
        )
        return table, "synthetic"

    return read_table(path), "csv"


def _write_histograms(
    output: Path,
    prefix: str,
    before: LabeledDataset,
    after: LabeledDataset,
    summary: FilterSummary,
    bins: int,
) -> None:
    for column in summary.removed_by_column:
        write_text(
            output / HISTOGRAM_DIR / f"{prefix}_{slugify(column)}.csv",
            histogram_csv(before, after, column, bins),
        )


def _filter_stage(
    config: PipelineConfig, dataset: LabeledDataset, output: Path, kind: str
) -> tuple[LabeledDataset, FilterSummary]:
    settings = config.filter
    if kind == "zscore":
        columns = settings.zscore_columns
        if columns == ():
            return dataset, FilterSummary(dataset.n_rows, dataset.n_rows)
        filtered, summary = zscore_filter(dataset, settings.z_threshold, columns)
    else:
        columns = settings.iqr_columns
        if columns == ():
            return dataset, FilterSummary(dataset.n_rows, dataset.n_rows)
        filtered, summary = iqr_filter(dataset, settings.iqr_multiplier, columns)

    _write_histograms(output, kind, dataset, filtered, summary, settings.histogram_bins)
    return filtered, summary


def fit_roster(
    config: PipelineConfig, train: LabeledDataset, n_jobs: int = 1
) -> list[tuple[str, Classifier]]:
    """Fit every roster entry, then the ensembles over the stacked entries."""
    ensemble = config.ensemble
    reserved = {ENSEMBLE_MODEL_NAME, SOFT_VOTE_MODEL_NAME}
    models: list[tuple[str, Classifier]] = []
    for index, spec in enumerate(ensemble.bases):
        if spec.name in reserved:
            raise ConfigError(f"base model name '{spec.name}' is reserved")
        LOGGER.info("Fitting %s (%s) on %d rows", spec.name, spec.kind, train.n_rows)
        seed = derive_seed(config.seed, Stream.BASE, index)
        models.append(
            (spec.name, fit_learner(spec.kind, spec.params, train, seed, n_jobs))
        )

    if ensemble.enabled:
        stacking = fit_stacking(
            train,
            ensemble.stacked_bases,
            ensemble.meta,
            ensemble.n_folds,
            config.seed,
            ensemble.meta_features,
            n_jobs,
        )
        models.append((ENSEMBLE_MODEL_NAME, stacking))
    if ensemble.soft_vote:
        soft_vote = fit_soft_vote(train, ensemble.stacked_bases, config.seed, n_jobs)
        models.append((SOFT_VOTE_MODEL_NAME, soft_vote))

    return models


def _run_variant(
    config: PipelineConfig,
    result: VariantResult,
    data: LabeledDataset,
    test: LabeledDataset | None,
    cleaning: CleaningState,
    clock: StageClock,
    n_jobs: int,
) -> None:
    variant_dir = config.output_dir / result.name

    with clock.stage(f"{result.name}.resample"):
        outcome = resample(data, result.method, config.resample.params(config.seed))
        write_text(
            variant_dir / RESAMPLE_SUMMARY_FILE,
            format_key_values(outcome.summary.to_key_values()),
        )
        if outcome.provenance is not None:
            write_text(variant_dir / PROVENANCE_FILE, outcome.provenance.to_csv())
        result.stages.append(
            StageRecord(
                "resample",
                data.n_rows,
                outcome.dataset.n_rows,
                {
                    "method": str(result.method),
                    "rows_added": outcome.summary.rows_added,
                    "rows_removed": outcome.summary.rows_removed,
                },
            )
        )

    train = outcome.dataset
    if test is None:
        with clock.stage(f"{result.name}.split"):
            train, test = stratified_split(
                outcome.dataset, config.test_fraction, config.seed
            )
            result.stages.append(
                StageRecord(
                    "split",
                    outcome.dataset.n_rows,
                    train.n_rows,
                    {"test_rows": test.n_rows},
                )
            )

    with clock.stage(f"{result.name}.fit"):
        models = fit_roster(config, train, n_jobs)
        result.stages.append(
            StageRecord(
                "fit",
                train.n_rows,
                train.n_rows,
                {"models": [name for name, _model in models]},
            )
        )

    with clock.stage(f"{result.name}.evaluate"):
        for name, model in models:
            result.reports.append(evaluate(model, test, name, config.average))
            relative = f"{result.name}/{MODELS_DIR}/{slugify(name)}"
            save_bundle(
                Bundle(
                    model,
                    train.feature_names,
                    train.class_names,
                    config.label_column,
                    cleaning,
                ),
                config.output_dir / relative,
            )
            result.bundles[name] = relative

        for fmt in config.report_formats:
            write_text(
                variant_dir / f"report.{REPORT_EXTENSIONS[fmt]}",
                render_reports(result.reports, fmt),
            )


def _run(
    config: PipelineConfig, manifest: RunManifest, clock: StageClock, n_jobs: int
) -> None:
    output = config.output_dir

    with clock.stage("load"):
        table, source = _load_input(config)
        manifest.stages.append(
            StageRecord(
                "load",
                table.row_count,
                table.row_count,
                {"source": source, "columns": list(table.column_names)},
            )
        )

    with clock.stage("clean"):
        cleaned, report, cleaning = clean_table(
            table,
            config.label_column,
            config.drop_columns,
            config.categorical_columns,
        )
        dataset = to_dataset(cleaned, config.label_column, config.class_order)
        write_text(
            output / CLEANING_REPORT_FILE,
            format_key_values(report.to_key_values()),
        )
        manifest.stages.append(
            StageRecord(
                "clean",
                table.row_count,
                dataset.n_rows,
                {
                    "features": list(dataset.feature_names),
                    "class_counts": dict(
                        zip(dataset.class_names, dataset.class_counts().tolist())
                    ),
                },
            )
        )

    summaries: dict[str, Any] = {}
    for kind in ("zscore", "iqr"):
        with clock.stage(kind):
            filtered, summary = _filter_stage(config, dataset, output, kind)
            summaries.update(summary.to_key_values(f"{kind}."))
            manifest.stages.append(
                StageRecord(
                    kind,
                    dataset.n_rows,
                    filtered.n_rows,
                    {"removed_by_column": dict(summary.removed_by_column)},
                )
            )
            dataset = filtered
    write_text(output / FILTER_SUMMARY_FILE, format_key_values(summaries))

    test: LabeledDataset | None = None
    data = dataset
    if not config.resample.before_split:
        with clock.stage("split"):
            data, test = stratified_split(dataset, config.test_fraction, config.seed)
            manifest.stages.append(
                StageRecord(
                    "split", dataset.n_rows, data.n_rows, {"test_rows": test.n_rows}
                )
            )

    for name, method in config.resample.variants:
        result = VariantResult(name, method)
        manifest.variants.append(result)
        _run_variant(config, result, data, test, cleaning, clock, n_jobs)


def _write_manifest(output: Path, manifest: RunManifest, clock: StageClock) -> None:
    write_json(output / MANIFEST_FILE, manifest.to_dict())
    write_json(
        output / TIMINGS_FILE,
        {name: round(seconds, 6) for name, seconds in clock.seconds.items()},
    )


def run_pipeline(config: PipelineConfig, n_jobs: int = 1) -> RunManifest:
    """Run every stage and variant, writing artifacts under the output directory.

    On failure the manifest is still written, with the completed stages and the
    stage that failed, before the error propagates.
    """
    output = config.output_dir
    output.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config.snapshot())
    clock = StageClock()
    try:
        _run(config, manifest, clock, n_jobs)
    except Exception as err:
        manifest.status = STATUS_FAILED
        manifest.failed_stage = clock.current
        manifest.error = str(err)
        _write_manifest(output, manifest, clock)
        raise

    manifest.status = STATUS_COMPLETED
    _write_manifest(output, manifest, clock)
    LOGGER.info("Run finished; artifacts in %s", output)
    return manifest
