"""Experiment configuration read from key=value files."""

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    DEFAULT_CLASS_ORDER,
    DEFAULT_ENN_K,
    DEFAULT_IQR_MULTIPLIER,
    DEFAULT_LABEL_COLUMN,
    DEFAULT_N_FOLDS,
    DEFAULT_SMOTE_K,
    DEFAULT_TEST_FRACTION,
    DEFAULT_Z_THRESHOLD,
)
from .errors import ConfigError
from .kvfile import nest_keys, parse_key_values
from .learners import LearnerKind, learner_kind, params_from_mapping
from .learners.base import NON_NEGATIVE_INT, POSITIVE_INT, validate
from .learners.forest import ForestParams
from .metrics import Average, ReportFormat
from .resample import ResampleMethod, ResampleParams
from .stacking import BaseSpec, MetaFeatures, check_bases, stacked_bases

ALL_COLUMNS = "*"
DEFAULT_OUTPUT_DIR = "output"
DEFAULT_SYNTHETIC_ROWS = 5000
DEFAULT_HISTOGRAM_BINS = 20

DEFAULT_BASE_NAMES = {
    LearnerKind.TREE: "Decision Tree",
    LearnerKind.FOREST: "Random Forest",
    LearnerKind.GBDT: "GBDT",
    LearnerKind.KNN: "KNN",
    LearnerKind.LOGISTIC: "Logistic Regression",
    LearnerKind.DUMMY: "Dummy",
}
DEFAULT_ROSTER = (LearnerKind.FOREST, LearnerKind.GBDT, LearnerKind.KNN)

# Variant names, in run order
BASELINE_VARIANT = "baseline"
SMOTEENN_VARIANT = "smoteenn"


def comma_list(value: Any) -> tuple[str, ...]:
    """Split a comma-separated value into stripped, non-empty items."""
    if isinstance(value, str):
        return tuple(item.strip() for item in value.split(",") if item.strip())
    if isinstance(value, list | tuple):
        return tuple(str(item) for item in value)

    raise vol.Invalid("expected a comma-separated list")


def column_selection(value: Any) -> tuple[str, ...] | None:
    """Parse a column list; `*` selects every feature column (None)."""
    if isinstance(value, str) and value.strip() == ALL_COLUMNS:
        return None

    return comma_list(value)


def report_formats(value: Any) -> tuple[ReportFormat, ...]:
    """Parse a list of report formats."""
    try:
        formats = tuple(ReportFormat(item) for item in comma_list(value))
    except ValueError as err:
        raise vol.Invalid(str(err)) from err
    if not formats:
        raise vol.Invalid("at least one report format is required")

    return formats


def _unique(value: tuple[str, ...]) -> tuple[str, ...]:
    if len(set(value)) != len(value):
        raise vol.Invalid("entries must be unique")

    return value


NON_EMPTY_STR = vol.All(str, vol.Length(min=1))
POSITIVE_FLOAT = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
OPEN_FRACTION = vol.All(
    vol.Coerce(float),
    vol.Range(min=0.0, max=1.0, min_included=False, max_included=False),
)

SECTIONS = (
    "input",
    "clean",
    "filter",
    "split",
    "resample",
    "ensemble",
    "meta",
    "metrics",
    "report",
    "base",
)

TOP_SCHEMA = vol.Schema(
    {
        vol.Required("seed"): NON_NEGATIVE_INT,
        vol.Optional("label_column"): NON_EMPTY_STR,
        vol.Optional("class_order"): vol.All(comma_list, vol.Length(min=2), _unique),
        vol.Optional("output_dir"): NON_EMPTY_STR,
        **{vol.Optional(section): dict for section in SECTIONS},
    }
)
ENSEMBLE_FILE_SCHEMA = vol.Schema(
    {
        vol.Optional("seed"): NON_NEGATIVE_INT,
        vol.Optional("ensemble"): dict,
        vol.Optional("meta"): dict,
        vol.Optional("base"): dict,
    }
)
INPUT_SCHEMA = vol.Schema(
    {
        vol.Optional("path"): NON_EMPTY_STR,
        vol.Optional("synthetic_rows"): POSITIVE_INT,
    }
)
CLEAN_SCHEMA = vol.Schema(
    {
        vol.Optional("drop_columns"): comma_list,
        vol.Optional("categorical_columns"): comma_list,
    }
)
FILTER_SCHEMA = vol.Schema(
    {
        vol.Optional("z_threshold"): POSITIVE_FLOAT,
        vol.Optional("zscore_columns"): column_selection,
        vol.Optional("iqr_multiplier"): POSITIVE_FLOAT,
        vol.Optional("iqr_columns"): column_selection,
        vol.Optional("histogram_bins"): POSITIVE_INT,
    }
)
SPLIT_SCHEMA = vol.Schema({vol.Optional("test_fraction"): OPEN_FRACTION})
RESAMPLE_SCHEMA = vol.Schema(
    {
        vol.Optional("baseline"): vol.All(
            vol.Coerce(ResampleMethod),
            vol.In([ResampleMethod.NONE, ResampleMethod.ROS]),
        ),
        vol.Optional("smoteenn"): vol.Boolean(),
        vol.Optional("smote_k"): POSITIVE_INT,
        vol.Optional("enn_k"): POSITIVE_INT,
        vol.Optional("before_split"): vol.Boolean(),
    }
)
ENSEMBLE_SCHEMA = vol.Schema(
    {
        vol.Optional("enabled"): vol.Boolean(),
        vol.Optional("n_folds"): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional("meta_features"): vol.Coerce(MetaFeatures),
        vol.Optional("soft_vote"): vol.Boolean(),
    }
)
BASE_SCHEMA = vol.Schema(
    {
        vol.Required("kind"): NON_EMPTY_STR,
        vol.Optional("name"): NON_EMPTY_STR,
        vol.Optional("params"): dict,
        vol.Optional("stack"): vol.Boolean(),
    }
)
METRICS_SCHEMA = vol.Schema({vol.Optional("average"): vol.Coerce(Average)})
REPORT_SCHEMA = vol.Schema({vol.Optional("formats"): report_formats})


def _default_roster() -> tuple[BaseSpec, ...]:
    return tuple(BaseSpec(DEFAULT_BASE_NAMES[kind], kind) for kind in DEFAULT_ROSTER)


def _selection_to_json(columns: tuple[str, ...] | None) -> str | list[str]:
    return ALL_COLUMNS if columns is None else list(columns)


@dataclass(frozen=True)
class FilterConfig:
    """Noise and outlier filter settings; an empty column list disables a filter."""

    z_threshold: float = DEFAULT_Z_THRESHOLD
    zscore_columns: tuple[str, ...] | None = None
    iqr_multiplier: float = DEFAULT_IQR_MULTIPLIER
    iqr_columns: tuple[str, ...] | None = ()
    histogram_bins: int = DEFAULT_HISTOGRAM_BINS

    def to_dict(self) -> dict[str, Any]:
        """Serialize the settings."""
        return {
            "z_threshold": self.z_threshold,
            "zscore_columns": _selection_to_json(self.zscore_columns),
            "iqr_multiplier": self.iqr_multiplier,
            "iqr_columns": _selection_to_json(self.iqr_columns),
            "histogram_bins": self.histogram_bins,
        }


@dataclass(frozen=True)
class ResampleConfig:
    """Training-set resampling of the two pipeline variants."""

    baseline: ResampleMethod = ResampleMethod.NONE
    smoteenn: bool = True
    smote_k: int = DEFAULT_SMOTE_K
    enn_k: int = DEFAULT_ENN_K
    before_split: bool = False

    @property
    def variants(self) -> tuple[tuple[str, ResampleMethod], ...]:
        """Return the (name, method) pairs the pipeline runs, in order."""
        variants = [(BASELINE_VARIANT, self.baseline)]
        if self.smoteenn:
            variants.append((SMOTEENN_VARIANT, ResampleMethod.SMOTEENN))

        return tuple(variants)

    def params(self, seed: int) -> ResampleParams:
        """Return sampler parameters for a seed."""
        return ResampleParams(self.smote_k, self.enn_k, seed)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the settings."""
        return {
            "baseline": str(self.baseline),
            "smoteenn": self.smoteenn,
            "smote_k": self.smote_k,
            "enn_k": self.enn_k,
            "before_split": self.before_split,
        }


@dataclass(frozen=True)
class EnsembleConfig:
    """Base model roster plus the stacking settings."""

    bases: tuple[BaseSpec, ...] = field(default_factory=_default_roster)
    meta: ForestParams = field(default_factory=ForestParams)
    enabled: bool = True
    n_folds: int = DEFAULT_N_FOLDS
    meta_features: MetaFeatures = MetaFeatures.OOF
    soft_vote: bool = False

    @property
    def stacked_bases(self) -> tuple[BaseSpec, ...]:
        """Return the bases the stacking and soft-vote ensembles combine."""
        return stacked_bases(self.bases)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the settings."""
        return {
            "bases": [spec.to_dict() for spec in self.bases],
            "meta": self.meta.to_dict(),
            "enabled": self.enabled,
            "n_folds": self.n_folds,
            "meta_features": str(self.meta_features),
            "soft_vote": self.soft_vote,
        }


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one experiment run needs."""

    seed: int
    label_column: str = DEFAULT_LABEL_COLUMN
    class_order: tuple[str, ...] = DEFAULT_CLASS_ORDER
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    input_path: str | None = None
    synthetic_rows: int = DEFAULT_SYNTHETIC_ROWS
    drop_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    test_fraction: float = DEFAULT_TEST_FRACTION
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    average: Average = Average.MACRO
    report_formats: tuple[ReportFormat, ...] = tuple(ReportFormat)
    base_dir: Path = field(default=Path("."), compare=False)

    @property
    def input_file(self) -> Path | None:
        """Return the input CSV resolved against the config file's directory."""
        if self.input_path is None:
            return None

        return self.base_dir / Path(self.input_path).expanduser()

    def snapshot(self) -> dict[str, Any]:
        """Return the settings that determine the run's results.

        The output directory is left out so reruns elsewhere compare equal.
        """
        return {
            "seed": self.seed,
            "label_column": self.label_column,
            "class_order": list(self.class_order),
            "input": {
                "path": self.input_path,
                "synthetic_rows": self.synthetic_rows,
            },
            "clean": {
                "drop_columns": list(self.drop_columns),
                "categorical_columns": (
                    None
                    if self.categorical_columns is None
                    else list(self.categorical_columns)
                ),
            },
            "filter": self.filter.to_dict(),
            "split": {"test_fraction": self.test_fraction},
            "resample": self.resample.to_dict(),
            "ensemble": self.ensemble.to_dict(),
            "metrics": {"average": str(self.average)},
            "report": {"formats": [str(fmt) for fmt in self.report_formats]},
        }


def _section(nested: Mapping[str, Any], name: str) -> dict[str, Any]:
    value = nested.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{name}' must be a section ({name}.<key> = ...)")

    return dict(value)


def parse_bases(section: Mapping[str, Any]) -> tuple[BaseSpec, ...]:
    """Build the base roster from `base.N.kind/name/params.*` keys."""
    indexed: dict[int, Mapping[str, Any]] = {}
    for key, entry in section.items():
        if not key.isdigit():
            raise ConfigError(f"expected base.<index>.<key>, got 'base.{key}'")
        if not isinstance(entry, Mapping):
            raise ConfigError(f"'base.{key}' must be a section")
        if int(key) in indexed:
            raise ConfigError(f"base index {int(key)} given twice")
        indexed[int(key)] = entry

    specs: list[BaseSpec] = []
    for index in sorted(indexed):
        data = validate(BASE_SCHEMA, indexed[index], f"base.{index} settings")
        kind = learner_kind(data["kind"])
        params = params_from_mapping(kind, data.get("params", {}))
        name = data.get("name", DEFAULT_BASE_NAMES[kind])
        specs.append(BaseSpec(name, kind, params, data.get("stack", True)))

    check_bases(specs)
    return tuple(specs)


def parse_ensemble(nested: Mapping[str, Any]) -> EnsembleConfig:
    """Build the ensemble settings from the `base`, `meta` and `ensemble` sections."""
    settings = validate(ENSEMBLE_SCHEMA, _section(nested, "ensemble"), "ensemble")
    bases = _section(nested, "base")
    ensemble = EnsembleConfig(
        bases=parse_bases(bases) if bases else _default_roster(),
        meta=ForestParams.from_mapping(_section(nested, "meta")),
        **settings,
    )
    if (ensemble.enabled or ensemble.soft_vote) and not ensemble.stacked_bases:
        raise ConfigError("an ensemble needs at least one base with stack = true")

    return ensemble


def parse_config(
    text: str, source: str = "<config>", base_dir: Path | None = None
) -> PipelineConfig:
    """Parse and validate a pipeline configuration."""
    nested = nest_keys(parse_key_values(text, source))
    top = validate(TOP_SCHEMA, nested, f"configuration {source}")

    inputs = validate(INPUT_SCHEMA, _section(nested, "input"), "input settings")
    clean = validate(CLEAN_SCHEMA, _section(nested, "clean"), "clean settings")
    filters = validate(FILTER_SCHEMA, _section(nested, "filter"), "filter settings")
    split = validate(SPLIT_SCHEMA, _section(nested, "split"), "split settings")
    resample = validate(
        RESAMPLE_SCHEMA, _section(nested, "resample"), "resample settings"
    )
    metrics = validate(METRICS_SCHEMA, _section(nested, "metrics"), "metrics settings")
    report = validate(REPORT_SCHEMA, _section(nested, "report"), "report settings")

    options: dict[str, Any] = {
        key: top[key] for key in ("label_column", "class_order") if key in top
    }
    if "output_dir" in top:
        options["output_dir"] = Path(top["output_dir"])
    if "path" in inputs:
        options["input_path"] = inputs["path"]
    if "synthetic_rows" in inputs:
        options["synthetic_rows"] = inputs["synthetic_rows"]
    if "test_fraction" in split:
        options["test_fraction"] = split["test_fraction"]
    if "average" in metrics:
        options["average"] = metrics["average"]
    if "formats" in report:
        options["report_formats"] = report["formats"]

    return PipelineConfig(
        seed=top["seed"],
        drop_columns=clean.get("drop_columns", ()),
        categorical_columns=clean.get("categorical_columns"),
        filter=FilterConfig(**filters),
        resample=ResampleConfig(**resample),
        ensemble=parse_ensemble(nested),
        base_dir=base_dir or Path("."),
        **options,
    )


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from err


def load_config(path: str | Path) -> PipelineConfig:
    """Read a pipeline configuration; relative input paths follow the file."""
    path = Path(path)
    return parse_config(_read_text(path), str(path), path.parent)


def load_ensemble(path: str | Path) -> EnsembleConfig:
    """Read an ensemble spec file (`base.N.*`, `meta.*`, `ensemble.*`)."""
    path = Path(path)
    nested = nest_keys(parse_key_values(_read_text(path), str(path)))
    validate(ENSEMBLE_FILE_SCHEMA, nested, f"ensemble spec {path}")
    return parse_ensemble(nested)
