"""Test experiment configuration parsing."""

from pathlib import Path

import pytest

from credit_stack.config import (
    DEFAULT_BASE_NAMES,
    EnsembleConfig,
    FilterConfig,
    PipelineConfig,
    load_config,
    load_ensemble,
    parse_config,
)
from credit_stack.errors import ConfigError
from credit_stack.learners import LearnerKind
from credit_stack.learners.boost import BoostParams
from credit_stack.learners.knn import KnnParams
from credit_stack.metrics import Average, ReportFormat
from credit_stack.resample import ResampleMethod
from credit_stack.stacking import MetaFeatures

CONFIG_DIR = Path(__file__).parent.parent / "config"


def test_minimal_config_defaults() -> None:
    """Test only the seed is required."""
    config = parse_config("seed = 7\n")
    assert config == PipelineConfig(seed=7)
    assert config.filter == FilterConfig()
    assert config.filter.zscore_columns is None
    assert config.filter.iqr_columns == ()
    assert config.resample.variants == (
        ("baseline", ResampleMethod.NONE),
        ("smoteenn", ResampleMethod.SMOTEENN),
    )
    assert [spec.kind for spec in config.ensemble.bases] == [
        LearnerKind.FOREST,
        LearnerKind.GBDT,
        LearnerKind.KNN,
    ]
    assert config.report_formats == tuple(ReportFormat)
    assert config.input_file is None


def test_full_config() -> None:
    """Test every section is parsed and coerced."""
    config = parse_config(
        """
        # experiment
        seed = 3
        label_column = Score
        class_order = Low, High
        clean.drop_columns = ID, Name
        clean.categorical_columns = Mix
        filter.z_threshold = 2.5
        filter.zscore_columns = Age, Income
        filter.iqr_columns = *
        split.test_fraction = 0.25
        resample.baseline = ros
        resample.smoteenn = false
        resample.smote_k = 3
        ensemble.n_folds = 4
        ensemble.meta_features = in_sample
        ensemble.soft_vote = yes
        base.1.kind = knn
        base.1.params.k = 9
        base.0.kind = gbdt
        base.0.name = Boosted
        base.0.params.n_rounds = 12
        meta.n_trees = 25
        metrics.average = weighted
        report.formats = csv
        """
    )
    assert config.label_column == "Score"
    assert config.class_order == ("Low", "High")
    assert config.drop_columns == ("ID", "Name")
    assert config.categorical_columns == ("Mix",)
    assert config.filter.zscore_columns == ("Age", "Income")
    assert config.filter.iqr_columns is None
    assert config.test_fraction == 0.25
    assert config.resample.variants == (("baseline", ResampleMethod.ROS),)
    assert config.resample.smote_k == 3

    ensemble = config.ensemble
    assert ensemble.n_folds == 4
    assert ensemble.meta_features is MetaFeatures.IN_SAMPLE
    assert ensemble.soft_vote is True
    assert ensemble.meta.n_trees == 25
    assert [spec.name for spec in ensemble.bases] == ["Boosted", "KNN"]
    assert ensemble.bases[0].params == BoostParams.from_mapping({"n_rounds": "12"})
    assert ensemble.bases[1].params == KnnParams(k=9)
    assert config.average is Average.WEIGHTED
    assert config.report_formats == (ReportFormat.CSV,)


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("label_column = x\n", "required key not provided"),
        ("seed = -1\n", "invalid configuration"),
        ("seed = 1\ncolour = red\n", "extra keys not allowed"),
        ("seed = 1\nsplit.test_fraction = 1.0\n", "invalid split settings"),
        ("seed = 1\nresample.baseline = smote\n", "invalid resample settings"),
        ("seed = 1\nbase.0.kind = svm\n", "unknown model kind 'svm'"),
        ("seed = 1\nbase.first.kind = knn\n", "expected base.<index>.<key>"),
        ("seed = 1\nbase.0.kind = knn\nbase.0.params.k = 0\n", "invalid kNN"),
        ("seed = 1\nbase.0.kind = knn\nbase.1.kind = knn\n", "duplicate base"),
        ("seed = 1\nclass_order = A,A\n", "invalid configuration"),
        ("seed = 1\nreport.formats = pdf\n", "invalid report settings"),
        ("seed = 1\nfilter = on\n", "invalid configuration"),
        ("seed = 1\nseed = 2\n", "duplicate key 'seed'"),
    ],
)
def test_invalid_configs(text: str, message: str) -> None:
    """Test validation failures become configuration errors."""
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_input_path_follows_config_file(tmp_path: Path) -> None:
    """Test relative input paths resolve against the config directory."""
    path = tmp_path / "exp" / "run.cfg"
    path.parent.mkdir()
    path.write_text("seed = 1\ninput.path = data/train.csv\n", encoding="utf-8")
    config = load_config(path)
    assert config.input_file == tmp_path / "exp" / "data" / "train.csv"


def test_missing_config_file(tmp_path: Path) -> None:
    """Test an unreadable file is a configuration error."""
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_snapshot_omits_output_dir() -> None:
    """Test snapshots of runs differing only in output location are equal."""
    first = parse_config("seed = 1\noutput_dir = a\n")
    second = parse_config("seed = 1\noutput_dir = b\n")
    assert first.snapshot() == second.snapshot()
    assert "output_dir" not in first.snapshot()
    assert first.snapshot()["filter"]["zscore_columns"] == "*"


def test_ensemble_file(tmp_path: Path) -> None:
    """Test ensemble spec files hold only ensemble sections."""
    path = tmp_path / "spec.cfg"
    path.write_text("base.0.kind = tree\nmeta.n_trees = 5\n", encoding="utf-8")
    ensemble = load_ensemble(path)
    assert ensemble.bases[0].name == DEFAULT_BASE_NAMES[LearnerKind.TREE]
    assert ensemble.meta.n_trees == 5

    path.write_text("base.0.kind = tree\nsplit.test_fraction = 0.5\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="extra keys not allowed"):
        load_ensemble(path)


@pytest.mark.parametrize("name", ["benchmark.cfg", "kaggle.cfg"])
def test_bundled_configs_load(name: str) -> None:
    """Test the shipped experiment configurations validate."""
    config = load_config(CONFIG_DIR / name)
    assert config.seed == 42
    assert [spec.name for spec in config.ensemble.stacked_bases] == [
        "Random Forest",
        "GBDT",
        "KNN",
    ]
    assert [spec.name for spec in config.ensemble.bases if not spec.stack] == [
        "Decision Tree",
        "Logistic Regression",
    ]


def test_bundled_ensemble_loads() -> None:
    """Test the shipped ensemble spec validates."""
    ensemble = load_ensemble(CONFIG_DIR / "ensemble.cfg")
    assert isinstance(ensemble, EnsembleConfig)
    assert [spec.name for spec in ensemble.bases] == ["Random Forest", "GBDT", "KNN"]


def test_comparison_only_bases() -> None:
    """Test stack = false keeps a base in the roster but out of the ensembles."""
    config = parse_config(
        """
        seed = 1
        base.0.kind = forest
        base.1.kind = tree
        base.1.stack = false
        base.2.kind = logistic
        base.2.stack = no
        """
    )
    ensemble = config.ensemble
    assert [spec.kind for spec in ensemble.bases] == [
        LearnerKind.FOREST,
        LearnerKind.TREE,
        LearnerKind.LOGISTIC,
    ]
    assert [spec.name for spec in ensemble.stacked_bases] == ["Random Forest"]
    assert config.snapshot()["ensemble"]["bases"][1]["stack"] is False


@pytest.mark.parametrize(
    "extra",
    ["", "ensemble.enabled = false\nensemble.soft_vote = true\n"],
)
def test_ensemble_needs_a_stacked_base(extra: str) -> None:
    """Test an enabled ensemble with only comparison bases is rejected."""
    with pytest.raises(ConfigError, match="at least one base with stack = true"):
        parse_config("seed = 1\nbase.0.kind = tree\nbase.0.stack = false\n" + extra)


def test_comparison_only_roster_without_ensembles() -> None:
    """Test a roster of comparison bases is fine once the ensembles are off."""
    config = parse_config(
        "seed = 1\nbase.0.kind = tree\nbase.0.stack = false\nensemble.enabled = no\n"
    )
    assert config.ensemble.stacked_bases == ()
