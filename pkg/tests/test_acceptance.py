"""Slow end-to-end checks on the synthetic benchmark and the public CSV."""

import dataclasses
import os
from pathlib import Path
import statistics

import pytest

from credit_stack.config import load_config
from credit_stack.const import ENSEMBLE_MODEL_NAME
from credit_stack.pipeline import read_table, run_pipeline
from credit_stack.preprocess import random_oversample
from credit_stack.tabular import clean_table, to_dataset

CONFIG_DIR = Path(__file__).parent.parent / "config"
SEEDS = (0, 1, 2, 3, 4)
KAGGLE_COUNTS = {"Poor": 28998, "Standard": 53174, "Good": 17828}


@pytest.mark.benchmark
def test_ensemble_direction_on_benchmark(tmp_path: Path) -> None:
    """Test the ensemble keeps up with its bases and gains from SMOTE-ENN."""
    base_config = load_config(CONFIG_DIR / "benchmark.cfg")
    stacked = {spec.name for spec in base_config.ensemble.stacked_bases}
    gaps: list[float] = []
    auc_gains: list[float] = []
    for seed in SEEDS:
        config = dataclasses.replace(
            base_config, seed=seed, output_dir=tmp_path / str(seed)
        )
        variants = {item.name: item for item in run_pipeline(config, 2).variants}

        baseline = {item.model_name: item for item in variants["baseline"].reports}
        ensemble = baseline.pop(ENSEMBLE_MODEL_NAME)
        best = max(baseline[name].f1 for name in stacked)
        gaps.append(ensemble.f1 - best)

        resampled = {item.model_name: item for item in variants["smoteenn"].reports}
        with_auc = resampled[ENSEMBLE_MODEL_NAME].roc_auc
        assert with_auc is not None and ensemble.roc_auc is not None
        auc_gains.append(with_auc - ensemble.roc_auc)

    assert statistics.median(gaps) >= -0.01
    assert statistics.median(auc_gains) >= 0.0


@pytest.mark.skipif(
    "CREDIT_SCORE_CSV" not in os.environ,
    reason="set CREDIT_SCORE_CSV to the public credit score training CSV",
)
def test_public_dataset_class_counts() -> None:
    """Test the public CSV cleans to the published class counts."""
    config = load_config(CONFIG_DIR / "kaggle.cfg")
    table = read_table(Path(os.environ["CREDIT_SCORE_CSV"]))
    cleaned, _report, _state = clean_table(
        table, config.label_column, config.drop_columns, config.categorical_columns
    )
    ds = to_dataset(cleaned, config.label_column, config.class_order)
    assert dict(zip(ds.class_names, ds.class_counts().tolist())) == KAGGLE_COUNTS

    balanced = random_oversample(ds, config.seed)
    assert balanced.class_counts().tolist() == [53174, 53174, 53174]
