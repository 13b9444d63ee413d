"""Model bundles: a directory of per-model JSON files plus a layout manifest."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
import json
from pathlib import Path
import re
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd
import voluptuous as vol

from .const import BUNDLE_FILE, CLEANING_FILE, FORMAT_VERSION, LOGGER, MODELS_DIR
from .errors import DataError
from .learners import Classifier, model_from_dict as learner_from_dict
from .metrics import predict_labels
from .stacking import SoftVoteModel, StackingModel
from .tabular import CleaningState, Table, apply_cleaning, coerce_numeric

FILE_KEY = "file"
PREDICTION_COLUMN = "prediction"
PROBABILITY_PREFIX = "p_"

BUNDLE_SCHEMA = vol.Schema(
    {
        vol.Required("format_version"): int,
        vol.Required("model_type"): vol.All(str, vol.Length(min=1)),
        vol.Required("feature_names"): [str],
        vol.Required("class_names"): vol.All([str], vol.Length(min=2)),
        vol.Required("label_column"): vol.All(str, vol.Length(min=1)),
        vol.Required("model"): dict,
        vol.Required("cleaning"): vol.Any(None, str),
    }
)


def slugify(name: str) -> str:
    """Lower-case a name into a file-name friendly slug."""
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "model"


def model_from_dict(data: Mapping[str, Any]) -> Classifier:
    """Deserialize an ensemble or any single learner by its model_type."""
    model_type = data.get("model_type")
    if model_type == StackingModel.model_type:
        return StackingModel.from_dict(data)
    if model_type == SoftVoteModel.model_type:
        return SoftVoteModel.from_dict(data)

    return learner_from_dict(data)


@dataclass(frozen=True, eq=False)
class Bundle:
    """A fitted model with the schema needed to predict raw rows."""

    model: Classifier
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    label_column: str
    cleaning: CleaningState | None = None

    def predict_proba(self, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return per-class probabilities of numeric feature rows."""
        return self.model.predict_proba(features)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()

    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path: Path, data: Any) -> None:
    """Write sorted, indented JSON with a trailing newline."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")


def read_json(path: Path) -> Any:
    """Read a JSON file, reporting failures as DataError."""
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise DataError(f"cannot read {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise DataError(f"malformed JSON in {path}: {err}") from err


def _store(directory: Path, name: str, data: Mapping[str, Any]) -> dict[str, str]:
    relative = f"{MODELS_DIR}/{name}"
    write_json(directory / relative, data)
    return {FILE_KEY: relative}


def _resolve(directory: Path, value: Any) -> Any:
    if isinstance(value, Mapping) and set(value) == {FILE_KEY}:
        return read_json(directory / value[FILE_KEY])

    return value


def _externalize(directory: Path, data: Mapping[str, Any]) -> dict[str, Any]:
    """Move every model payload into its own file under models/."""
    if data["model_type"] not in (StackingModel.model_type, SoftVoteModel.model_type):
        return _store(directory, "model.json", data)

    layout = dict(data)
    layout["bases"] = [
        {
            "spec": item["spec"],
            "model": _store(
                directory,
                f"{index:02d}_{slugify(item['spec']['name'])}.json",
                item["model"],
            ),
        }
        for index, item in enumerate(data["bases"])
    ]
    if "meta_model" in layout:
        layout["meta_model"] = _store(directory, "meta.json", data["meta_model"])

    return layout


def _internalize(directory: Path, layout: Any) -> dict[str, Any]:
    data = dict(_resolve(directory, layout))
    if "bases" in data:
        data["bases"] = [
            {**item, "model": _resolve(directory, item["model"])}
            for item in data["bases"]
        ]
    if "meta_model" in data:
        data["meta_model"] = _resolve(directory, data["meta_model"])

    return data


def save_bundle(bundle: Bundle, directory: Path) -> Path:
    """Write the bundle into a directory and return the manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "model_type": bundle.model.model_type,
        "feature_names": list(bundle.feature_names),
        "class_names": list(bundle.class_names),
        "label_column": bundle.label_column,
        "model": _externalize(directory, bundle.model.to_dict()),
        "cleaning": None,
    }
    if bundle.cleaning is not None:
        write_json(directory / CLEANING_FILE, bundle.cleaning.to_dict())
        manifest["cleaning"] = CLEANING_FILE

    path = directory / BUNDLE_FILE
    write_json(path, manifest)
    LOGGER.debug("Saved %s bundle to %s", bundle.model.model_type, directory)
    return path


def load_bundle(directory: Path) -> Bundle:
    """Read a bundle written by save_bundle."""
    directory = Path(directory)
    if directory.is_file():
        directory = directory.parent

    path = directory / BUNDLE_FILE
    manifest = read_json(path)
    if not isinstance(manifest, Mapping):
        raise DataError(f"{path} is not a bundle manifest")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported bundle format_version {manifest.get('format_version')}"
        )

    try:
        manifest = BUNDLE_SCHEMA(dict(manifest))
    except vol.Invalid as err:
        raise DataError(f"invalid bundle manifest {path}: {err}") from err

    try:
        model = model_from_dict(_internalize(directory, manifest["model"]))
        if model.model_type != manifest["model_type"]:
            raise DataError(
                f"bundle manifest names a {manifest['model_type']} model"
                f" but {model.model_type} was stored"
            )
        cleaning = (
            CleaningState.from_dict(read_json(directory / manifest["cleaning"]))
            if manifest.get("cleaning")
            else None
        )
        return Bundle(
            model=model,
            feature_names=tuple(manifest["feature_names"]),
            class_names=tuple(manifest["class_names"]),
            label_column=str(manifest["label_column"]),
            cleaning=cleaning,
        )
    except (KeyError, TypeError) as err:
        raise DataError(f"incomplete bundle in {directory}: {err}") from err


def feature_matrix(
    table: Table, feature_names: Sequence[str]
) -> npt.NDArray[np.float64]:
    """Return the named columns as a dense float matrix."""
    for name in feature_names:
        table.column(name)
        table = coerce_numeric(table, name)
        if missing := table.missing_count(name):
            raise DataError(f"column {name} has {missing} missing cells")

    if not feature_names:
        return np.empty((table.row_count, 0))

    matrix: npt.NDArray[np.float64] = table.frame.loc[
        :, list(feature_names)
    ].to_numpy(dtype=np.float64)
    return matrix


def predict_table(bundle: Bundle, table: Table) -> Table:
    """Replay the stored cleaning, then predict every row.

    The output holds one probability column per class followed by the
    predicted class name.
    """
    if bundle.cleaning is not None:
        table = apply_cleaning(table, bundle.cleaning)

    probabilities = bundle.predict_proba(feature_matrix(table, bundle.feature_names))
    frame = pd.DataFrame(
        probabilities,
        columns=[f"{PROBABILITY_PREFIX}{name}" for name in bundle.class_names],
    )
    frame[PREDICTION_COLUMN] = pd.Series(
        [bundle.class_names[code] for code in predict_labels(probabilities)],
        dtype=object,
    )
    return Table(frame)
