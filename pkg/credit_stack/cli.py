"""Command-line entry points."""

import argparse
from collections.abc import Sequence
import dataclasses
import logging
from pathlib import Path
import sys
from typing import Any, NoReturn

import colorlog

from .bundle import (
    Bundle,
    load_bundle,
    predict_table,
    read_json,
    save_bundle,
    write_json,
)
from .config import (
    DEFAULT_SYNTHETIC_ROWS,
    EnsembleConfig,
    comma_list,
    load_config,
    load_ensemble,
)
from .const import (
    DEFAULT_CLASS_ORDER,
    DEFAULT_ENN_K,
    DEFAULT_LABEL_COLUMN,
    DEFAULT_SMOTE_K,
    DOMAIN,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    LOGGER,
)
from .errors import ConfigError, CreditStackError
from .kvfile import format_key_values, nest_keys, parse_key_values
from .learners import Classifier, fit_learner, learner_kind, params_from_mapping
from .metrics import (
    Average,
    ReportFormat,
    ReportRow,
    evaluate,
    read_reports_csv,
    render_reports,
)
from .pipeline import read_table, run_pipeline, write_text
from .resample import ResampleMethod, ResampleParams, resample
from .stacking import fit_soft_vote, fit_stacking
from .synthetic import DEFAULT_CORRUPTION, synthesize_credit_table
from .tabular import (
    CleaningState,
    LabeledDataset,
    apply_cleaning,
    clean_table,
    coerce_numeric,
    dataset_to_table,
    serialize_csv,
    to_dataset,
)

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the usage exit code."""

    def error(self, message: str) -> NoReturn:
        """Print usage and exit."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(verbosity: int) -> None:
    """Send package logs to stderr through a colored handler."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    logger = logging.getLogger(DOMAIN)
    logger.handlers = [handler]
    logger.propagate = False
    logger.setLevel(
        logging.DEBUG
        if verbosity > 0
        else logging.WARNING if verbosity < 0 else logging.INFO
    )


def _class_order(args: argparse.Namespace) -> tuple[str, ...]:
    order = comma_list(args.class_order)
    if len(order) < 2 or len(set(order)) != len(order):
        raise ConfigError("--class-order needs at least two distinct classes")

    return order


def _load_labeled(args: argparse.Namespace, path: Path) -> LabeledDataset:
    table = read_table(path)
    for name in table.column_names:
        if name != args.label_column:
            table = coerce_numeric(table, name)

    return to_dataset(table, args.label_column, _class_order(args))


def cmd_clean(args: argparse.Namespace) -> int:
    """Coerce, impute and encode a raw CSV."""
    table = read_table(args.input)
    categorical = (
        None
        if args.categorical_columns is None
        else comma_list(args.categorical_columns)
    )
    cleaned, report, state = clean_table(
        table, args.label_column, comma_list(args.drop_columns), categorical
    )
    write_text(args.output, serialize_csv(cleaned))
    report_text = format_key_values(report.to_key_values())
    if args.report:
        write_text(args.report, report_text)
    else:
        sys.stdout.write(report_text)
    if args.state:
        write_json(args.state, state.to_dict())

    return EXIT_OK


def cmd_resample(args: argparse.Namespace) -> int:
    """Resample a cleaned, labeled CSV."""
    dataset = _load_labeled(args, args.input)
    params = ResampleParams(args.smote_k, args.enn_k, args.seed)
    outcome = resample(dataset, args.method, params)
    write_text(
        args.output,
        serialize_csv(dataset_to_table(outcome.dataset, args.label_column)),
    )
    if outcome.provenance is not None:
        provenance = args.provenance or args.output.with_suffix(".provenance.csv")
        write_text(provenance, outcome.provenance.to_csv())

    sys.stdout.write(format_key_values(outcome.summary.to_key_values()))
    return EXIT_OK


def _parse_params(items: Sequence[str]) -> dict[str, Any]:
    return nest_keys(parse_key_values("\n".join(items), "--param"))


def _train_model(args: argparse.Namespace, dataset: LabeledDataset) -> Classifier:
    if args.kind:
        kind = learner_kind(args.kind)
        params = params_from_mapping(kind, _parse_params(args.param))
        return fit_learner(kind, params, dataset, args.seed, args.threads)
    if args.param:
        raise ConfigError("--param applies to --kind models only")

    ensemble = load_ensemble(args.ensemble) if args.ensemble else EnsembleConfig()
    if not ensemble.enabled and ensemble.soft_vote:
        return fit_soft_vote(dataset, ensemble.stacked_bases, args.seed, args.threads)

    return fit_stacking(
        dataset,
        ensemble.stacked_bases,
        ensemble.meta,
        ensemble.n_folds,
        args.seed,
        ensemble.meta_features,
        args.threads,
    )


def cmd_train(args: argparse.Namespace) -> int:
    """Fit a single learner or a stacking ensemble and save a bundle."""
    if args.kind and args.ensemble:
        raise ConfigError("use either --kind or --ensemble, not both")

    dataset = _load_labeled(args, args.input)
    model = _train_model(args, dataset)
    cleaning = (
        CleaningState.from_dict(read_json(args.cleaning)) if args.cleaning else None
    )
    save_bundle(
        Bundle(
            model,
            dataset.feature_names,
            dataset.class_names,
            args.label_column,
            cleaning,
        ),
        args.bundle,
    )
    LOGGER.info("Saved %s bundle to %s", model.model_type, args.bundle)
    return EXIT_OK


def _bundle_dataset(bundle: Bundle, path: Path) -> LabeledDataset:
    table = read_table(path)
    table.column(bundle.label_column)
    if bundle.cleaning is not None:
        table = apply_cleaning(table, bundle.cleaning)
    for name in bundle.feature_names:
        table.column(name)
        table = coerce_numeric(table, name)

    table = table.select_columns([*bundle.feature_names, bundle.label_column])
    return to_dataset(table, bundle.label_column, bundle.class_names)


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score a bundle on a labeled CSV."""
    bundle = load_bundle(args.bundle)
    dataset = _bundle_dataset(bundle, args.input)
    report = evaluate(bundle.model, dataset, args.name, args.average)
    sys.stdout.write(render_reports([report], args.format))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    """Write per-class probabilities and the predicted class of every row."""
    bundle = load_bundle(args.bundle)
    predictions = predict_table(bundle, read_table(args.input))
    write_text(args.output, serialize_csv(predictions))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    """Run the configured experiment and print its comparison tables."""
    config = load_config(args.config)
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.input is not None:
        overrides["input_path"] = str(args.input.resolve())
    if args.resample_before_split:
        overrides["resample"] = dataclasses.replace(
            config.resample, before_split=True
        )
    config = dataclasses.replace(config, **overrides)

    manifest = run_pipeline(config, args.threads)
    for variant in manifest.variants:
        sys.stdout.write(f"\n[{variant.name}]\n")
        sys.stdout.write(render_reports(variant.reports, args.format))

    return EXIT_OK


def cmd_render_report(args: argparse.Namespace) -> int:
    """Merge report CSV files (own or external rows) into one table."""
    rows: list[ReportRow] = []
    for path in args.reports:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read {path}: {err.strerror}") from err
        rows.extend(read_reports_csv(text))

    sys.stdout.write(render_reports(rows, args.format))
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    """Write the seeded synthetic credit benchmark as raw CSV."""
    table = synthesize_credit_table(args.rows, args.seed, args.corruption)
    write_text(args.output, serialize_csv(table))
    return EXIT_OK


def _seed(value: str) -> int:
    seed = int(value)
    if seed < 0:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer")

    return seed


def _add_dataset_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--label-column", default=DEFAULT_LABEL_COLUMN)
    parser.add_argument(
        "--class-order",
        default=",".join(DEFAULT_CLASS_ORDER),
        help="class names in label-code order, comma separated",
    )


def build_parser() -> ArgumentParser:
    """Build the argument parser of every command."""
    parser = ArgumentParser(
        prog="credit_stack",
        description="Credit score classification with tree ensembles and stacking.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    clean = commands.add_parser("clean", help="clean a raw CSV")
    clean.add_argument("input", type=Path)
    clean.add_argument("output", type=Path)
    clean.add_argument("--label-column", default=DEFAULT_LABEL_COLUMN)
    clean.add_argument("--drop-columns", default="")
    clean.add_argument(
        "--categorical-columns",
        help="comma separated; inferred from the data when omitted",
    )
    clean.add_argument("--report", type=Path, help="key=value cleaning report")
    clean.add_argument("--state", type=Path, help="cleaning state JSON")
    clean.set_defaults(handler=cmd_clean)

    sampler = commands.add_parser("resample", help="resample a cleaned CSV")
    sampler.add_argument("input", type=Path)
    sampler.add_argument("output", type=Path)
    sampler.add_argument(
        "--method",
        choices=[str(method) for method in ResampleMethod],
        default=str(ResampleMethod.SMOTEENN),
    )
    sampler.add_argument("--smote-k", type=int, default=DEFAULT_SMOTE_K)
    sampler.add_argument("--enn-k", type=int, default=DEFAULT_ENN_K)
    sampler.add_argument("--seed", type=_seed, required=True)
    sampler.add_argument("--provenance", type=Path, help="synthetic row sidecar")
    _add_dataset_options(sampler)
    sampler.set_defaults(handler=cmd_resample)

    train = commands.add_parser("train", help="fit a model bundle")
    train.add_argument("input", type=Path)
    train.add_argument("bundle", type=Path)
    train.add_argument("--seed", type=_seed, required=True)
    train.add_argument("--ensemble", type=Path, help="ensemble spec file")
    train.add_argument("--kind", help="fit one learner of this kind instead")
    train.add_argument(
        "--param", action="append", default=[], help="learner parameter key=value"
    )
    train.add_argument("--threads", type=int, default=1)
    train.add_argument(
        "--cleaning", type=Path, help="cleaning state JSON written by clean --state"
    )
    _add_dataset_options(train)
    train.set_defaults(handler=cmd_train)

    evaluation = commands.add_parser("evaluate", help="score a bundle")
    evaluation.add_argument("bundle", type=Path)
    evaluation.add_argument("input", type=Path)
    evaluation.add_argument("--name", default="Model")
    evaluation.add_argument(
        "--average", choices=[str(item) for item in Average], default="macro"
    )
    evaluation.add_argument(
        "--format", choices=[str(item) for item in ReportFormat], default="text"
    )
    evaluation.set_defaults(handler=cmd_evaluate)

    predict = commands.add_parser("predict", help="predict with a bundle")
    predict.add_argument("bundle", type=Path)
    predict.add_argument("input", type=Path)
    predict.add_argument("output", type=Path)
    predict.set_defaults(handler=cmd_predict)

    run = commands.add_parser("run", help="run an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=_seed)
    run.add_argument("--output-dir", type=Path)
    run.add_argument("--input", type=Path, help="CSV replacing input.path")
    run.add_argument("--resample-before-split", action="store_true")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument(
        "--format", choices=[str(item) for item in ReportFormat], default="text"
    )
    run.set_defaults(handler=cmd_run)

    render = commands.add_parser("render-report", help="merge report CSV files")
    render.add_argument("reports", type=Path, nargs="+")
    render.add_argument(
        "--format", choices=[str(item) for item in ReportFormat], default="text"
    )
    render.set_defaults(handler=cmd_render_report)

    synthesize = commands.add_parser("synthesize", help="write the benchmark CSV")
    synthesize.add_argument("output", type=Path)
    synthesize.add_argument("--rows", type=int, default=DEFAULT_SYNTHETIC_ROWS)
    synthesize.add_argument("--seed", type=_seed, required=True)
    synthesize.add_argument("--corruption", type=float, default=DEFAULT_CORRUPTION)
    synthesize.set_defaults(handler=cmd_synthesize)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run a command and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(int(args.verbose) - int(args.quiet))
    if getattr(args, "threads", 1) < 1:
        LOGGER.error("--threads must be at least 1")
        return EXIT_USAGE

    try:
        code: int = args.handler(args)
    except CreditStackError as err:
        LOGGER.error("%s", err)
        return err.exit_code
    except Exception:
        LOGGER.exception("Unexpected error")
        return EXIT_INTERNAL

    return code
