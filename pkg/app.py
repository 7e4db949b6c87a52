"""
Command-line front end.

    python app.py gen-data  --config config/experiment_config.json --out data_out
    python app.py train     --config config/experiment_config.json --seed 3
    python app.py eval      --checkpoint runs/dbm-bs/checkpoint.bin --config config/experiment_config.json
    python app.py analyze   --checkpoint runs/dbm-bs/checkpoint.bin --config config/experiment_config.json
    python app.py gradcheck --cases 1000 --model-cases 1000 --seed 0
    python app.py sweep     --config config/sweep_ablation.json --threads 4

Exit codes: 0 success, 1 unexpected error, 2 invalid configuration or input,
3 file or dataset error, 4 numerical failure, 5 gradient check failure.
"""

import argparse
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

import dbm_lab
from analysis.groups import GroupThresholds
from analysis.report import write_report
from data.dataset_io import load_dataset
from data.experiment_config import ExperimentConfig, load_experiment_config
from network.checkpoint import load_checkpoint
from network.gradcheck import DEFAULT_ERROR_FLOOR, GradCheckSettings, run_gradcheck
from utils.exceptions import (
    CheckpointError,
    ConfigurationError,
    DatasetError,
    GradientCheckFailed,
    NumericalError,
    ShapeError,
)
from utils.logger import get_logger, setup_logger

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_GRADCHECK = 5

# Setup application logger
setup_logger()
logger = get_logger(__name__)


def _print_table(frame: pd.DataFrame) -> None:
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))


def _config(args) -> ExperimentConfig:
    return load_experiment_config(args.config, seed=args.seed, threads=args.threads)


def _thresholds(args, cfg: ExperimentConfig, train_counts) -> GroupThresholds:
    if args.many_min is None and args.few_max is None:
        return cfg.thresholds(train_counts)
    try:
        return GroupThresholds(
            many_min=args.many_min if args.many_min is not None else cfg.groups.many_min,
            few_max=args.few_max if args.few_max is not None else cfg.groups.few_max,
        )
    except ValidationError as e:
        raise ConfigurationError(f"Invalid group thresholds: {e}") from e


def cmd_gen_data(args) -> int:
    """Write train/test dataset files with provenance sidecars and print the class counts."""
    cfg = _config(args)
    out_dir = cfg.resolve_output_dir(args.out)
    paths = dbm_lab.write_datasets(cfg, out_dir, args.format)
    train_set = load_dataset(paths["train"])
    _print_table(pd.DataFrame({
        "class": range(train_set.num_classes),
        "train_count": train_set.class_counts,
        "test_count": load_dataset(paths["test"]).class_counts,
    }))
    logger.info(f"Datasets written to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    """Train, evaluate and write checkpoint, epoch log, metrics and manifest."""
    cfg = _config(args)
    out_dir = cfg.resolve_output_dir(args.out)
    result = dbm_lab.run_training(cfg, out_dir)
    if args.analyze:
        paths = dbm_lab.analyze_run(cfg, result, out_dir)
        result.manifest.analysis_paths = [p.name for p in paths]
        dbm_lab.write_json(out_dir / "manifest.json", result.manifest.model_dump(mode="json"))

    groups = result.metrics.groups
    _print_table(pd.DataFrame([{
        "variant": result.manifest.variant,
        "seed": cfg.seed,
        "overall": result.metrics.overall,
        "many": groups.many,
        "medium": groups.medium,
        "few": groups.few,
    }]))
    return EXIT_OK


def _load_eval_inputs(args, cfg: ExperimentConfig, need_train: bool):
    """
    Checkpoint, datasets and train counts for eval and analyze.

    The configured data is only produced for a split that is needed and not
    given as a file; eval needs the training split only when the checkpoint
    carries no train counts.
    """
    checkpoint = load_checkpoint(args.checkpoint)
    train_set = load_dataset(args.train_data) if args.train_data else None
    test_set = load_dataset(args.test_data) if args.test_data else None
    need_train = need_train or checkpoint.train_counts is None
    if test_set is None or (need_train and train_set is None):
        generated_train, generated_test = dbm_lab.prepare_data(cfg)
        train_set = generated_train if train_set is None else train_set
        test_set = generated_test if test_set is None else test_set
    counts = checkpoint.train_counts if checkpoint.train_counts is not None else train_set.class_counts
    return checkpoint, train_set, test_set, counts


def cmd_eval(args) -> int:
    """Evaluate a checkpoint on the held-out set and write eval_metrics.json."""
    cfg = _config(args)
    checkpoint, _, test_set, counts = _load_eval_inputs(args, cfg, need_train=False)
    thresholds = _thresholds(args, cfg, counts)
    metrics = dbm_lab.evaluate(checkpoint.model, test_set, counts, thresholds)

    out_dir = cfg.resolve_output_dir(args.out)
    path = dbm_lab.write_json(out_dir / "eval_metrics.json", metrics.model_dump(mode="json"))
    logger.info(f"Wrote {path}")
    groups = metrics.groups
    _print_table(pd.DataFrame([{
        "overall": metrics.overall, "many": groups.many, "medium": groups.medium, "few": groups.few,
    }]))
    return EXIT_OK


def cmd_analyze(args) -> int:
    """Angular statistics and separability of a checkpoint's features (JSON + CSV)."""
    cfg = _config(args)
    checkpoint, train_set, test_set, counts = _load_eval_inputs(args, cfg, need_train=True)
    thresholds = _thresholds(args, cfg, counts)
    report = dbm_lab.analyze(
        checkpoint.model, train_set, test_set, thresholds,
        ridge=cfg.analysis.ridge, threads=cfg.analysis.threads, config_hash=cfg.config_hash(),
    )
    write_report(report, cfg.resolve_output_dir(args.out))
    _print_table(pd.DataFrame([row.model_dump(by_alias=True) for row in report.classes]))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    """Finite-difference verification of every analytic gradient."""
    settings = GradCheckSettings(
        loss_cases=args.cases, model_cases=args.model_cases, seed=args.seed or 0, error_floor=args.error_floor
    )
    report = run_gradcheck(settings)
    _print_table(pd.DataFrame([
        {"level": r.level, "kind": r.kind, "cases": r.cases, "skipped": r.skipped,
         "worst_error": f"{r.worst_error:.3e}", "floor": r.error_floor, "passed": r.passed}
        for r in report.results
    ]))
    report.raise_for_failure()
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Loss variants x K x tau x seeds; per-run rows plus mean/std per configuration."""
    cfg = load_experiment_config(args.config, threads=args.threads)
    if args.seed is not None:
        data = cfg.model_dump(mode="json")
        data["sweep"]["seeds"] = [args.seed]
        cfg = ExperimentConfig.model_validate(data)
    _, summary = dbm_lab.run_sweep(cfg, cfg.resolve_output_dir(args.out))
    _print_table(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Experiment config JSON (defaults built in)")
    common.add_argument("--out", default=None, help="Output directory (default $DBM_LAB_OUTPUT_ROOT/<run_label>)")
    common.add_argument("--seed", type=int, default=None, help="Run seed override")
    common.add_argument("--threads", type=int, default=None, help="Worker threads / sweep processes")

    eval_inputs = argparse.ArgumentParser(add_help=False)
    eval_inputs.add_argument("--checkpoint", required=True, help="Checkpoint written by train")
    eval_inputs.add_argument("--train-data", default=None, help="Training set file (train counts, analysis)")
    eval_inputs.add_argument("--test-data", default=None, help="Held-out set file")
    eval_inputs.add_argument("--many-min", type=int, default=None, help="Many group: train count above this")
    eval_inputs.add_argument("--few-max", type=int, default=None, help="Few group: train count below this")

    parser = argparse.ArgumentParser(
        prog="dbm-lab",
        description="Difficulty-aware balancing margin loss laboratory",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {dbm_lab.__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", parents=[common], help=cmd_gen_data.__doc__)
    gen.add_argument("--format", choices=["binary", "csv"], default="binary", help="Dataset file format")
    gen.set_defaults(handler=cmd_gen_data)

    train = commands.add_parser("train", parents=[common], help=cmd_train.__doc__)
    train.add_argument("--analyze", action="store_true", help="Also write the analysis report")
    train.set_defaults(handler=cmd_train)

    commands.add_parser("eval", parents=[common, eval_inputs], help=cmd_eval.__doc__).set_defaults(handler=cmd_eval)
    commands.add_parser("analyze", parents=[common, eval_inputs], help=cmd_analyze.__doc__).set_defaults(handler=cmd_analyze)

    grad = commands.add_parser("gradcheck", parents=[common], help=cmd_gradcheck.__doc__)
    grad.add_argument("--cases", type=int, default=1000, help="Random samples per loss kind")
    grad.add_argument("--model-cases", type=int, default=1000, help="Random networks across all kinds")
    grad.add_argument(
        "--error-floor", type=float, default=DEFAULT_ERROR_FLOOR,
        help="Relative error is |a - n| / max(|a|, |n|, floor); entries below the floor are compared absolutely",
    )
    grad.set_defaults(handler=cmd_gradcheck)

    commands.add_parser("sweep", parents=[common], help=cmd_sweep.__doc__).set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except GradientCheckFailed as e:
        logger.error(str(e))
        return EXIT_GRADCHECK
    except (ConfigurationError, ShapeError, ValidationError) as e:
        logger.error(f"Invalid configuration or input: {e}")
        return EXIT_CONFIG
    except (DatasetError, CheckpointError, OSError) as e:
        logger.error(f"File error: {e}")
        return EXIT_IO
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    sys.exit(main())
