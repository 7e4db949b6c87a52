"""
Experiment pipeline: data, training, evaluation, analysis and sweeps.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from analysis.angular import angular_stats
from analysis.groups import (
    GroupAccuracy,
    GroupThresholds,
    assign_groups,
    group_accuracy,
    per_class_accuracy,
)
from analysis.report import AnalysisReport, ClassRow, write_report
from analysis.separability import class_separability
from core.numerics import CosineHead, l2_normalize
from data.dataset import LabeledDataset, generate
from data.dataset_io import load_dataset, save_dataset, write_sidecar
from data.experiment_config import ExperimentConfig, RunManifest
from losses.variants import resolve_variant
from network.checkpoint import save_checkpoint
from network.model import ModelParams, forward, init_model, predict
from network.trainer import EpochLog, train
from utils.exceptions import DbmLabError, DimMismatchError
from utils.logger import get_logger

__version__ = "0.1.0"

logger = get_logger(__name__)

EPOCH_FLOAT_FORMAT = "%.17g"
TABLE_FLOAT_FORMAT = "%.12g"
METRIC_COLUMNS = ["overall", "many", "medium", "few"]


class EvalMetrics(BaseModel):
    """Held-out evaluation of one model."""
    overall: float = Field(..., ge=0.0, le=1.0, description="Accuracy over the whole set")
    groups: GroupAccuracy = Field(..., description="Accuracy per shot group")
    per_class: List[Optional[float]] = Field(..., description="Accuracy per class, None for absent classes")
    confusion: List[List[int]] = Field(..., description="Rows: true class, columns: predicted class")
    thresholds: Dict[str, int] = Field(..., description="Group thresholds used")
    samples: int = Field(..., description="Number of evaluated samples")


@dataclass
class RunResult:
    model: ModelParams
    logs: List[EpochLog]
    metrics: EvalMetrics
    train_set: LabeledDataset
    test_set: LabeledDataset
    manifest: Optional[RunManifest] = None


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def check_dims(model: ModelParams, dataset: LabeledDataset) -> None:
    if dataset.input_dim != model.dims.input_dim or dataset.num_classes != model.dims.num_classes:
        raise DimMismatchError(
            f"Dataset has {dataset.input_dim} inputs and {dataset.num_classes} classes, "
            f"model expects {model.dims.input_dim} and {model.dims.num_classes}"
        )


def prepare_data(cfg: ExperimentConfig) -> Tuple[LabeledDataset, LabeledDataset]:
    """Dataset files when the config names them, otherwise generated synthetic data."""
    if cfg.dataset.given:
        return load_dataset(cfg.dataset.train), load_dataset(cfg.dataset.test)
    return generate(cfg.data)


def write_datasets(cfg: ExperimentConfig, out_dir: Path, fmt: str = "binary") -> Dict[str, Path]:
    train_set, test_set = generate(cfg.data)
    suffix = ".csv" if fmt == "csv" else ".bin"
    paths = {}
    for split, ds in (("train", train_set), ("test", test_set)):
        path = save_dataset(ds, out_dir / f"{split}{suffix}", fmt)
        write_sidecar(ds, path)
        paths[split] = path
    return paths


def evaluate(
        model: ModelParams,
        dataset: LabeledDataset,
        train_counts,
        thresholds: GroupThresholds
) -> EvalMetrics:
    """
    Overall, group and per-class accuracy plus the confusion matrix.

    Raises:
        DimMismatchError: model and dataset disagree on dimensions
    """
    check_dims(model, dataset)
    predictions = predict(model, dataset.features)
    confusion = np.zeros((dataset.num_classes, dataset.num_classes), dtype=np.int64)
    np.add.at(confusion, (dataset.labels, predictions), 1)
    groups = group_accuracy(predictions, dataset.labels, train_counts, thresholds)
    return EvalMetrics(
        overall=groups.all if groups.all is not None else 0.0,
        groups=groups,
        per_class=per_class_accuracy(predictions, dataset.labels, dataset.num_classes),
        confusion=confusion.tolist(),
        thresholds=thresholds.model_dump(),
        samples=len(dataset),
    )


def epoch_frame(logs: List[EpochLog]) -> pd.DataFrame:
    columns = list(EpochLog.model_fields)
    return pd.DataFrame([log.model_dump() for log in logs], columns=columns)


def run_training(cfg: ExperimentConfig, out_dir: Optional[Path] = None, write: bool = True) -> RunResult:
    """
    Train one model as configured and evaluate it on the held-out split.

    With `write`, the checkpoint, per-epoch CSV, final metrics and the run
    manifest are written to `out_dir` (default: the config's output directory).
    """
    train_set, test_set = prepare_data(cfg)
    variant = cfg.variant()
    train_cfg = cfg.train_config()
    dims = cfg.network.dims(train_set.input_dim, train_set.num_classes, variant.head)

    logger.info(f"Training {variant.name} on {len(train_set)} samples (seed {cfg.seed}, hash {cfg.config_hash()[:12]})")
    model = init_model(dims, cfg.seed, scale=variant.spec.margin.scale)
    model, logs = train(model, train_set, train_cfg, eval_set=test_set)

    counts = train_set.class_counts
    metrics = evaluate(model, test_set, counts, cfg.thresholds(counts))
    result = RunResult(model=model, logs=logs, metrics=metrics, train_set=train_set, test_set=test_set)
    logger.info(f"Finished {variant.name}: overall accuracy {metrics.overall:.4f}")

    if write:
        out_dir = Path(out_dir) if out_dir is not None else cfg.resolve_output_dir()
        checkpoint_path = save_checkpoint(out_dir / "checkpoint.bin", model, train_cfg, counts)
        epoch_path = out_dir / "epochs.csv"
        epoch_frame(logs).to_csv(epoch_path, index=False, float_format=EPOCH_FLOAT_FORMAT, lineterminator="\n")
        metrics_path = write_json(out_dir / "metrics.json", metrics.model_dump(mode="json"))
        result.manifest = RunManifest(
            config_hash=cfg.config_hash(),
            seed=cfg.seed,
            version=__version__,
            variant=variant.name,
            config=cfg.model_dump(mode="json"),
            checkpoint_path=checkpoint_path.name,
            epoch_log_path=epoch_path.name,
            metrics_path=metrics_path.name,
            final_metrics=metrics.model_dump(mode="json", exclude={"confusion", "per_class"}),
        )
        write_json(out_dir / "manifest.json", result.manifest.model_dump(mode="json"))
    return result


def analyze(
        model: ModelParams,
        train_set: LabeledDataset,
        test_set: LabeledDataset,
        thresholds: GroupThresholds,
        ridge: Optional[float] = None,
        threads: int = 1,
        config_hash: Optional[str] = None
) -> AnalysisReport:
    """
    Group accuracy, angular compactness (cosine heads only) and separability
    of the learned features, on both the training and the held-out split.

    Separability is measured where the head classifies: on unit-normalized
    features for a cosine head, on raw features for a linear head.
    """
    check_dims(model, train_set)
    check_dims(model, test_set)
    counts = train_set.class_counts
    splits = {"train": train_set, "test": test_set}
    features = {name: forward(model, ds.features).features for name, ds in splits.items()}

    embedded = features
    angular, reason = None, None
    if isinstance(model.head, CosineHead):
        embedded = {name: l2_normalize(f) for name, f in features.items()}
        angular = {
            name: angular_stats(features[name], ds.labels, model.head, counts, thresholds)
            for name, ds in splits.items()
        }
    else:
        reason = "angular statistics need a cosine head"
        logger.info(f"Skipping angular statistics: {reason}")

    separability = {
        name: class_separability(
            embedded[name], ds.labels, ridge=ridge, train_counts=counts, thresholds=thresholds,
            num_classes=ds.num_classes, threads=threads,
        )
        for name, ds in splits.items()
    }
    metrics = evaluate(model, test_set, counts, thresholds)
    groups = assign_groups(counts, thresholds)

    rows = []
    for cls in range(train_set.num_classes):
        rows.append(ClassRow(
            class_index=cls,
            train_count=int(counts[cls]),
            group=groups[cls].value,
            accuracy=metrics.per_class[cls],
            mean_angle_train=angular["train"].per_class_mean[cls] if angular else None,
            mean_angle_test=angular["test"].per_class_mean[cls] if angular else None,
            separability_train=separability["train"].per_class[cls],
            separability_test=separability["test"].per_class[cls],
        ))

    return AnalysisReport(
        config_hash=config_hash,
        head=model.dims.head.value,
        thresholds=thresholds.model_dump(),
        accuracy=metrics.groups,
        angular=angular,
        angular_absent_reason=reason,
        separability=separability,
        classes=rows,
    )


def analyze_run(cfg: ExperimentConfig, result: RunResult, out_dir: Path) -> List[Path]:
    report = analyze(
        result.model, result.train_set, result.test_set,
        cfg.thresholds(result.train_set.class_counts),
        ridge=cfg.analysis.ridge, threads=cfg.analysis.threads, config_hash=cfg.config_hash(),
    )
    return list(write_report(report, out_dir))


def sweep_points(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Axis product in a fixed order: variant, K, tau, seed.

    K and tau only multiply variants that carry a DBM margin.
    """
    spec = cfg.sweep
    points = []
    for name in spec.variants:
        uses_margin = resolve_variant(name, k=1.0).spec.margin.k > 0
        k_axis = (spec.k_values or [cfg.loss.k]) if uses_margin else [None]
        tau_axis = (spec.tau_values or [cfg.loss.tau]) if uses_margin else [None]
        for k in k_axis:
            for tau in tau_axis:
                for seed in spec.seeds:
                    points.append({"variant": name, "k": k, "tau": tau, "seed": seed})
    return points


def run_sweep_point(cfg_json: str, point: Dict[str, Any]) -> Dict[str, Any]:
    """One sweep row; failures are recorded in the row instead of raised."""
    row: Dict[str, Any] = {**point, "status": "ok", "error": None}
    try:
        cfg = ExperimentConfig.model_validate(json.loads(cfg_json))
        updates = {"variant": point["variant"]}
        if point["k"] is not None:
            updates.update(k=point["k"], tau=point["tau"])
        cfg = cfg.with_loss(**updates).with_seed(point["seed"])
        result = run_training(cfg, write=False)
        groups = result.metrics.groups
        row.update(
            config_hash=cfg.config_hash(),
            overall=result.metrics.overall,
            many=groups.many,
            medium=groups.medium,
            few=groups.few,
            final_loss=result.logs[-1].loss if result.logs else None,
        )
    except DbmLabError as e:
        logger.error(f"Sweep point {point} failed: {e}")
        row.update(status="failed", error=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.error(f"Sweep point {point} failed unexpectedly: {e}")
        row.update(status="failed", error=f"{type(e).__name__}: {e}")
    return row


def aggregate_sweep(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation per configuration over its successful seeds."""
    keys = ["variant", "k", "tau"]
    ok = rows[rows["status"] == "ok"]
    if ok.empty:
        return pd.DataFrame(columns=keys + ["runs"])
    metrics = [c for c in METRIC_COLUMNS if c in ok.columns]
    grouped = ok.groupby(keys, sort=False, dropna=False)
    summary = grouped[metrics].agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    summary.insert(0, "runs", grouped.size())
    return summary.reset_index()


def run_sweep(cfg: ExperimentConfig, out_dir: Optional[Path] = None, workers: Optional[int] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Run every sweep point, in parallel worker processes when workers > 1.

    Rows come back in axis order regardless of completion order.
    """
    points = sweep_points(cfg)
    workers = workers or cfg.sweep.workers
    cfg_json = cfg.model_dump_json()
    logger.info(f"Sweep of {len(points)} runs on {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(run_sweep_point, [cfg_json] * len(points), points))
    else:
        rows = [run_sweep_point(cfg_json, point) for point in points]

    columns = ["variant", "k", "tau", "seed", "status", "error", "config_hash", "final_loss"] + METRIC_COLUMNS
    frame = pd.DataFrame(rows).reindex(columns=columns)
    summary = aggregate_sweep(frame)

    failed = int((frame["status"] != "ok").sum())
    if failed:
        logger.warning(f"{failed} of {len(points)} sweep runs failed")

    out_dir = Path(out_dir) if out_dir is not None else cfg.resolve_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / "sweep_rows.csv", index=False, float_format=TABLE_FLOAT_FORMAT, lineterminator="\n")
    summary.to_csv(out_dir / "sweep_summary.csv", index=False, float_format=TABLE_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote sweep results to {out_dir}")
    return frame, summary
