import hashlib
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from analysis.groups import GroupThresholds
from data.dataset import GenConfig
from losses.config import GradientMode
from losses.variants import LossVariant, resolve_variant
from network.config import NetworkConfig, TrainConfig
from utils.exceptions import ConfigurationError
from utils.logger import get_logger

logger = get_logger(__name__)

OUTPUT_ROOT_ENV = "DBM_LAB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"
DRW_FRACTION = 0.8

# Fields that name, place or parallelize a run without changing its result
_UNHASHED_FIELDS = {"output_dir": True, "run_label": True, "analysis": {"threads"}, "sweep": {"workers"}}


class GroupingMode(str, Enum):
    ABSOLUTE = "absolute"
    TERCILE = "tercile"


class LossSettings(BaseModel):
    """Loss variant by name plus the hyperparameters the name leaves open."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: str = Field("dbm-bs", description="Variant name, e.g. bs, dbm-bs, cosine-ce+mc, ldam-drw")
    k: float = Field(0.1, ge=0.0, description="Margin scale K")
    tau: float = Field(1.0, ge=0.0, description="Class-wise margin exponent tau")
    scale: float = Field(32.0, gt=0.0, description="Cosine logit scale s")
    beta: float = Field(0.9999, ge=0.0, lt=1.0, description="CB effective-number beta")
    gradient_mode: GradientMode = Field(GradientMode.DETACHED, description="Margin gradient mode")
    baseline_m: Optional[float] = Field(None, ge=0.0, description="Margin of ldam/cosface/arcface/sphereface")

    @model_validator(mode="after")
    def validate_variant(self):
        try:
            self.resolve()
        except ConfigurationError as e:
            raise ValueError(str(e)) from e
        return self

    def resolve(self) -> LossVariant:
        return resolve_variant(
            self.variant,
            k=self.k,
            tau=self.tau,
            scale=self.scale,
            beta=self.beta,
            gradient_mode=self.gradient_mode,
            baseline_m=self.baseline_m,
        )


class DatasetPaths(BaseModel):
    """Dataset files to read instead of generating synthetic data."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    train: Optional[str] = Field(None, description="Training set file (binary or CSV)")
    test: Optional[str] = Field(None, description="Held-out set file (binary or CSV)")

    @model_validator(mode="after")
    def validate_pair(self):
        if (self.train is None) != (self.test is None):
            raise ValueError("Dataset paths need both train and test, or neither")
        return self

    @property
    def given(self) -> bool:
        return self.train is not None


class AnalysisSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ridge: Optional[float] = Field(None, ge=0.0, description="LDA ridge lambda; default 1e-4 trace(S_w)/D per pair")
    threads: int = Field(1, ge=1, description="Worker threads for pairwise LDA")


class SweepSpec(BaseModel):
    """Axes of a sweep: loss variants x K x tau x seeds."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    variants: List[str] = Field(default_factory=lambda: ["bs", "dbm-bs"], description="Loss variant names")
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], description="Run seeds")
    k_values: Optional[List[float]] = Field(None, description="K axis; None keeps loss.k")
    tau_values: Optional[List[float]] = Field(None, description="tau axis; None keeps loss.tau")
    workers: int = Field(1, ge=1, description="Parallel worker processes")

    @field_validator("variants", "seeds")
    @classmethod
    def validate_non_empty(cls, v):
        if not v:
            raise ValueError("Sweep axes cannot be empty")
        return v

    @field_validator("variants")
    @classmethod
    def validate_variants(cls, v):
        for name in v:
            try:
                resolve_variant(name)
            except ConfigurationError as e:
                raise ValueError(str(e)) from e
        return v

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v):
        if any(seed < 0 for seed in v):
            raise ValueError("Seeds must be non-negative")
        return v

    @field_validator("k_values", "tau_values")
    @classmethod
    def validate_margin_axis(cls, v):
        if v is not None and (not v or any(x < 0 for x in v)):
            raise ValueError("Margin axes must be non-empty and non-negative")
        return v


class ExperimentConfig(BaseModel):
    """Everything one experiment run (or sweep) needs."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    run_label: str = Field("dbm-bs", description="Name of the run directory")
    output_dir: Optional[str] = Field(None, description="Output directory; default <output root>/<run_label>")
    seed: int = Field(0, ge=0, description="Run seed: data generation, initialization and shuffling")
    data: GenConfig = Field(default_factory=GenConfig, description="Synthetic data settings")
    dataset: DatasetPaths = Field(default_factory=DatasetPaths, description="Dataset files, overriding generation")
    network: NetworkConfig = Field(default_factory=NetworkConfig, description="Backbone widths")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Optimization schedule")
    loss: LossSettings = Field(default_factory=LossSettings, description="Training objective")
    groups: GroupThresholds = Field(default_factory=GroupThresholds, description="Many/Few shot thresholds")
    grouping: GroupingMode = Field(GroupingMode.ABSOLUTE, description="Absolute thresholds or train-count terciles")
    analysis: AnalysisSettings = Field(default_factory=AnalysisSettings, description="Separability settings")
    sweep: SweepSpec = Field(default_factory=SweepSpec, description="Sweep axes")

    @model_validator(mode="before")
    @classmethod
    def sync_data_seed(cls, data):
        """The run seed is the only seed; the generator always follows it."""
        if isinstance(data, dict):
            gen = data.get("data") or {}
            if isinstance(gen, GenConfig):
                gen = gen.model_dump()
            data = {**data, "data": {**gen, "seed": data.get("seed", 0)}}
        return data

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_validate({**self.model_dump(mode="json"), "seed": seed})

    def with_loss(self, **updates) -> "ExperimentConfig":
        data = self.model_dump(mode="json")
        data["loss"].update(updates)
        return self.model_validate(data)

    def variant(self) -> LossVariant:
        return self.loss.resolve()

    def train_config(self) -> TrainConfig:
        """
        TrainConfig with the resolved objective and seed.

        -drw variants without an explicit drw_epoch switch at 80% of the epochs.
        """
        variant = self.variant()
        update: Dict[str, Any] = {"loss": variant.spec, "seed": self.seed}
        if variant.deferred_reweighting and self.train.drw_epoch is None:
            update["drw_epoch"] = int(DRW_FRACTION * self.train.epochs)
        return TrainConfig.model_validate({**self.train.model_dump(), **update})

    def thresholds(self, train_counts) -> GroupThresholds:
        if self.grouping == GroupingMode.TERCILE:
            return GroupThresholds.from_terciles(train_counts)
        return self.groups

    def canonical_json(self) -> str:
        payload = self.model_dump(mode="json", exclude=_UNHASHED_FIELDS)
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def resolve_output_dir(self, override: Optional[str] = None) -> Path:
        """--out beats output_dir; otherwise <DBM_LAB_OUTPUT_ROOT or runs>/<run_label>."""
        if override:
            return Path(override)
        if self.output_dir:
            return Path(self.output_dir)
        return Path(os.getenv(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT) / self.run_label


class RunManifest(BaseModel):
    """What a training run produced and what reproduces it."""
    config_hash: str = Field(..., description="sha256 of the canonical config serialization")
    seed: int = Field(..., description="Run seed")
    version: str = Field(..., description="dbm-lab version")
    variant: str = Field(..., description="Loss variant name")
    config: Dict[str, Any] = Field(..., description="Full experiment config")
    checkpoint_path: str = Field(..., description="Model checkpoint file")
    epoch_log_path: str = Field(..., description="Per-epoch metrics CSV")
    metrics_path: str = Field(..., description="Final metrics JSON")
    final_metrics: Dict[str, Any] = Field(default_factory=dict, description="Final evaluation metrics")
    analysis_paths: List[str] = Field(default_factory=list, description="Analysis report files")


class ExperimentConfigManager:
    """Loads experiment configs from JSON files with environment variable support"""

    def __init__(self, config_file: Optional[str] = "config/experiment_config.json"):
        self.config_file = config_file
        self.config: ExperimentConfig = ExperimentConfig()
        if config_file is not None:
            self.load_config()

    def load_config(self) -> ExperimentConfig:
        """Load, validate and store the config file"""
        try:
            logger.info(f"Loading experiment configuration from {self.config_file}")
            with open(self.config_file, "r", encoding="utf-8") as f:
                config_data = json.load(f)
            if not isinstance(config_data, dict):
                raise ConfigurationError("Configuration root must be a JSON object")
            self.config = ExperimentConfig.model_validate(config_data)
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in configuration file: {e}")
            raise ConfigurationError(f"Invalid JSON in configuration file: {e}") from e
        except ValidationError as e:
            logger.error(f"Invalid experiment configuration: {e}")
            raise ConfigurationError(f"Invalid experiment configuration: {e}") from e
        except ConfigurationError:
            raise
        except Exception as e:
            logger.error(f"Failed to load configuration: {e}")
            raise ConfigurationError(f"Configuration loading failed: {e}") from e

        logger.info(f"Loaded experiment {self.config.run_label} (hash {self.config.config_hash()[:12]})")
        return self.config

    def apply_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None) -> ExperimentConfig:
        """Command-line overrides on top of the file"""
        data = self.config.model_dump(mode="json")
        if seed is not None:
            data["seed"] = seed
        if threads is not None:
            data["analysis"]["threads"] = threads
            data["sweep"]["workers"] = threads
        try:
            self.config = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            logger.error(f"Invalid override: {e}")
            raise ConfigurationError(f"Invalid override: {e}") from e
        return self.config


def load_experiment_config(path: Optional[str], seed: Optional[int] = None, threads: Optional[int] = None) -> ExperimentConfig:
    """Config from `path` (defaults when None) with command-line overrides applied."""
    return ExperimentConfigManager(path).apply_overrides(seed=seed, threads=threads)
