"""
Synthetic long-tailed Gaussian-blob datasets with the exponential imbalance profile.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.numerics import l2_normalize
from utils.exceptions import CenterSamplingFailedError, ConfigurationError, DatasetError
from utils.logger import get_logger

logger = get_logger(__name__)

MAX_CENTER_ATTEMPTS = 1000


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (N x D_in), integer labels and the number of classes."""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise DatasetError(f"Features {features.shape} and labels {labels.shape} do not pair up")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DatasetError(f"Labels outside [0, {self.num_classes})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
                self.num_classes == other.num_classes
                and np.array_equal(self.labels, other.labels)
                and self.features.shape == other.features.shape
                and self.features.tobytes() == other.features.tobytes()
        )

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return int(self.labels.size)


class GenConfig(BaseModel):
    """Synthetic long-tailed data generation settings."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_classes: int = Field(10, ge=1, description="Number of classes C")
    input_dim: int = Field(32, ge=1, description="Input dimension D_in")
    n_max: int = Field(500, ge=1, description="Training count of the most frequent class")
    imbalance: float = Field(100.0, description="Imbalance factor rho = n_max / n_min")
    intra_std: float = Field(0.3, gt=0.0, description="Within-class Gaussian standard deviation")
    center_norm: float = Field(1.0, gt=0.0, description="Norm of every class center")
    test_per_class: int = Field(100, ge=1, description="Balanced test samples per class")
    max_center_cosine: float = Field(0.95, gt=-1.0, le=1.0, description="Cap on pairwise center cosine")
    seed: int = Field(0, ge=0, description="Generation seed")

    @model_validator(mode="after")
    def validate_imbalance(self):
        if self.imbalance < 1:
            raise ValueError(f"Imbalance factor must be at least 1, got {self.imbalance}")
        if self.n_max / self.imbalance < 1:
            raise ValueError(f"n_max / imbalance must be at least 1, got {self.n_max / self.imbalance}")
        return self


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def exponential_counts(n_max: int, num_classes: int, rho: float) -> np.ndarray:
    """n_i = round(n_max * rho^(-i / (C - 1))), at least 1."""
    if num_classes < 1:
        raise ConfigurationError(f"Need at least one class, got {num_classes}")
    if rho < 1:
        raise ConfigurationError(f"Imbalance factor must be at least 1, got {rho}")
    if n_max < 1 or n_max / rho < 1:
        raise ConfigurationError(f"n_max / rho must be at least 1, got {n_max} / {rho}")
    if num_classes == 1:
        return np.array([n_max], dtype=np.int64)
    exponents = np.arange(num_classes) / (num_classes - 1)
    counts = _round_half_away(n_max * np.power(float(rho), -exponents))
    return np.maximum(counts, 1).astype(np.int64)


def sample_centers(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """
    C random directions scaled to center_norm, pairwise cosine below the cap.

    A candidate too close to an accepted center is redrawn.
    """
    centers = []
    attempts = 0
    while len(centers) < cfg.num_classes:
        if attempts >= MAX_CENTER_ATTEMPTS:
            raise CenterSamplingFailedError(
                f"Could not place {cfg.num_classes} centers in {cfg.input_dim} dimensions "
                f"with pairwise cosine < {cfg.max_center_cosine} after {attempts} attempts"
            )
        attempts += 1
        candidate = rng.normal(size=cfg.input_dim)
        if not np.any(candidate):
            continue
        candidate = l2_normalize(candidate)
        if all(float(candidate @ c) < cfg.max_center_cosine for c in centers):
            centers.append(candidate)
    return cfg.center_norm * np.stack(centers)


def _draw(centers: np.ndarray, counts: np.ndarray, std: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(len(counts)), counts)
    noise = rng.normal(0.0, std, size=(labels.size, centers.shape[1]))
    return centers[labels] + noise, labels


def generate(cfg: GenConfig) -> Tuple[LabeledDataset, LabeledDataset]:
    """Long-tailed training set and balanced test set, both deterministic in cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    counts = exponential_counts(cfg.n_max, cfg.num_classes, cfg.imbalance)
    centers = sample_centers(cfg, rng)

    train_x, train_y = _draw(centers, counts, cfg.intra_std, rng)
    test_counts = np.full(cfg.num_classes, cfg.test_per_class)
    test_x, test_y = _draw(centers, test_counts, cfg.intra_std, rng)

    provenance = {"generator": cfg.model_dump(mode="json")}
    train = LabeledDataset(train_x, train_y, cfg.num_classes, {**provenance, "split": "train"})
    test = LabeledDataset(test_x, test_y, cfg.num_classes, {**provenance, "split": "test"})
    logger.info(f"Generated {len(train)} train / {len(test)} test samples, counts {counts.tolist()}")
    return train, test
