import numpy as np
import pytest

from analysis.groups import GroupThresholds
from data.dataset import GenConfig, LabeledDataset
from data.experiment_config import ExperimentConfig, LossSettings
from network.config import NetworkConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path) -> ExperimentConfig:
    """Four classes with train counts (40, 19, 9, 4); trains in well under a second."""
    return ExperimentConfig(
        run_label="tiny",
        output_dir=str(tmp_path / "run"),
        seed=0,
        data=GenConfig(num_classes=4, input_dim=6, n_max=40, imbalance=10.0, test_per_class=10),
        network=NetworkConfig(hidden_dims=[8, 6]),
        train=TrainConfig(epochs=3, batch_size=16, warmup_epochs=1),
        loss=LossSettings(variant="dbm-bs"),
        groups=GroupThresholds(many_min=20, few_max=8),
    )


def make_blobs(rng: np.random.Generator, counts, input_dim: int = 2, spread: float = 0.5, radius: float = 3.0) -> LabeledDataset:
    """Gaussian blobs with centers spread evenly on a circle in the first two coordinates."""
    num_classes = len(counts)
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    centers = np.zeros((num_classes, input_dim))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    labels = np.repeat(np.arange(num_classes), counts)
    features = centers[labels] + rng.normal(0.0, spread, size=(labels.size, input_dim))
    return LabeledDataset(features, labels, num_classes)


@pytest.fixture
def blobs():
    return make_blobs
