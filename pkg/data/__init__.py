from .dataset import (
    GenConfig,
    LabeledDataset,
    exponential_counts,
    generate,
    sample_centers,
)
from .dataset_io import (
    load_dataset,
    save_dataset,
    write_sidecar,
)
from .experiment_config import (
    ExperimentConfig,
    ExperimentConfigManager,
    GroupingMode,
    LossSettings,
    RunManifest,
    SweepSpec,
    load_experiment_config,
)

# Export all public classes and functions
__all__ = [
    # Datasets
    "GenConfig",
    "LabeledDataset",
    "exponential_counts",
    "generate",
    "sample_centers",
    "load_dataset",
    "save_dataset",
    "write_sidecar",

    # Experiment configuration
    "ExperimentConfig",
    "ExperimentConfigManager",
    "GroupingMode",
    "LossSettings",
    "RunManifest",
    "SweepSpec",
    "load_experiment_config",
]
