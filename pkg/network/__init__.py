from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import LrSchedule, ModelDims, NetworkConfig, TrainConfig
from .gradcheck import GradCheckReport, GradCheckSettings, run_gradcheck
from .model import ModelParams, backward, forward, init_model, predict
from .optimizer import SGDMomentum
from .schedule import lr_at
from .trainer import EpochLog, Trainer, train

__all__ = [
    # Configuration
    "LrSchedule",
    "ModelDims",
    "NetworkConfig",
    "TrainConfig",

    # Model
    "ModelParams",
    "init_model",
    "forward",
    "backward",
    "predict",

    # Training
    "SGDMomentum",
    "lr_at",
    "EpochLog",
    "Trainer",
    "train",

    # Persistence and verification
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "GradCheckReport",
    "GradCheckSettings",
    "run_gradcheck",
]
