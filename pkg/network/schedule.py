import math

from network.config import LrSchedule, TrainConfig


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """
    Learning rate for an epoch: linear warm-up to lr0, then cosine annealing
    (or step decay at the milestones).
    """
    if not 0 <= epoch < max(cfg.epochs, 1):
        raise ValueError(f"Epoch {epoch} outside [0, {cfg.epochs})")

    if epoch < cfg.warmup_epochs:
        return cfg.lr0 * (epoch + 1) / cfg.warmup_epochs

    if cfg.schedule == LrSchedule.STEP:
        passed = sum(1 for milestone in cfg.step_milestones() if epoch >= milestone)
        return cfg.lr0 * cfg.gamma ** passed

    t = (epoch - cfg.warmup_epochs) / (cfg.epochs - cfg.warmup_epochs)
    return cfg.lr0 * 0.5 * (1.0 + math.cos(math.pi * t))
