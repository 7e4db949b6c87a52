from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from data.dataset import LabeledDataset
from losses.config import BaseLoss
from losses.margins import hard_positive_mask
from losses.objectives import batch_loss, class_balanced_weights
from losses.prior import ClassPrior
from network.config import TrainConfig
from network.model import ModelParams, backward, forward, predict
from network.optimizer import SGDMomentum
from network.schedule import lr_at
from utils.exceptions import NonFiniteLossError, ShapeMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)


class EpochLog(BaseModel):
    """Summary of one training epoch."""
    epoch: int = Field(..., description="Epoch index")
    loss: float = Field(..., description="Mean training loss over the epoch's batches")
    lr: float = Field(..., description="Learning rate used")
    hard_positive_fraction: float = Field(..., ge=0.0, le=1.0, description="Share of samples whose nearest class is not their label")
    mean_margin: float = Field(0.0, ge=0.0, description="Mean angular margin added to the positive angle (DBM, ArcFace)")
    clamped: int = Field(0, ge=0, description="Samples whose margined angle passed pi")
    reweighted: bool = Field(False, description="Class-balanced weights were active")
    accuracy: Optional[float] = Field(None, description="Held-out accuracy after the epoch")


class Trainer:
    """Mini-batch SGD over a dataset with the configured objective and schedule."""

    def __init__(self, cfg: TrainConfig, prior: ClassPrior):
        self.cfg = cfg
        self.prior = prior

    def reweighting_active(self, epoch: int) -> bool:
        if self.cfg.drw_epoch is not None:
            return epoch >= self.cfg.drw_epoch
        return self.cfg.loss.base == BaseLoss.CB

    def sample_weights(self, epoch: int, labels: np.ndarray) -> np.ndarray:
        if self.reweighting_active(epoch):
            return class_balanced_weights(self.prior, self.cfg.loss.beta, labels)
        return np.ones(len(labels))

    def train(
            self,
            model: ModelParams,
            dataset: LabeledDataset,
            eval_set: Optional[LabeledDataset] = None
    ) -> Tuple[ModelParams, List[EpochLog]]:
        if dataset.input_dim != model.dims.input_dim or dataset.num_classes != model.dims.num_classes:
            raise ShapeMismatchError(
                f"Dataset ({dataset.input_dim} inputs, {dataset.num_classes} classes) does not fit "
                f"model ({model.dims.input_dim} inputs, {model.dims.num_classes} classes)"
            )

        cfg = self.cfg
        model = model.copy()
        rng = np.random.default_rng(cfg.seed)
        optimizer = SGDMomentum(model.arrays(), cfg.momentum, cfg.weight_decay)
        logs: List[EpochLog] = []
        features, labels = dataset.features, dataset.labels
        n = labels.size

        for epoch in range(cfg.epochs):
            lr = lr_at(cfg, epoch)
            order = rng.permutation(n)
            weights = self.sample_weights(epoch, labels)
            loss_sum = 0.0
            hard_count = 0
            margin_sum = 0.0
            clamped = 0

            for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                result = forward(model, features[idx])
                losses = batch_loss(
                    result.outputs, labels[idx], self.prior, cfg.loss,
                    head=model.dims.head, weights=weights[idx]
                )
                value = losses.loss
                if not np.isfinite(value):
                    logger.error(f"Non-finite loss at epoch {epoch}, batch {batch_index}")
                    raise NonFiniteLossError(epoch, batch_index, value)

                grads = backward(model, result.cache, losses.output_grad)
                optimizer.step(grads.arrays(), lr)
                loss_sum += value * idx.size
                hard_count += int(hard_positive_mask(result.outputs, labels[idx]).sum())
                margin_sum += float(losses.margins.sum())
                clamped += int(losses.clamped.sum())

            accuracy = None
            if eval_set is not None:
                accuracy = float(np.mean(predict(model, eval_set.features) == eval_set.labels))
            log = EpochLog(
                epoch=epoch,
                loss=loss_sum / n,
                lr=lr,
                hard_positive_fraction=hard_count / n,
                mean_margin=margin_sum / n,
                clamped=clamped,
                reweighted=self.reweighting_active(epoch),
                accuracy=accuracy,
            )
            logs.append(log)
            logger.info(
                f"epoch {epoch}: loss={log.loss:.6f} lr={lr:.6g} "
                f"hard={log.hard_positive_fraction:.3f} margin={log.mean_margin:.4f}"
                + (f" acc={accuracy:.4f}" if accuracy is not None else "")
            )

        return model, logs


def train(
        model: ModelParams,
        dataset: LabeledDataset,
        cfg: TrainConfig,
        eval_set: Optional[LabeledDataset] = None
) -> Tuple[ModelParams, List[EpochLog]]:
    """Train a copy of `model`; the input model is left untouched."""
    prior = ClassPrior.from_labels(dataset.labels, dataset.num_classes)
    return Trainer(cfg, prior).train(model, dataset, eval_set)
