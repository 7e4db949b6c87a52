from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from losses.config import HeadKind, LossSpec
from utils.exceptions import InvalidDimsError


class LrSchedule(str, Enum):
    COSINE = "cosine"
    STEP = "step"


class NetworkConfig(BaseModel):
    """Backbone widths; input width and classes come from the data, the head from the loss variant."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden_dims: List[int] = Field(default_factory=lambda: [64, 32], description="Hidden layer widths")

    def dims(self, input_dim: int, num_classes: int, head: HeadKind) -> "ModelDims":
        return ModelDims(input_dim=input_dim, hidden_dims=self.hidden_dims, num_classes=num_classes, head=head).check()


class ModelDims(BaseModel):
    """Full set of network dimensions."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int = Field(..., description="Input width D_in")
    hidden_dims: List[int] = Field(default_factory=list, description="Hidden widths; the last one is the feature dim")
    num_classes: int = Field(..., description="Number of classes C")
    head: HeadKind = Field(HeadKind.COSINE, description="Classifier head")

    @property
    def feature_dim(self) -> int:
        return self.hidden_dims[-1] if self.hidden_dims else self.input_dim

    def check(self) -> "ModelDims":
        widths = [self.input_dim, *self.hidden_dims, self.num_classes]
        if any(w < 1 for w in widths):
            raise InvalidDimsError(f"Every layer needs a positive width, got {widths}")
        return self


class TrainConfig(BaseModel):
    """Optimization schedule and objective of one training run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(60, ge=0, description="Number of epochs")
    batch_size: int = Field(64, ge=1, description="Mini-batch size")
    lr0: float = Field(0.1, gt=0.0, description="Peak learning rate")
    momentum: float = Field(0.9, ge=0.0, lt=1.0, description="SGD momentum")
    weight_decay: float = Field(2e-4, ge=0.0, description="L2 weight decay on every parameter")
    warmup_epochs: int = Field(5, ge=0, description="Linear warm-up epochs")
    schedule: LrSchedule = Field(LrSchedule.COSINE, description="Decay after warm-up")
    milestones: Optional[List[int]] = Field(None, description="Step schedule epochs; default 80% and 90% of training")
    gamma: float = Field(0.1, gt=0.0, le=1.0, description="Step schedule decay factor")
    drw_epoch: Optional[int] = Field(None, ge=0, description="Epoch from which CB weights are applied")
    loss: LossSpec = Field(default_factory=LossSpec, description="Training objective")
    seed: int = Field(0, ge=0, description="Shuffling seed")

    @model_validator(mode="after")
    def validate_epochs(self):
        if self.epochs > 0 and self.warmup_epochs >= self.epochs:
            raise ValueError(f"warmup_epochs ({self.warmup_epochs}) must be below epochs ({self.epochs})")
        if self.epochs > 0 and self.drw_epoch is not None and self.drw_epoch >= self.epochs:
            raise ValueError(f"drw_epoch ({self.drw_epoch}) must be below epochs ({self.epochs})")
        return self

    def step_milestones(self) -> List[int]:
        if self.milestones is not None:
            return sorted(self.milestones)
        return [int(0.8 * self.epochs), int(0.9 * self.epochs)]
