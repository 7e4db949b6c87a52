from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BaseLoss(str, Enum):
    """Re-weighting family the positive logit is plugged into."""
    CE = "ce"
    CB = "cb"
    BS = "bs"


class HeadKind(str, Enum):
    LINEAR = "linear"
    COSINE = "cosine"


class MarginApplication(str, Enum):
    """Which positives receive the instance-wise margin."""
    NONE = "none"
    ALL_POSITIVES = "all"
    HARD_POSITIVES = "hard"


class GradientMode(str, Enum):
    """Whether margins are constants (detached) or differentiated through d_I."""
    DETACHED = "detached"
    THROUGH = "through"


class BaselineKind(str, Enum):
    SPHEREFACE = "sphereface"
    COSFACE = "cosface"
    ARCFACE = "arcface"
    LDAM = "ldam"


class MarginConfig(BaseModel):
    """Hyperparameters of the difficulty-aware balancing margin."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    k: float = Field(0.0, ge=0.0, description="Margin scale K; the least frequent class receives K")
    tau: float = Field(1.0, ge=0.0, description="Decay exponent of the class-wise margin")
    scale: float = Field(32.0, gt=0.0, description="Logit scale s of the cosine classifier")
    application: MarginApplication = Field(
        MarginApplication.HARD_POSITIVES,
        description="Positives that receive the instance-wise margin"
    )
    gradient_mode: GradientMode = Field(
        GradientMode.DETACHED,
        description="Treat margins as constants or differentiate through the instance difficulty"
    )


class BaselineMarginSpec(BaseModel):
    """Fixed-form positive logits of earlier margin losses."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: BaselineKind = Field(..., description="Margin family")
    m: float = Field(..., ge=0.0, description="Margin (angle multiplier for SphereFace)")

    @model_validator(mode="after")
    def validate_multiplier(self):
        if self.kind == BaselineKind.SPHEREFACE and (self.m < 1 or self.m != int(self.m)):
            raise ValueError(f"SphereFace needs a positive integer angle multiplier, got {self.m}")
        return self


class LossSpec(BaseModel):
    """Complete description of a training objective."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    base: BaseLoss = Field(BaseLoss.CE, description="CE, class-balanced CE or balanced softmax")
    margin: MarginConfig = Field(
        default_factory=lambda: MarginConfig(application=MarginApplication.NONE),
        description="DBM margin settings; K = 0 disables every DBM margin"
    )
    baseline: Optional[BaselineMarginSpec] = Field(None, description="Fixed-form margin instead of DBM")
    beta: float = Field(0.9999, ge=0.0, lt=1.0, description="Effective-number hyperparameter of CB weights")

    @model_validator(mode="after")
    def validate_single_margin(self):
        if self.baseline is not None and self.margin.k > 0:
            raise ValueError("A baseline margin and a DBM margin (K > 0) cannot be combined")
        return self

    @property
    def has_margin(self) -> bool:
        return self.baseline is not None or self.margin.k > 0
