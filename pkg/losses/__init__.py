from .config import (
    BaseLoss,
    BaselineKind,
    BaselineMarginSpec,
    GradientMode,
    HeadKind,
    LossSpec,
    MarginApplication,
    MarginConfig,
)
from .margins import (
    FrozenMargins,
    baseline_positive_logit,
    class_margin,
    dbm_positive_logit,
    hard_positive_mask,
    instance_difficulty,
    instance_margin,
)
from .objectives import (
    BatchLoss,
    LossResult,
    batch_loss,
    cb_weight,
    class_balanced_weights,
    dbm_bs_loss,
    dbm_cb_loss,
    dbm_ce_loss,
    margin_cross_entropy,
)
from .prior import ClassPrior
from .variants import LossVariant, resolve_variant

__all__ = [
    # Configuration
    "BaseLoss",
    "BaselineKind",
    "BaselineMarginSpec",
    "GradientMode",
    "HeadKind",
    "LossSpec",
    "MarginApplication",
    "MarginConfig",
    "LossVariant",
    "resolve_variant",

    # Priors and margins
    "ClassPrior",
    "FrozenMargins",
    "class_margin",
    "instance_difficulty",
    "instance_margin",
    "hard_positive_mask",
    "dbm_positive_logit",
    "baseline_positive_logit",

    # Objectives
    "BatchLoss",
    "LossResult",
    "batch_loss",
    "cb_weight",
    "class_balanced_weights",
    "margin_cross_entropy",
    "dbm_ce_loss",
    "dbm_cb_loss",
    "dbm_bs_loss",
]
