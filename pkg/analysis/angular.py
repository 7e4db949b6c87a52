from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from analysis.groups import GROUP_ORDER, GroupThresholds, group_members
from core.numerics import CosineHead, cosine_similarity, safe_acos
from utils.exceptions import LengthMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)


class AngleSummary(BaseModel):
    """Angle between features and their own class center, in degrees."""
    count: int = Field(..., ge=1)
    mean: float = Field(..., ge=0.0, le=180.0)
    q1: float = Field(..., ge=0.0, le=180.0)
    median: float = Field(..., ge=0.0, le=180.0)
    q3: float = Field(..., ge=0.0, le=180.0)

    @model_validator(mode="after")
    def validate_order(self):
        if not self.q1 <= self.median <= self.q3:
            raise ValueError(f"Quartiles out of order: {self.q1}, {self.median}, {self.q3}")
        return self


class AngularStats(BaseModel):
    """Angle summaries per group; None where a group has no samples."""
    many: Optional[AngleSummary] = None
    medium: Optional[AngleSummary] = None
    few: Optional[AngleSummary] = None
    all: Optional[AngleSummary] = None
    per_class_mean: List[Optional[float]] = Field(default_factory=list, description="Mean angle per class")


def positive_angles(features: np.ndarray, labels: np.ndarray, head: CosineHead) -> np.ndarray:
    """theta_y in degrees for every row."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (features.shape[0],):
        raise LengthMismatchError(f"{features.shape[0]} features for {labels.size} labels")
    cos = cosine_similarity(features, head.weights)
    cos_y = cos[np.arange(labels.size), labels]
    return np.degrees(safe_acos(cos_y))


def summarize_angles(angles: np.ndarray) -> Optional[AngleSummary]:
    """Mean and linearly interpolated quartiles; None for no angles."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.size == 0:
        return None
    q1, median, q3 = np.percentile(angles, [25.0, 50.0, 75.0], method="linear")
    return AngleSummary(count=int(angles.size), mean=float(angles.mean()), q1=float(q1), median=float(median), q3=float(q3))


def angular_stats(
        features: np.ndarray,
        labels: np.ndarray,
        head: CosineHead,
        train_counts=None,
        thresholds: Optional[GroupThresholds] = None
) -> AngularStats:
    """
    Intra-class compactness: distribution of angles to the positive class center.

    Group summaries need `train_counts`; without them only "all" is filled.
    """
    angles = positive_angles(features, labels, head)
    labels = np.asarray(labels, dtype=np.int64)
    summaries: Dict[str, Optional[AngleSummary]] = {"all": summarize_angles(angles)}

    if train_counts is not None:
        members = group_members(train_counts, thresholds or GroupThresholds())
        for group in GROUP_ORDER:
            summaries[group.value] = summarize_angles(angles[np.isin(labels, members[group])])
            if summaries[group.value] is None:
                logger.warning(f"No samples in the {group.value} group")

    per_class = []
    for cls in range(head.num_classes):
        mask = labels == cls
        per_class.append(float(angles[mask].mean()) if mask.any() else None)
    return AngularStats(**summaries, per_class_mean=per_class)
