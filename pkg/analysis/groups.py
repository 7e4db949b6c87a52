from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.exceptions import LengthMismatchError


class Group(str, Enum):
    MANY = "many"
    MEDIUM = "medium"
    FEW = "few"


GROUP_ORDER = [Group.MANY, Group.MEDIUM, Group.FEW]


class GroupThresholds(BaseModel):
    """Shot thresholds: Many is n > many_min, Few is n < few_max, Medium otherwise."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    many_min: int = Field(100, description="Exclusive lower bound of the Many group")
    few_max: int = Field(20, description="Exclusive upper bound of the Few group")

    @model_validator(mode="after")
    def validate_order(self):
        if self.few_max > self.many_min:
            raise ValueError(f"few_max ({self.few_max}) must not exceed many_min ({self.many_min})")
        return self

    @classmethod
    def from_terciles(cls, counts) -> "GroupThresholds":
        """Thresholds at the 1/3 and 2/3 quantiles of the training counts."""
        counts = np.asarray(counts, dtype=np.float64)
        many_min = int(np.floor(np.quantile(counts, 2.0 / 3.0)))
        few_max = min(int(np.ceil(np.quantile(counts, 1.0 / 3.0))), many_min)
        return cls(many_min=many_min, few_max=few_max)


class GroupAccuracy(BaseModel):
    """Accuracy per shot group; None marks an empty group."""
    many: Optional[float] = None
    medium: Optional[float] = None
    few: Optional[float] = None
    all: Optional[float] = None


def assign_groups(train_counts, thresholds: GroupThresholds) -> List[Group]:
    groups = []
    for n in np.asarray(train_counts):
        if n > thresholds.many_min:
            groups.append(Group.MANY)
        elif n < thresholds.few_max:
            groups.append(Group.FEW)
        else:
            groups.append(Group.MEDIUM)
    return groups


def group_members(train_counts, thresholds: GroupThresholds) -> Dict[Group, List[int]]:
    members = {group: [] for group in GROUP_ORDER}
    for cls, group in enumerate(assign_groups(train_counts, thresholds)):
        members[group].append(cls)
    return members


def group_accuracy(predictions, labels, train_counts, thresholds: GroupThresholds) -> GroupAccuracy:
    """
    Accuracy over the test samples of each group's classes.

    Raises:
        LengthMismatchError: predictions and labels differ in length
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise LengthMismatchError(f"{predictions.size} predictions for {labels.size} labels")

    correct = predictions == labels
    result = {"all": float(correct.mean()) if labels.size else None}
    for group, classes in group_members(train_counts, thresholds).items():
        mask = np.isin(labels, classes)
        result[group.value] = float(correct[mask].mean()) if mask.any() else None
    return GroupAccuracy(**result)


def per_class_accuracy(predictions, labels, num_classes: int) -> List[Optional[float]]:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    out = []
    for cls in range(num_classes):
        mask = labels == cls
        out.append(float(np.mean(predictions[mask] == cls)) if mask.any() else None)
    return out
