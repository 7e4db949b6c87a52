from .angular import AngleSummary, AngularStats, angular_stats, positive_angles
from .groups import (
    Group,
    GroupAccuracy,
    GroupThresholds,
    assign_groups,
    group_accuracy,
    per_class_accuracy,
)
from .report import AnalysisReport, ClassRow, read_class_table, read_report, write_report
from .separability import SeparabilityReport, class_separability, fisher_J, lda_direction

__all__ = [
    # Groups
    "Group",
    "GroupAccuracy",
    "GroupThresholds",
    "assign_groups",
    "group_accuracy",
    "per_class_accuracy",

    # Compactness and separability
    "AngleSummary",
    "AngularStats",
    "angular_stats",
    "positive_angles",
    "SeparabilityReport",
    "class_separability",
    "fisher_J",
    "lda_direction",

    # Reports
    "AnalysisReport",
    "ClassRow",
    "read_class_table",
    "read_report",
    "write_report",
]
