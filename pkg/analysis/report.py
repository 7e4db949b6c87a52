import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from analysis.angular import AngularStats
from analysis.groups import GroupAccuracy
from analysis.separability import SeparabilityReport
from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.12g"

CLASS_COLUMNS = [
    "class", "train_count", "group", "accuracy",
    "mean_angle_train", "mean_angle_test",
    "separability_train", "separability_test",
]


class ClassRow(BaseModel):
    """Flat per-class record of the CSV report."""
    model_config = ConfigDict(populate_by_name=True)

    class_index: int = Field(..., alias="class")
    train_count: int
    group: str
    accuracy: Optional[float] = None
    mean_angle_train: Optional[float] = None
    mean_angle_test: Optional[float] = None
    separability_train: Optional[float] = None
    separability_test: Optional[float] = None


class AnalysisReport(BaseModel):
    """Group accuracies, angular compactness and separability of one trained model."""
    config_hash: Optional[str] = Field(None, description="Hash of the experiment that produced the model")
    head: str = Field(..., description="Classifier head of the analyzed model")
    thresholds: Dict[str, int] = Field(..., description="Group thresholds used")
    accuracy: GroupAccuracy = Field(..., description="Test accuracy per group")
    angular: Optional[Dict[str, AngularStats]] = Field(
        None, description="Angular statistics per split; absent for linear heads"
    )
    angular_absent_reason: Optional[str] = Field(None, description="Why angular statistics are missing")
    separability: Dict[str, SeparabilityReport] = Field(..., description="Separability per split")
    classes: List[ClassRow] = Field(default_factory=list, description="Per-class rows")


def report_paths(out_dir: PathLike, stem: str = "analysis") -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    return out_dir / f"{stem}.json", out_dir / f"{stem}.csv"


def write_report(report: AnalysisReport, out_dir: PathLike, stem: str = "analysis") -> Tuple[Path, Path]:
    """JSON (full report) and CSV (one row per class)."""
    json_path, csv_path = report_paths(out_dir, stem)
    json_path.parent.mkdir(parents=True, exist_ok=True)

    payload = report.model_dump(mode="python", by_alias=True)
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    frame = pd.DataFrame([row.model_dump(by_alias=True) for row in report.classes], columns=CLASS_COLUMNS)
    frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote analysis report to {json_path} and {csv_path}")
    return json_path, csv_path


def read_report(path: PathLike) -> AnalysisReport:
    with open(path, "r", encoding="utf-8") as f:
        return AnalysisReport.model_validate(json.load(f))


def read_class_table(path: PathLike) -> List[ClassRow]:
    frame = pd.read_csv(path)
    # JSON records carry native ints and null for missing cells
    records = json.loads(frame.to_json(orient="records", double_precision=15))
    return [ClassRow.model_validate(record) for record in records]
