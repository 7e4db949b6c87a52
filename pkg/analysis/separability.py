"""
Two-class Fisher discriminant analysis and per-class separability.

For every class pair the optimal projection is found by regularized LDA,
both classes are projected onto it and the Fisher ratio
(mu_i - mu_j)^2 / (var_i + var_j) is taken with population variances.
A class's separability is its mean ratio against all other classes.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg

from analysis.groups import GroupThresholds, group_members
from utils.exceptions import (
    DegenerateVarianceError,
    InsufficientSamplesError,
    LengthMismatchError,
    SingularScatterError,
)
from utils.logger import get_logger

logger = get_logger(__name__)

MAX_CONDITION = 1e12
DEFAULT_RIDGE_FACTOR = 1e-4
ZERO_VARIANCE = 1e-30


class SeparabilityReport(BaseModel):
    """Per-class separability S_i and its group means (None for empty groups)."""
    per_class: List[float] = Field(..., description="S_i for every class")
    many: Optional[float] = None
    medium: Optional[float] = None
    few: Optional[float] = None
    all: float = Field(..., description="Mean S_i over all classes")
    ridge: Optional[float] = Field(None, description="Fixed LDA ridge, None for the per-pair default")


def _as_samples(x) -> np.ndarray:
    """Rows are samples; a flat vector is a set of 1-D samples."""
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def _require_samples(x: np.ndarray, what: str, minimum: int = 2) -> None:
    if x.shape[0] < minimum:
        raise InsufficientSamplesError(f"{what} needs at least {minimum} samples, got {x.shape[0]}")


def within_class_scatter(x_i: np.ndarray, x_j: np.ndarray) -> np.ndarray:
    """Pooled scatter sum_c sum_x (x - mu_c)(x - mu_c)^T of two classes."""
    d_i = x_i - x_i.mean(axis=0)
    d_j = x_j - x_j.mean(axis=0)
    return d_i.T @ d_i + d_j.T @ d_j


def lda_direction(x_i: np.ndarray, x_j: np.ndarray, ridge: Optional[float] = None) -> np.ndarray:
    """
    W_ij = (S_w + lambda I)^-1 (mu_i - mu_j), unnormalized.

    Args:
        x_i, x_j: samples of the two classes, one row each
        ridge: lambda; None uses 1e-4 * trace(S_w) / D

    Raises:
        InsufficientSamplesError: a class has fewer than 2 samples
        SingularScatterError: the regularized scatter has condition number above 1e12
    """
    x_i = _as_samples(x_i)
    x_j = _as_samples(x_j)
    _require_samples(x_i, "LDA")
    _require_samples(x_j, "LDA")
    if ridge is not None and ridge < 0:
        raise ValueError(f"Ridge must be non-negative, got {ridge}")

    scatter = within_class_scatter(x_i, x_j)
    dim = scatter.shape[0]
    if ridge is None:
        ridge = DEFAULT_RIDGE_FACTOR * np.trace(scatter) / dim
    regularized = scatter + ridge * np.eye(dim)

    condition = np.linalg.cond(regularized)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularScatterError(f"Within-class scatter is singular (condition {condition:.3e})")
    return linalg.solve(regularized, x_i.mean(axis=0) - x_j.mean(axis=0), assume_a="pos")


def fisher_J(proj_i: np.ndarray, proj_j: np.ndarray, strict: bool = False) -> float:
    """
    (mu_i - mu_j)^2 / (var_i + var_j) with population variances.

    Equal means give 0. Zero total variance with distinct means gives +inf,
    or DegenerateVarianceError when `strict`.
    """
    proj_i = np.asarray(proj_i, dtype=np.float64).ravel()
    proj_j = np.asarray(proj_j, dtype=np.float64).ravel()
    if proj_i.size < 2 or proj_j.size < 2:
        raise InsufficientSamplesError("Fisher criterion needs at least 2 projections per class")

    gap = proj_i.mean() - proj_j.mean()
    if gap == 0.0:
        return 0.0
    spread = proj_i.var() + proj_j.var()
    if spread < ZERO_VARIANCE:
        if strict:
            raise DegenerateVarianceError(f"Projected variances vanish with a mean gap of {gap}")
        logger.warning(f"Projected variances vanish with a mean gap of {gap}; Fisher ratio is infinite")
        return float("inf")
    return float(gap * gap / spread)


def pair_criterion(x_i: np.ndarray, x_j: np.ndarray, ridge: Optional[float] = None) -> float:
    x_i, x_j = _as_samples(x_i), _as_samples(x_j)
    w = lda_direction(x_i, x_j, ridge)
    return fisher_J(x_i @ w, x_j @ w)


def class_separability(
        features: np.ndarray,
        labels: np.ndarray,
        ridge: Optional[float] = None,
        train_counts=None,
        thresholds: Optional[GroupThresholds] = None,
        num_classes: Optional[int] = None,
        threads: int = 1
) -> SeparabilityReport:
    """
    S_i = 1/(C-1) sum_{j != i} J(W_ij) for every class.

    Pairs are evaluated in a fixed order, optionally on `threads` worker
    threads. Group means need `train_counts`.
    """
    features = _as_samples(features)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (features.shape[0],):
        raise LengthMismatchError(f"{features.shape[0]} features for {labels.size} labels")
    num_classes = num_classes if num_classes is not None else int(labels.max()) + 1
    if num_classes < 2:
        raise InsufficientSamplesError("Separability needs at least two classes")

    by_class = [features[labels == cls] for cls in range(num_classes)]
    for cls, x in enumerate(by_class):
        _require_samples(x, f"Class {cls}")

    pairs: List[Tuple[int, int]] = list(combinations(range(num_classes), 2))

    def evaluate(pair):
        i, j = pair
        return pair_criterion(by_class[i], by_class[j], ridge)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            values = list(executor.map(evaluate, pairs))
    else:
        values = [evaluate(pair) for pair in pairs]

    totals = np.zeros(num_classes)
    for (i, j), value in zip(pairs, values):
        totals[i] += value
        totals[j] += value
    per_class = totals / (num_classes - 1)

    groups = {}
    if train_counts is not None:
        for group, classes in group_members(train_counts, thresholds or GroupThresholds()).items():
            groups[group.value] = float(per_class[classes].mean()) if classes else None

    logger.info(f"Separability over {len(pairs)} class pairs: mean S = {per_class.mean():.4f}")
    return SeparabilityReport(
        per_class=per_class.tolist(),
        all=float(per_class.mean()),
        ridge=ridge,
        **groups,
    )
