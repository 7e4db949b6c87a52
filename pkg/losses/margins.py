"""
Positive-class logits with angular or cosine margins, and their derivatives
with respect to cos(theta_y).

Every function works on a batch: cos is (N, C), labels is (N,).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.numerics import safe_acos, safe_acos_grad
from losses.config import (
    BaselineKind,
    BaselineMarginSpec,
    GradientMode,
    MarginApplication,
    MarginConfig,
)
from losses.prior import ClassPrior
from utils.exceptions import IndexOutOfRangeError, ShapeMismatchError


@dataclass(frozen=True)
class PositiveLogit:
    psi: np.ndarray        # unscaled positive logit
    dpsi: np.ndarray       # d psi / d cos(theta_y)
    hard: np.ndarray       # instance margin applied because the sample is a hard positive
    margin: np.ndarray     # total angular margin added to theta_y
    clamped: np.ndarray    # theta_y + margin exceeded pi


@dataclass(frozen=True)
class FrozenMargins:
    """Margins recorded in a forward pass, replayed to evaluate the detached surrogate."""
    margin: np.ndarray
    hard: np.ndarray


def class_margin(prior: ClassPrior, k: float, tau: float) -> np.ndarray:
    """m_C = K * rho_i^(-tau) for every class."""
    return k * np.power(prior.ratios, -tau)


def instance_difficulty(cos_y):
    """d_I = (1 - cos theta_y) / 2, in [0, 1]."""
    return (1.0 - np.clip(cos_y, -1.0, 1.0)) / 2.0


def instance_margin(m_c, d_i):
    """m_I = m_C * d_I."""
    return m_c * d_i


def check_labels(cos: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cos = np.asarray(cos, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if cos.ndim != 2 or labels.shape != (cos.shape[0],):
        raise ShapeMismatchError(f"Outputs {cos.shape} and labels {labels.shape} do not pair up")
    if np.any(labels < 0) or np.any(labels >= cos.shape[1]):
        raise IndexOutOfRangeError(f"Labels outside [0, {cos.shape[1]})")
    return cos, labels


def hard_positive_mask(outputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    True where some other class scores at least as high as the label.

    Ties count as hard.
    """
    outputs, labels = check_labels(outputs, labels)
    rows = np.arange(labels.size)
    positive = outputs[rows, labels]
    others = outputs.copy()
    others[rows, labels] = -np.inf
    return others.max(axis=1) >= positive


def angular_margin_logit(cos_y: np.ndarray, margin: np.ndarray, dmargin: np.ndarray = 0.0):
    """
    cos(theta_y + margin), clamped to -1 once the angle passes pi.

    Returns psi, d psi / d cos_y (with d margin / d cos_y = dmargin) and the clamp mask.
    A zero margin returns cos_y unchanged.
    """
    cos_y = np.asarray(cos_y, dtype=np.float64)
    margin = np.broadcast_to(np.asarray(margin, dtype=np.float64), cos_y.shape)
    phi = safe_acos(cos_y) + margin
    no_margin = margin == 0.0
    clamped = (phi > np.pi) & ~no_margin
    psi = np.where(no_margin, cos_y, np.where(clamped, -1.0, np.cos(phi)))
    dphi = safe_acos_grad(cos_y) + dmargin
    dpsi = np.where(no_margin, 1.0, np.where(clamped, 0.0, -np.sin(phi) * dphi))
    return psi, dpsi, clamped


def dbm_positive_logits(
        cos: np.ndarray,
        labels: np.ndarray,
        prior: ClassPrior,
        cfg: MarginConfig,
        frozen: Optional[FrozenMargins] = None
) -> PositiveLogit:
    """
    psi_y = cos(theta_y + m_C + 1[hard] m_I) for a batch of raw cosines.

    The hard-positive indicator is read from the raw cosines, before any margin.
    With `frozen`, the recorded margins are reused as constants.
    """
    cos, labels = check_labels(cos, labels)
    rows = np.arange(labels.size)
    cos_y = cos[rows, labels]
    active = cfg.application != MarginApplication.NONE

    if frozen is not None:
        margin = np.asarray(frozen.margin, dtype=np.float64)
        hard = np.asarray(frozen.hard, dtype=bool)
        psi, dpsi, clamped = angular_margin_logit(cos_y, margin)
        return PositiveLogit(psi, dpsi, hard, margin, clamped)

    hard = hard_positive_mask(cos, labels)
    m_c = class_margin(prior, cfg.k, cfg.tau)[labels]
    if cfg.application == MarginApplication.ALL_POSITIVES:
        gate = np.ones_like(cos_y)
    elif cfg.application == MarginApplication.HARD_POSITIVES:
        gate = hard.astype(np.float64)
    else:
        gate = np.zeros_like(cos_y)

    margin = m_c + gate * instance_margin(m_c, instance_difficulty(cos_y))
    dmargin = 0.0
    if cfg.gradient_mode == GradientMode.THROUGH:
        # d m_I / d cos_y = -m_C / 2 inside [-1, 1]
        inside = np.abs(cos_y) <= 1.0
        dmargin = np.where(inside, -0.5 * gate * m_c, 0.0)

    psi, dpsi, clamped = angular_margin_logit(cos_y, margin, dmargin)
    return PositiveLogit(psi, dpsi, hard & active, margin, clamped)


def dbm_positive_logit(cos_all: np.ndarray, y: int, prior: ClassPrior, cfg: MarginConfig) -> Tuple[float, bool]:
    """Single-sample DBM positive logit (unscaled) and its hard-positive flag."""
    result = dbm_positive_logits(np.atleast_2d(cos_all), np.array([y]), prior, cfg)
    return float(result.psi[0]), bool(result.hard[0])


def baseline_positive_logits(
        cos: np.ndarray,
        labels: np.ndarray,
        prior: ClassPrior,
        spec: BaselineMarginSpec
) -> PositiveLogit:
    """SphereFace, CosFace, ArcFace and LDAM positive logits for a batch."""
    cos, labels = check_labels(cos, labels)
    cos_y = cos[np.arange(labels.size), labels]
    margin = np.zeros_like(cos_y)
    clamped = np.zeros(cos_y.shape, dtype=bool)

    if spec.kind == BaselineKind.SPHEREFACE:
        m = int(spec.m)
        theta = safe_acos(cos_y)
        psi = np.cos(m * theta)
        dpsi = -np.sin(m * theta) * m * safe_acos_grad(cos_y)
    elif spec.kind == BaselineKind.COSFACE:
        psi = cos_y - spec.m
        dpsi = np.ones_like(cos_y)
    elif spec.kind == BaselineKind.ARCFACE:
        margin = np.full_like(cos_y, spec.m)
        psi, dpsi, clamped = angular_margin_logit(cos_y, margin)
    else:
        n_y = prior.counts[labels].astype(np.float64)
        psi = cos_y - spec.m * np.power(n_y, -0.25)
        dpsi = np.ones_like(cos_y)

    return PositiveLogit(psi, dpsi, np.zeros(cos_y.shape, dtype=bool), margin, clamped)


def baseline_positive_logit(spec: BaselineMarginSpec, cos_y: float, n_y: int = 1) -> float:
    """Single-sample fixed-form positive logit (unscaled); n_y is only read by LDAM."""
    prior = ClassPrior(np.array([n_y]))
    result = baseline_positive_logits(np.array([[cos_y]]), np.array([0]), prior, spec)
    return float(result.psi[0])
