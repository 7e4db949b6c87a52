"""
Cross-entropy family over cosine (or linear) outputs with analytic gradients.

`batch_loss` is the single code path; the per-sample functions below are
1-row views of it.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from core.numerics import softmax
from losses.config import BaseLoss, HeadKind, LossSpec, MarginConfig
from losses.margins import (
    FrozenMargins,
    PositiveLogit,
    baseline_positive_logits,
    check_labels,
    dbm_positive_logits,
)
from losses.prior import ClassPrior
from utils.exceptions import ConfigurationError, ShapeMismatchError


@dataclass(frozen=True)
class LossResult:
    """Loss and gradient of one sample."""
    loss: float
    grad_cos: np.ndarray
    hard_positive: bool
    angle_clamped: bool = False


@dataclass(frozen=True)
class BatchLoss:
    """
    Per-sample losses and output gradients of a batch.

    `losses` and `grads` already carry the per-sample weights; the batch
    objective is the weighted mean sum(w * l) / sum(w).
    """
    losses: np.ndarray
    grads: np.ndarray
    weights: np.ndarray
    hard: np.ndarray
    clamped: np.ndarray
    margins: np.ndarray

    @property
    def loss(self) -> float:
        return float(self.losses.sum() / self.weights.sum())

    @property
    def output_grad(self) -> np.ndarray:
        """Gradient of the weighted-mean batch loss with respect to the outputs."""
        return self.grads / self.weights.sum()

    def frozen(self) -> FrozenMargins:
        return FrozenMargins(margin=self.margins.copy(), hard=self.hard.copy())

    def result(self, i: int) -> LossResult:
        return LossResult(
            loss=float(self.losses[i]),
            grad_cos=self.grads[i].copy(),
            hard_positive=bool(self.hard[i]),
            angle_clamped=bool(self.clamped[i]),
        )


def cb_weight(beta: float, n_y) -> np.ndarray:
    """Class-balanced weight (1 - beta) / (1 - beta^n_y)."""
    if not 0.0 <= beta < 1.0:
        raise ConfigurationError(f"beta must lie in [0, 1), got {beta}")
    n_y = np.asarray(n_y, dtype=np.float64)
    if np.any(n_y < 1):
        raise ConfigurationError("Class counts must be at least 1")
    return (1.0 - beta) / (1.0 - np.power(beta, n_y))


def class_balanced_weights(prior: ClassPrior, beta: float, labels: np.ndarray) -> np.ndarray:
    return cb_weight(beta, prior.counts)[np.asarray(labels, dtype=np.int64)]


def _cross_entropy(
        psi: np.ndarray,
        dpsi: np.ndarray,
        cos: np.ndarray,
        labels: np.ndarray,
        scale: float,
        offsets: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.arange(labels.size)
    z = scale * cos
    z[rows, labels] = scale * psi
    if offsets is not None:
        z = z + offsets
    # log(sum_i exp(z_i - z_y)) >= 0 since the y term contributes exp(0)
    losses = logsumexp(z - z[rows, labels][:, None], axis=1)
    probs = softmax(z)
    probs[rows, labels] -= 1.0
    grads = scale * probs
    grads[rows, labels] *= dpsi
    return losses, grads


def batch_loss(
        outputs: np.ndarray,
        labels: np.ndarray,
        prior: ClassPrior,
        spec: LossSpec,
        head: HeadKind = HeadKind.COSINE,
        weights: Optional[np.ndarray] = None,
        frozen: Optional[FrozenMargins] = None
) -> BatchLoss:
    """
    Per-sample losses and d loss / d outputs for a batch.

    Args:
        outputs: raw cosines (cosine head) or logits (linear head), shape (N, C)
        labels: class indices, shape (N,)
        prior: training class counts
        spec: objective description
        head: which head produced `outputs`
        weights: per-sample weights; defaults to CB weights for the CB base and ones otherwise
        frozen: margins recorded by an earlier call, held constant (detached surrogate)
    """
    outputs, labels = check_labels(outputs, labels)
    if outputs.shape[1] != prior.class_count:
        raise ShapeMismatchError(f"Outputs have {outputs.shape[1]} classes, prior has {prior.class_count}")

    if weights is None:
        if spec.base == BaseLoss.CB:
            weights = class_balanced_weights(prior, spec.beta, labels)
        else:
            weights = np.ones(labels.size)
    weights = np.asarray(weights, dtype=np.float64)

    offsets = prior.log_proportions if spec.base == BaseLoss.BS else None
    n = labels.size

    if head == HeadKind.LINEAR:
        if spec.has_margin:
            raise ConfigurationError("Margins need a cosine head")
        positive = PositiveLogit(
            psi=outputs[np.arange(n), labels],
            dpsi=np.ones(n),
            hard=np.zeros(n, dtype=bool),
            margin=np.zeros(n),
            clamped=np.zeros(n, dtype=bool),
        )
        scale = 1.0
    elif spec.baseline is not None:
        positive = baseline_positive_logits(outputs, labels, prior, spec.baseline)
        scale = spec.margin.scale
    else:
        positive = dbm_positive_logits(outputs, labels, prior, spec.margin, frozen)
        scale = spec.margin.scale

    losses, grads = _cross_entropy(positive.psi, positive.dpsi, outputs, labels, scale, offsets)
    return BatchLoss(
        losses=losses * weights,
        grads=grads * weights[:, None],
        weights=weights,
        hard=positive.hard,
        clamped=positive.clamped,
        margins=positive.margin,
    )


def margin_cross_entropy(
        psi_y: float,
        cos_all: np.ndarray,
        y: int,
        s: float,
        dpsi_dcos: float = 1.0,
        logit_offsets: Optional[np.ndarray] = None,
        hard_positive: bool = False
) -> LossResult:
    """
    -log(e^{s psi_y} / (e^{s psi_y} + sum_{i != y} e^{s cos_i})).

    `dpsi_dcos` chains the gradient through the positive logit;
    `logit_offsets` are added to every scaled logit (log priors for BS).
    """
    cos, labels = check_labels(np.atleast_2d(cos_all), np.array([y]))
    offsets = None if logit_offsets is None else np.asarray(logit_offsets, dtype=np.float64)
    losses, grads = _cross_entropy(
        np.array([psi_y], dtype=np.float64), np.array([dpsi_dcos], dtype=np.float64),
        cos, labels, s, offsets
    )
    return LossResult(loss=float(losses[0]), grad_cos=grads[0], hard_positive=hard_positive)


def _single(cos_all, y, prior: ClassPrior, spec: LossSpec) -> LossResult:
    return batch_loss(np.atleast_2d(cos_all), np.array([y]), prior, spec).result(0)


def dbm_ce_loss(cos_all: np.ndarray, y: int, prior: ClassPrior, cfg: MarginConfig) -> LossResult:
    return _single(cos_all, y, prior, LossSpec(base=BaseLoss.CE, margin=cfg))


def dbm_cb_loss(cos_all: np.ndarray, y: int, prior: ClassPrior, cfg: MarginConfig, beta: float = 0.9999) -> LossResult:
    return _single(cos_all, y, prior, LossSpec(base=BaseLoss.CB, margin=cfg, beta=beta))


def dbm_bs_loss(cos_all: np.ndarray, y: int, prior: ClassPrior, cfg: MarginConfig) -> LossResult:
    return _single(cos_all, y, prior, LossSpec(base=BaseLoss.BS, margin=cfg))
