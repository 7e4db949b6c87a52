"""
Numerically safe primitives shared by every loss, model and analysis routine.

All arrays are float64. Functions accept a single vector or a batch of row
vectors wherever that is noted.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.special import softmax as _softmax

from utils.exceptions import IndexOutOfRangeError, ShapeMismatchError, ZeroVectorError

ZERO_NORM = 1e-30
ACOS_EPS = 1e-7


@dataclass(frozen=True)
class CosineHead:
    """Class-center directions (C x D) and the logit scale s."""
    weights: np.ndarray
    scale: float = 32.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ShapeMismatchError(f"Cosine head weights must be 2-D, got shape {weights.shape}")
        if not self.scale > 0:
            raise ValueError(f"Cosine head scale must be positive, got {self.scale}")
        object.__setattr__(self, "weights", weights)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class LinearHead:
    """Linear classifier W f + b."""
    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if weights.ndim != 2 or biases.shape != (weights.shape[0],):
            raise ShapeMismatchError(
                f"Linear head shapes disagree: weights {weights.shape}, biases {biases.shape}"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def row_norms(v: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis."""
    return np.sqrt(np.sum(np.square(v), axis=-1))


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """
    Scale a vector (or every row of a matrix) to unit Euclidean norm.

    Raises:
        ZeroVectorError: if any norm is below 1e-30
    """
    v = np.asarray(v, dtype=np.float64)
    norms = row_norms(v)
    if np.any(norms < ZERO_NORM):
        raise ZeroVectorError("Cannot normalize a zero vector")
    return v / norms[..., None]


def cosine_similarity(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Cosine between each feature row and each weight row; both sides normalized explicitly."""
    return l2_normalize(features) @ l2_normalize(weights).T


def cosine_logits(f: np.ndarray, head: CosineHead) -> np.ndarray:
    """s * cos(theta_i) for every class row of the head; f may be a vector or a batch."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != head.feature_dim:
        raise ShapeMismatchError(f"Feature width {f.shape[-1]} does not match head width {head.feature_dim}")
    return head.scale * cosine_similarity(f, head.weights)


def safe_acos(c) -> np.ndarray:
    """arccos with the argument clamped to [-1 + 1e-7, 1 - 1e-7]."""
    return np.arccos(np.clip(c, -1.0 + ACOS_EPS, 1.0 - ACOS_EPS))


def safe_acos_grad(c) -> np.ndarray:
    """Derivative of safe_acos; zero where the clamp is active."""
    c = np.asarray(c, dtype=np.float64)
    inside = np.abs(c) < 1.0 - ACOS_EPS
    safe = np.where(inside, c, 0.0)
    return np.where(inside, -1.0 / np.sqrt(1.0 - safe * safe), 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    return _softmax(z, axis=-1)


def log_sum_exp(z: np.ndarray) -> np.ndarray:
    return logsumexp(z, axis=-1)


def _check_index(y, num_classes: int):
    y = np.asarray(y)
    if np.any(y < 0) or np.any(y >= num_classes):
        raise IndexOutOfRangeError(f"Class index {y} outside [0, {num_classes})")


def softmax_cross_entropy(z: np.ndarray, y: int) -> float:
    """-log softmax(z)[y] via the stable log-sum-exp identity."""
    z = np.asarray(z, dtype=np.float64)
    _check_index(y, z.shape[-1])
    return float(max(log_sum_exp(z) - z[y], 0.0))


def softmax_cross_entropy_grad(z: np.ndarray, y: int) -> np.ndarray:
    """Gradient of softmax_cross_entropy with respect to z: softmax(z) - onehot(y)."""
    z = np.asarray(z, dtype=np.float64)
    _check_index(y, z.shape[-1])
    grad = softmax(z)
    grad[y] -= 1.0
    return grad
