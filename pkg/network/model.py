"""
Fully-connected tanh backbone with a linear or cosine classifier head,
with explicit forward caches and hand-written backpropagation.
"""

import copy
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from core.numerics import CosineHead, LinearHead, l2_normalize, row_norms
from losses.config import HeadKind
from network.config import ModelDims
from utils.exceptions import ShapeMismatchError, StaleCacheError
from utils.logger import get_logger

logger = get_logger(__name__)

Head = Union[LinearHead, CosineHead]


@dataclass
class DenseLayer:
    weights: np.ndarray   # (out, in)
    biases: np.ndarray    # (out,)


@dataclass
class ModelParams:
    """Trainable state. Gradients are returned in the same structure."""
    dims: ModelDims
    layers: List[DenseLayer]
    head: Head

    def arrays(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order; updates through them are in place."""
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.biases])
        out.append(self.head.weights)
        if isinstance(self.head, LinearHead):
            out.append(self.head.biases)
        return out

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def num_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays()))


@dataclass
class ForwardCache:
    activations: List[np.ndarray]            # input followed by every hidden activation
    outputs: np.ndarray
    feature_norms: Optional[np.ndarray] = None
    unit_features: Optional[np.ndarray] = None
    weight_norms: Optional[np.ndarray] = None
    unit_weights: Optional[np.ndarray] = None
    shapes: List[tuple] = field(default_factory=list)


@dataclass
class ForwardResult:
    features: np.ndarray
    outputs: np.ndarray
    cache: ForwardCache


def init_model(dims: ModelDims, seed: int, scale: float = 32.0) -> ModelParams:
    """
    Deterministic initialization.

    Hidden weights ~ N(0, 1/fan_in), biases zero, head rows unit-normalized.
    """
    dims.check()
    rng = np.random.default_rng(seed)
    layers = []
    fan_in = dims.input_dim
    for width in dims.hidden_dims:
        weights = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(width, fan_in))
        layers.append(DenseLayer(weights=weights, biases=np.zeros(width)))
        fan_in = width

    head_weights = l2_normalize(rng.normal(0.0, 1.0, size=(dims.num_classes, dims.feature_dim)))
    if dims.head == HeadKind.COSINE:
        head = CosineHead(weights=head_weights, scale=scale)
    else:
        head = LinearHead(weights=head_weights, biases=np.zeros(dims.num_classes))

    model = ModelParams(dims=dims, layers=layers, head=head)
    logger.debug(f"Initialized {dims.head.value} model with {model.num_parameters()} parameters (seed {seed})")
    return model


def _shapes(model: ModelParams) -> List[tuple]:
    return [a.shape for a in model.arrays()]


def forward(model: ModelParams, batch: np.ndarray) -> ForwardResult:
    """
    Features and head outputs for a batch of row vectors.

    The cosine head emits raw cosines; the scale s is applied by the loss.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != model.dims.input_dim:
        raise ShapeMismatchError(f"Batch width {x.shape[1]} does not match input dim {model.dims.input_dim}")

    activations = [x]
    a = x
    for layer in model.layers:
        a = np.tanh(a @ layer.weights.T + layer.biases)
        activations.append(a)
    features = a

    if isinstance(model.head, CosineHead):
        feature_norms = row_norms(features)
        unit_features = l2_normalize(features)
        weight_norms = row_norms(model.head.weights)
        unit_weights = l2_normalize(model.head.weights)
        outputs = unit_features @ unit_weights.T
        cache = ForwardCache(activations, outputs, feature_norms, unit_features, weight_norms, unit_weights)
    else:
        outputs = features @ model.head.weights.T + model.head.biases
        cache = ForwardCache(activations, outputs)
    cache.shapes = _shapes(model)
    return ForwardResult(features=features, outputs=outputs, cache=cache)


def _unit_backward(grad_unit: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Chain rule through u = v / ||v|| applied row-wise."""
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms[:, None]


def backward(model: ModelParams, cache: ForwardCache, loss_grads: np.ndarray) -> ModelParams:
    """
    Gradient of a loss with respect to every parameter, given d loss / d outputs.

    Gradients are summed over the batch.
    """
    loss_grads = np.asarray(loss_grads, dtype=np.float64)
    if cache.shapes != _shapes(model) or loss_grads.shape != cache.outputs.shape:
        raise StaleCacheError(
            f"Cache does not match: outputs {cache.outputs.shape}, gradients {loss_grads.shape}"
        )

    features = cache.activations[-1]
    if isinstance(model.head, CosineHead):
        grad_unit_features = loss_grads @ cache.unit_weights
        grad_unit_weights = loss_grads.T @ cache.unit_features
        grad_features = _unit_backward(grad_unit_features, cache.unit_features, cache.feature_norms)
        head_grad = CosineHead(
            weights=_unit_backward(grad_unit_weights, cache.unit_weights, cache.weight_norms),
            scale=model.head.scale,
        )
    else:
        grad_features = loss_grads @ model.head.weights
        head_grad = LinearHead(weights=loss_grads.T @ features, biases=loss_grads.sum(axis=0))

    layer_grads = []
    grad_a = grad_features
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        a = cache.activations[index + 1]
        grad_z = grad_a * (1.0 - a * a)
        layer_grads.append(DenseLayer(weights=grad_z.T @ cache.activations[index], biases=grad_z.sum(axis=0)))
        grad_a = grad_z @ layer.weights
    layer_grads.reverse()

    return ModelParams(dims=model.dims, layers=layer_grads, head=head_grad)


def predict(model: ModelParams, batch: np.ndarray) -> np.ndarray:
    return np.argmax(forward(model, batch).outputs, axis=1)
