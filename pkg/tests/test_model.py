import numpy as np
import pytest

from core.numerics import CosineHead, cosine_logits
from losses.config import HeadKind, LossSpec, MarginConfig
from losses.objectives import batch_loss
from losses.prior import ClassPrior
from network.config import ModelDims
from network.model import backward, forward, init_model, predict
from utils.exceptions import InvalidDimsError, ShapeMismatchError, StaleCacheError


def dims(head=HeadKind.COSINE, hidden=(5, 3), classes=4):
    return ModelDims(input_dim=4, hidden_dims=list(hidden), num_classes=classes, head=head)


def total_loss(model, x, labels, prior, spec):
    result = forward(model, x)
    return batch_loss(result.outputs, labels, prior, spec, head=model.dims.head).loss


def test_init_is_deterministic():
    a = init_model(dims(), seed=7)
    b = init_model(dims(), seed=7)
    c = init_model(dims(), seed=8)
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert not all(np.array_equal(x, y) for x, y in zip(a.arrays(), c.arrays()))
    assert np.allclose(np.linalg.norm(a.head.weights, axis=1), 1.0)


def test_zero_width_layer_is_rejected():
    with pytest.raises(InvalidDimsError):
        init_model(ModelDims(input_dim=4, hidden_dims=[0], num_classes=3), seed=0)


def test_forward_ranges_and_shapes(rng):
    model = init_model(dims(), seed=1)
    x = rng.normal(size=(10, 4))
    result = forward(model, x)
    assert result.outputs.shape == (10, 4)
    assert result.features.shape == (10, 3)
    assert np.all(np.abs(result.outputs) <= 1.0 + 1e-12)
    assert predict(model, x).shape == (10,)
    with pytest.raises(ShapeMismatchError):
        forward(model, rng.normal(size=(2, 5)))


def test_forward_rows_are_independent(rng):
    model = init_model(dims(head=HeadKind.LINEAR), seed=2)
    x = rng.normal(size=(6, 4))
    batched = forward(model, x).outputs
    single = np.vstack([forward(model, row).outputs for row in x])
    assert np.allclose(batched, single, atol=1e-14)


def test_headless_backbone_reproduces_cosine_logits(rng):
    model = init_model(dims(hidden=()), seed=3)
    x = rng.normal(size=(5, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    head = CosineHead(model.head.weights, scale=model.head.scale)
    assert np.allclose(model.head.scale * forward(model, x).outputs, cosine_logits(x, head), atol=1e-12)


def test_cosine_outputs_ignore_head_row_norms(rng):
    model = init_model(dims(), seed=4)
    x = rng.normal(size=(5, 4))
    before = forward(model, x).outputs
    model.head.weights[...] *= 0.5
    assert np.allclose(forward(model, x).outputs, before, atol=1e-14)


@pytest.mark.parametrize("head, spec", [
    (HeadKind.COSINE, LossSpec(margin=MarginConfig(k=0.0))),
    (HeadKind.COSINE, LossSpec(margin=MarginConfig(k=0.0, scale=4.0))),
    (HeadKind.LINEAR, LossSpec()),
])
def test_backward_matches_finite_differences(rng, head, spec):
    model = init_model(dims(head=head), seed=5, scale=spec.margin.scale)
    x = rng.normal(size=(6, 4))
    labels = rng.integers(0, 4, size=6)
    prior = ClassPrior(np.array([3, 2, 2, 1]))

    result = forward(model, x)
    losses = batch_loss(result.outputs, labels, prior, spec, head=head)
    grads = backward(model, result.cache, losses.output_grad)

    step = 1e-6
    for param, grad in zip(model.arrays(), grads.arrays()):
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + step
            plus = total_loss(model, x, labels, prior, spec)
            param[index] = original - step
            minus = total_loss(model, x, labels, prior, spec)
            param[index] = original
            numeric = (plus - minus) / (2 * step)
            assert grad[index] == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test_zero_upstream_gradient_gives_zero_gradients(rng):
    model = init_model(dims(), seed=6)
    result = forward(model, rng.normal(size=(3, 4)))
    grads = backward(model, result.cache, np.zeros_like(result.outputs))
    assert all(not np.any(g) for g in grads.arrays())


def test_duplicated_sample_doubles_gradient(rng):
    model = init_model(dims(), seed=7)
    x = rng.normal(size=(1, 4))
    upstream = rng.normal(size=(1, 4))
    single = backward(model, forward(model, x).cache, upstream)
    double = backward(model, forward(model, np.vstack([x, x])).cache, np.vstack([upstream, upstream]))
    assert all(np.allclose(2.0 * a, b, atol=1e-12) for a, b in zip(single.arrays(), double.arrays()))


def test_backward_rejects_stale_cache(rng):
    model = init_model(dims(), seed=8)
    other = init_model(dims(hidden=(6, 3)), seed=8)
    result = forward(model, rng.normal(size=(2, 4)))
    with pytest.raises(StaleCacheError):
        backward(other, result.cache, np.zeros((2, 4)))
    with pytest.raises(StaleCacheError):
        backward(model, result.cache, np.zeros((3, 4)))
