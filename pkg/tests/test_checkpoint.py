import numpy as np
import pytest

from losses.config import HeadKind
from losses.variants import resolve_variant
from network.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from network.config import ModelDims, TrainConfig
from network.model import forward, init_model
from utils.exceptions import CheckpointError


def make_model(head, seed=0):
    dims = ModelDims(input_dim=5, hidden_dims=[7, 4], num_classes=3, head=head)
    return init_model(dims, seed=seed, scale=24.0)


@pytest.mark.parametrize("head", list(HeadKind))
def test_round_trip_is_bit_exact(tmp_path, rng, head):
    model = make_model(head)
    cfg = TrainConfig(epochs=4, warmup_epochs=1, loss=resolve_variant("dbm-bs").spec, seed=9)
    path = save_checkpoint(tmp_path / "model.bin", model, cfg, train_counts=np.array([30, 9, 3]))

    restored = load_checkpoint(path)
    assert restored.model.dims == model.dims
    assert type(restored.model.head) is type(model.head)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(model.arrays(), restored.model.arrays()))
    assert restored.train_config == cfg
    assert restored.train_counts == [30, 9, 3]

    x = rng.normal(size=(4, 5))
    assert np.array_equal(forward(model, x).outputs, forward(restored.model, x).outputs)


def test_identical_models_give_identical_files(tmp_path):
    first = save_checkpoint(tmp_path / "a.bin", make_model(HeadKind.COSINE, seed=3)).read_bytes()
    second = save_checkpoint(tmp_path / "b.bin", make_model(HeadKind.COSINE, seed=3)).read_bytes()
    assert first == second


def test_optional_metadata_may_be_absent(tmp_path):
    restored = load_checkpoint(save_checkpoint(tmp_path / "m.bin", make_model(HeadKind.LINEAR)))
    assert restored.train_config is None
    assert restored.train_counts is None


def test_rejects_damaged_files(tmp_path):
    raw = save_checkpoint(tmp_path / "m.bin", make_model(HeadKind.COSINE)).read_bytes()

    cases = {
        "truncated.bin": raw[:-8],
        "padded.bin": raw + b"\0" * 8,
        "magic.bin": b"X" + raw[1:],
        "metadata.bin": raw[:len(MAGIC) + 4] + b"!" + raw[len(MAGIC) + 5:],
        "empty.bin": b"",
    }
    for name, content in cases.items():
        path = tmp_path / name
        path.write_bytes(content)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.bin")
