"""
Model checkpoints.

Layout (little endian):
    magic b"DBMLABCK" | uint32 metadata length | metadata JSON (utf-8) | float64 arrays in ModelParams.arrays() order

The metadata records the format version, ModelDims, the cosine head scale,
the TrainConfig and the training class counts. Array shapes are derived
from ModelDims, so identical models give byte-identical files.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError

from core.numerics import CosineHead, LinearHead
from losses.config import HeadKind
from network.config import ModelDims, TrainConfig
from network.model import DenseLayer, ModelParams
from utils.exceptions import CheckpointError
from utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"DBMLABCK"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    model: ModelParams
    train_config: Optional[TrainConfig] = None
    train_counts: Optional[List[int]] = None


def _array_shapes(dims: ModelDims) -> List[tuple]:
    shapes = []
    fan_in = dims.input_dim
    for width in dims.hidden_dims:
        shapes.extend([(width, fan_in), (width,)])
        fan_in = width
    shapes.append((dims.num_classes, dims.feature_dim))
    if dims.head == HeadKind.LINEAR:
        shapes.append((dims.num_classes,))
    return shapes


def save_checkpoint(
        path: PathLike,
        model: ModelParams,
        train_config: Optional[TrainConfig] = None,
        train_counts=None
) -> Path:
    path = Path(path)
    metadata = {
        "version": FORMAT_VERSION,
        "dims": model.dims.model_dump(mode="json"),
        "scale": model.head.scale if isinstance(model.head, CosineHead) else None,
        "train_config": train_config.model_dump(mode="json") if train_config is not None else None,
        "train_counts": None if train_counts is None else [int(n) for n in train_counts],
    }
    header = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(_LENGTH.pack(len(header)))
            f.write(header)
            for array in model.arrays():
                f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    except OSError as e:
        logger.error(f"Failed to write checkpoint {path}: {e}")
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e

    logger.info(f"Saved checkpoint to {path} ({model.num_parameters()} parameters)")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint; doubles round-trip bit-exactly.

    Raises:
        CheckpointError: unreadable, truncated or inconsistent file
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        logger.error(f"Failed to read checkpoint {path}: {e}")
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    if not raw.startswith(MAGIC) or len(raw) < len(MAGIC) + _LENGTH.size:
        raise CheckpointError(f"{path} is not a checkpoint file")
    offset = len(MAGIC)
    (length,) = _LENGTH.unpack_from(raw, offset)
    offset += _LENGTH.size

    try:
        metadata = json.loads(raw[offset:offset + length].decode("utf-8"))
        if metadata.get("version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {metadata.get('version')}")
        dims = ModelDims.model_validate(metadata["dims"]).check()
        train_config = metadata.get("train_config")
        train_config = TrainConfig.model_validate(train_config) if train_config is not None else None
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, ValidationError) as e:
        logger.error(f"Corrupt checkpoint metadata in {path}: {e}")
        raise CheckpointError(f"{path}: corrupt metadata ({e})") from e
    offset += length

    shapes = _array_shapes(dims)
    expected = offset + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(raw)}")

    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape))
        offset += 8 * count

    layers = [DenseLayer(weights=arrays[2 * i], biases=arrays[2 * i + 1]) for i in range(len(dims.hidden_dims))]
    rest = arrays[2 * len(dims.hidden_dims):]
    if dims.head == HeadKind.COSINE:
        if metadata.get("scale") is None:
            raise CheckpointError(f"{path}: cosine head without a scale")
        head = CosineHead(weights=rest[0], scale=float(metadata["scale"]))
    else:
        head = LinearHead(weights=rest[0], biases=rest[1])

    logger.info(f"Loaded checkpoint {path}")
    return Checkpoint(
        model=ModelParams(dims=dims, layers=layers, head=head),
        train_config=train_config,
        train_counts=metadata.get("train_counts"),
    )
