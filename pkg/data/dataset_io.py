"""
Dataset files.

Binary layout (little endian):
    magic b"DBMLABDS" | uint32 version, C, D_in, N | int64 counts[C] | int64 labels[N] | float64 features[N*D_in]

CSV layout:
    # dbm-lab-dataset version=1 classes=C input_dim=D samples=N counts=n_0;n_1;...
    label,f_1,...,f_D
    <one row per sample>
"""

import json
import struct
from io import StringIO
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from data.dataset import LabeledDataset
from utils.exceptions import CountMismatchError, ParseError
from utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"DBMLABDS"
CSV_TAG = "# dbm-lab-dataset"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IIII")

PathLike = Union[str, Path]


def _validate_counts(declared: np.ndarray, labels: np.ndarray, num_classes: int) -> None:
    actual = np.bincount(labels, minlength=num_classes)
    if not np.array_equal(declared, actual):
        raise CountMismatchError(
            f"Header declares counts {declared.tolist()} but labels give {actual.tolist()}"
        )


def save_dataset(ds: LabeledDataset, path: PathLike, fmt: str = None) -> Path:
    """Write a dataset; the format follows the suffix (.csv) unless `fmt` is given."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "binary")
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = ds.class_counts.astype("<i8")

    if fmt == "binary":
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(_HEADER.pack(FORMAT_VERSION, ds.num_classes, ds.input_dim, len(ds)))
            f.write(counts.tobytes())
            f.write(ds.labels.astype("<i8").tobytes())
            f.write(ds.features.astype("<f8").tobytes())
    elif fmt == "csv":
        header = (
            f"{CSV_TAG} version={FORMAT_VERSION} classes={ds.num_classes} "
            f"input_dim={ds.input_dim} samples={len(ds)} counts={';'.join(str(c) for c in counts)}\n"
        )
        frame = pd.DataFrame(ds.features, columns=[f"f_{i + 1}" for i in range(ds.input_dim)])
        frame.insert(0, "label", ds.labels)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(header)
            frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    else:
        raise ValueError(f"Unknown dataset format {fmt!r}")

    logger.info(f"Saved {len(ds)} samples to {path} ({fmt})")
    return path


def _load_binary(raw: bytes, path: Path) -> LabeledDataset:
    offset = len(MAGIC)
    if len(raw) < offset + _HEADER.size:
        raise ParseError(f"{path}: truncated header", offset=len(raw))
    version, num_classes, input_dim, n = _HEADER.unpack_from(raw, offset)
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {version}", offset=offset)
    offset += _HEADER.size

    expected = offset + 8 * (num_classes + n + n * input_dim)
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, found {len(raw)}", offset=min(len(raw), expected))

    counts = np.frombuffer(raw, dtype="<i8", count=num_classes, offset=offset).astype(np.int64)
    offset += 8 * num_classes
    labels = np.frombuffer(raw, dtype="<i8", count=n, offset=offset).astype(np.int64)
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        raise ParseError(
            f"{path}: label {labels[bad[0]]} outside [0, {num_classes})",
            offset=offset + 8 * int(bad[0])
        )
    offset += 8 * n
    features = np.frombuffer(raw, dtype="<f8", count=n * input_dim, offset=offset)
    features = features.astype(np.float64).reshape(n, input_dim)

    _validate_counts(counts, labels, num_classes)
    return LabeledDataset(features, labels, num_classes, {"source": str(path)})


def _parse_csv_header(line: str, path: Path) -> dict:
    if not line.startswith(CSV_TAG):
        raise ParseError(f"{path}: missing dataset header", line=1)
    fields = {}
    for token in line[len(CSV_TAG):].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"{path}: malformed header token {token!r}", line=1)
        fields[key] = value
    try:
        header = {
            "version": int(fields["version"]),
            "classes": int(fields["classes"]),
            "input_dim": int(fields["input_dim"]),
            "samples": int(fields["samples"]),
            "counts": np.array([int(c) for c in fields["counts"].split(";") if c], dtype=np.int64),
        }
    except (KeyError, ValueError) as e:
        raise ParseError(f"{path}: invalid header ({e})", line=1) from e
    if header["version"] != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {header['version']}", line=1)
    return header


def _load_csv(text: str, path: Path) -> LabeledDataset:
    first_line, _, body = text.partition("\n")
    header = _parse_csv_header(first_line.rstrip("\r"), path)
    num_classes, input_dim = header["classes"], header["input_dim"]

    if not body.strip():
        frame = pd.DataFrame(columns=["label"] + [f"f_{i + 1}" for i in range(input_dim)])
    else:
        try:
            frame = pd.read_csv(StringIO(body), dtype=str, keep_default_na=False)
        except pd.errors.ParserError as e:
            raise ParseError(f"{path}: {e}") from e

    if frame.shape[1] != input_dim + 1:
        raise ParseError(f"{path}: expected {input_dim + 1} columns, found {frame.shape[1]}", line=2)

    values = frame.apply(pd.to_numeric, errors="coerce")
    bad_rows = np.flatnonzero(values.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        raise ParseError(f"{path}: non-numeric value", line=3 + int(bad_rows[0]))

    # numpy parses decimal strings with correct rounding, so %.17g text round-trips exactly
    exact = frame.to_numpy(dtype=str).astype(np.float64)
    raw_labels = exact[:, 0]
    labels = raw_labels.astype(np.int64)
    bad_rows = np.flatnonzero((labels != raw_labels) | (labels < 0) | (labels >= num_classes))
    if bad_rows.size:
        row = int(bad_rows[0])
        raise ParseError(f"{path}: label {raw_labels[row]} outside [0, {num_classes})", line=3 + row, offset=0)

    if labels.size != header["samples"]:
        raise CountMismatchError(f"{path}: header declares {header['samples']} samples, found {labels.size}")
    _validate_counts(header["counts"], labels, num_classes)

    features = exact[:, 1:].reshape(labels.size, input_dim)
    return LabeledDataset(features, labels, num_classes, {"source": str(path)})


def load_dataset(path: PathLike) -> LabeledDataset:
    """
    Read a binary or CSV dataset file.

    Raises:
        ParseError: malformed or empty file, labels out of range
        CountMismatchError: declared counts disagree with the labels
    """
    path = Path(path)
    raw = path.read_bytes()
    if not raw:
        raise ParseError(f"{path}: empty file", line=1, offset=0)
    if raw.startswith(MAGIC):
        ds = _load_binary(raw, path)
    else:
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"{path}: neither a binary dataset nor UTF-8 text", offset=e.start) from e
        ds = _load_csv(text, path)
    logger.info(f"Loaded {len(ds)} samples from {path}")
    return ds


def write_sidecar(ds: LabeledDataset, path: PathLike) -> Path:
    """Provenance JSON next to a dataset file."""
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    record = {
        "file": path.name,
        "num_classes": ds.num_classes,
        "input_dim": ds.input_dim,
        "samples": len(ds),
        "class_counts": ds.class_counts.tolist(),
        "provenance": ds.provenance,
    }
    sidecar.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar
