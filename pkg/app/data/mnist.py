"""MNIST ingestion from IDX files.

Image files (magic 0x00000803):
    [offset] [type]          [description]
    0000     32 bit integer  magic number (MSB first)
    0004     32 bit integer  number of images
    0008     32 bit integer  number of rows
    0012     32 bit integer  number of columns
    0016     unsigned byte   pixels, row-major

Label files (magic 0x00000801):
    0000     32 bit integer  magic number (MSB first)
    0004     32 bit integer  number of items
    0008     unsigned byte   labels

Files may be stored gzipped (``.gz``). Nothing is downloaded here: fetch the
four files into ``DATA_DIR`` beforehand.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from app.utils.errors import DataError, FormatError, LengthError, MissingArtifactError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
NUM_CLASSES = 10

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

FETCH_HINT = "download the MNIST IDX files from http://yann.lecun.com/exdb/mnist/ into DATA_DIR"


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, FETCH_HINT)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _check_magic(raw: bytes, expected: int, header_size: int, path: Path) -> None:
    if len(raw) < header_size:
        raise LengthError(f"{path}: {len(raw)} bytes is shorter than the {header_size}-byte IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected:
        raise FormatError(f"{path}: expected magic 0x{expected:08x}, found 0x{magic:08x}")


def load_idx_images(path) -> np.ndarray:
    """(count, rows, cols) float32 pixels scaled to [0, 1]"""
    raw = _read_bytes(path)
    _check_magic(raw, IMAGES_MAGIC, 16, path)
    _, count, rows, cols = struct.unpack(">IIII", raw[:16])
    expected = count * rows * cols
    payload = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if payload.size < expected:
        raise LengthError(f"{path}: header declares {expected} pixels, file holds {payload.size}")

    images = payload[:expected].reshape(count, rows, cols).astype(np.float32) / 255.0
    logger.debug(f"Loaded {count} images of {rows}x{cols} from {path}")
    return images


def load_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    _check_magic(raw, LABELS_MAGIC, 8, path)
    _, count = struct.unpack(">II", raw[:8])
    payload = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if payload.size < count:
        raise LengthError(f"{path}: header declares {count} labels, file holds {payload.size}")

    labels = payload[:count].astype(np.int64)
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise DataError(f"{path}: label {labels[bad]} at index {bad} is not a digit class")
    logger.debug(f"Loaded {count} labels from {path}")
    return labels


@dataclass(frozen=True)
class LabeledDataset:
    images: np.ndarray  # (N, 1, 28, 28) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise DataError("Labels must lie in [0, 10)")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("Pixels must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, count: Optional[int], start: int = 0) -> "LabeledDataset":
        stop = None if count is None else start + count
        return LabeledDataset(self.images[start:stop], self.labels[start:stop])


def _resolve(data_dir: Path, name: str) -> Path:
    for candidate in (data_dir / name, data_dir / f"{name}.gz"):
        if candidate.exists():
            return candidate
    raise MissingArtifactError(data_dir / name, FETCH_HINT)


def load_mnist(data_dir, split: str = "train") -> LabeledDataset:
    """The train (60000) or test (10000) split as a LabeledDataset"""
    if split not in SPLIT_FILES:
        raise ValueError(f"Unknown MNIST split '{split}'")
    data_dir = Path(data_dir)
    images_name, labels_name = SPLIT_FILES[split]

    images = load_idx_images(_resolve(data_dir, images_name))
    labels = load_idx_labels(_resolve(data_dir, labels_name))
    if len(images) != len(labels):
        raise DataError(f"{split}: {len(images)} images but {len(labels)} labels")

    logger.info(f"Loaded MNIST {split} split: {len(labels)} examples from {data_dir}")
    return LabeledDataset(images[:, None, :, :], labels)


def mnist_available(data_dir) -> bool:
    data_dir = Path(data_dir)
    return all(
        (data_dir / name).exists() or (data_dir / f"{name}.gz").exists()
        for pair in SPLIT_FILES.values()
        for name in pair
    )
