"""Shared fixtures"""
import gzip
import struct

import numpy as np
import pytest

from app.config import settings
from app.data.mnist import mnist_available
from app.models.layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Softmax
from app.models.network import ModelSpec
from app.sc.sobol import new_sobol


def pytest_collection_modifyitems(config, items):
    if mnist_available(settings.DATA_DIR):
        return
    skip = pytest.mark.skip(reason=f"MNIST files not found in {settings.DATA_DIR}")
    for item in items:
        if "mnist" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def gen():
    """Full 64-dimensional Sobol generator"""
    return new_sobol(64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def make_tiny_model(rng, dtype=np.float32, sc_config=None) -> ModelSpec:
    """conv(2x1x3x3) -> relu -> pool -> flatten -> dense(3x8) -> softmax on 1x6x6 inputs"""
    conv = Conv2D(
        rng.uniform(-0.5, 0.5, (2, 1, 3, 3)).astype(dtype),
        rng.uniform(-0.1, 0.1, 2).astype(dtype),
        sc_config=sc_config,
    )
    dense = Dense(rng.uniform(-0.5, 0.5, (3, 8)).astype(dtype), rng.uniform(-0.1, 0.1, 3).astype(dtype))
    return ModelSpec([conv, ReLU(), MaxPool2x2(), Flatten(), dense, Softmax()], (1, 6, 6), 3)


def make_linear_model() -> ModelSpec:
    """Class 0 sums the top half of a 1x6x6 image, class 1 the bottom half, class 2 is constant"""
    weight = np.zeros((3, 36), dtype=np.float32)
    weight[0, :18] = 1.0
    weight[1, 18:] = 1.0
    bias = np.array([0.0, 0.0, -100.0], dtype=np.float32)
    return ModelSpec([Flatten(), Dense(weight, bias), Softmax()], (1, 6, 6), 3)


@pytest.fixture
def tiny_model(rng):
    return make_tiny_model(rng)


@pytest.fixture
def linear_model():
    return make_linear_model()


def write_idx_images(path, images: np.ndarray, magic: int = 0x00000803, compress: bool = False) -> None:
    count, rows, cols = images.shape
    raw = struct.pack(">IIII", magic, count, rows, cols) + images.astype(np.uint8).tobytes()
    _write(path, raw, compress)


def write_idx_labels(path, labels: np.ndarray, magic: int = 0x00000801, compress: bool = False) -> None:
    raw = struct.pack(">II", magic, len(labels)) + np.asarray(labels, dtype=np.uint8).tobytes()
    _write(path, raw, compress)


def _write(path, raw: bytes, compress: bool) -> None:
    if compress:
        with gzip.open(path, "wb") as f:
            f.write(raw)
    else:
        path.write_bytes(raw)


@pytest.fixture
def mnist_dir(tmp_path):
    """Directory holding small synthetic train/test IDX files (20 and 12 images)"""
    data_rng = np.random.default_rng(7)
    for prefix, count in (("train", 20), ("t10k", 12)):
        images = data_rng.integers(0, 256, size=(count, 28, 28))
        labels = np.arange(count) % 10
        write_idx_images(tmp_path / f"{prefix}-images-idx3-ubyte", images)
        write_idx_labels(tmp_path / f"{prefix}-labels-idx1-ubyte", labels)
    return tmp_path
