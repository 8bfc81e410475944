"""SCNN weight files.

    magic      4 bytes  b"SCNN"
    version    u16
    layers     u16
    per layer:
      kind     u8       (see KIND_TAGS)
      rank     u8       0 for parameter-free layers
      dims     u32 x rank
      weight   f32 x prod(dims)
      bias     f32 x dims[0]    (only when rank > 0)

All integers and floats are little-endian. Stride and padding are part of
the architecture, so a file is loaded into a freshly built model whose
layer kinds and shapes must match it.
"""

import struct
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from app.models.layers import LayerKind
from app.models.network import ModelSpec, build_lenet5
from app.utils.errors import FormatError, LengthError, MissingArtifactError

MAGIC = b"SCNN"
VERSION = 1

KIND_TAGS = {
    LayerKind.CONV2D: 1,
    LayerKind.MAXPOOL2X2: 2,
    LayerKind.DENSE: 3,
    LayerKind.RELU: 4,
    LayerKind.SOFTMAX: 5,
    LayerKind.FLATTEN: 6,
}
TAG_KINDS = {tag: kind for kind, tag in KIND_TAGS.items()}

LayerBlob = Tuple[LayerKind, Optional[np.ndarray], Optional[np.ndarray]]


def serialize_weights(model: ModelSpec) -> bytes:
    chunks = [MAGIC, struct.pack("<HH", VERSION, len(model.layers))]
    for layer in model.layers:
        params = layer.params()
        weight = params.get("weight")
        if weight is None:
            chunks.append(struct.pack("<BB", KIND_TAGS[layer.kind], 0))
            continue
        chunks.append(struct.pack("<BB", KIND_TAGS[layer.kind], weight.ndim))
        chunks.append(struct.pack(f"<{weight.ndim}I", *weight.shape))
        chunks.append(np.ascontiguousarray(weight, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(params["bias"], dtype="<f4").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, raw: bytes, source: str):
        self.raw = raw
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.raw):
            raise LengthError(
                f"{self.source}: truncated at byte {self.offset} (needed {size} more bytes)"
            )
        chunk = self.raw[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)


def parse_weights(raw: bytes, source: str = "<bytes>") -> List[LayerBlob]:
    reader = _Reader(raw, source)
    magic = reader.take(4)
    if magic != MAGIC:
        raise FormatError(f"{source}: expected magic {MAGIC!r}, found {magic!r}")
    version, count = reader.unpack("<HH")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported weight file version {version}")

    blobs: List[LayerBlob] = []
    for _ in range(count):
        tag, rank = reader.unpack("<BB")
        if tag not in TAG_KINDS:
            raise FormatError(f"{source}: unknown layer kind tag {tag}")
        if rank == 0:
            blobs.append((TAG_KINDS[tag], None, None))
            continue
        dims = reader.unpack(f"<{rank}I")
        weight = reader.floats(int(np.prod(dims))).reshape(dims)
        bias = reader.floats(dims[0])
        blobs.append((TAG_KINDS[tag], weight, bias))
    if reader.offset != len(raw):
        raise FormatError(f"{source}: {len(raw) - reader.offset} trailing bytes after the last layer")
    return blobs


def save_weights(model: ModelSpec, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(serialize_weights(model))
        logger.info(f"Saved {model.parameter_count()} parameters to {path}")
        return path
    except OSError as e:
        logger.error(f"Failed to save weights to {path}: {e}")
        raise


def load_weights(path, template: Optional[ModelSpec] = None) -> ModelSpec:
    """Fill ``template`` (default: a fresh LeNet-5) with the parameters stored at ``path``"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "python -m app.main train")
    template = template or build_lenet5()
    blobs = parse_weights(path.read_bytes(), str(path))

    if len(blobs) != len(template.layers):
        raise FormatError(f"{path}: {len(blobs)} layers stored, model has {len(template.layers)}")
    params = []
    for index, (layer, (kind, weight, bias)) in enumerate(zip(template.layers, blobs)):
        if kind != layer.kind:
            raise FormatError(f"{path}: layer {index} is {kind.value}, model expects {layer.kind.value}")
        expected = layer.params()
        if weight is None:
            if expected:
                raise FormatError(f"{path}: layer {index} ({kind.value}) is missing its parameters")
            params.append({})
            continue
        if weight.shape != expected["weight"].shape:
            raise FormatError(
                f"{path}: layer {index} weight shape {weight.shape}, expected {expected['weight'].shape}"
            )
        params.append({"weight": weight, "bias": bias})

    model = template.with_params(params)
    logger.info(f"Loaded {model.parameter_count()} parameters from {path}")
    return model
