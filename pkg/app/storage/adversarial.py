"""SCAE adversarial-set files.

    magic      4 bytes  b"SCAE"
    version    u16
    count      u32
    per record (3143 bytes):
      true_label  u8
      target      u8
      success     u8
      l2          f32
      pixels      f32 x 784

Little-endian throughout.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
from loguru import logger

from app.utils.errors import FormatError, LengthError, MissingArtifactError

MAGIC = b"SCAE"
VERSION = 1
IMAGE_SHAPE = (1, 28, 28)
HEADER = struct.Struct("<4sHI")

RECORD_DTYPE = np.dtype(
    [
        ("true_label", "u1"),
        ("target", "u1"),
        ("success", "u1"),
        ("l2", "<f4"),
        ("pixels", "<f4", (int(np.prod(IMAGE_SHAPE)),)),
    ]
)


@dataclass(frozen=True)
class AdversarialRecord:
    true_label: int
    target: int
    success: bool
    l2: float
    pixels: np.ndarray  # (1, 28, 28) float32


def serialize_adversarial_set(records: Sequence[AdversarialRecord]) -> bytes:
    table = np.zeros(len(records), dtype=RECORD_DTYPE)
    for i, record in enumerate(records):
        if record.pixels.size != RECORD_DTYPE["pixels"].shape[0]:
            raise FormatError(f"Record {i} has {record.pixels.size} pixels, expected 784")
        table[i] = (
            record.true_label,
            record.target,
            int(bool(record.success)),
            record.l2,
            record.pixels.reshape(-1),
        )
    return HEADER.pack(MAGIC, VERSION, len(records)) + table.tobytes()


def parse_adversarial_set(raw: bytes, source: str = "<bytes>") -> List[AdversarialRecord]:
    if len(raw) < HEADER.size:
        raise LengthError(f"{source}: {len(raw)} bytes is shorter than the SCAE header")
    magic, version, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{source}: expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported adversarial set version {version}")
    expected = HEADER.size + count * RECORD_DTYPE.itemsize
    if len(raw) != expected:
        raise LengthError(f"{source}: header declares {count} records ({expected} bytes), file has {len(raw)}")

    table = np.frombuffer(raw, dtype=RECORD_DTYPE, count=count, offset=HEADER.size)
    return [
        AdversarialRecord(
            true_label=int(row["true_label"]),
            target=int(row["target"]),
            success=bool(row["success"]),
            l2=float(row["l2"]),
            pixels=row["pixels"].astype(np.float32).reshape(IMAGE_SHAPE),
        )
        for row in table
    ]


def save_adversarial_set(records: Sequence[AdversarialRecord], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(serialize_adversarial_set(records))
        logger.info(f"Saved {len(records)} adversarial records to {path}")
        return path
    except OSError as e:
        logger.error(f"Failed to save adversarial set to {path}: {e}")
        raise


def load_adversarial_set(path) -> List[AdversarialRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "python -m app.main attack")
    records = parse_adversarial_set(path.read_bytes(), str(path))
    logger.info(f"Loaded {len(records)} adversarial records from {path}")
    return records
