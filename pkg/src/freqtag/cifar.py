"""CIFAR-10 binary batch reader/writer.

Batch files are a flat run of 3073-byte records: 1 label byte (0..9) followed
by 3072 pixel bytes (1024 R, 1024 G, 1024 B, row-major 32x32). Pixels decode
to floats in [0, 1] as byte/255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError

IMAGE_SIZE = 32
CHANNELS = 3
PIXEL_BYTES = IMAGE_SIZE * IMAGE_SIZE * CHANNELS
RECORD_BYTES = 1 + PIXEL_BYTES
NUM_CLASSES = 10


def record_count(path) -> int:
    size = Path(path).stat().st_size
    if size == 0 or size % RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: size {size} is not a positive multiple of {RECORD_BYTES}")
    return size // RECORD_BYTES


def load_cifar10(path, indices=None) -> list[tuple[np.ndarray, int]]:
    """Decode selected records to (image, label) pairs.

    indices=None loads every record in file order. Images come back as
    (32, 32, 3) float64 arrays in [0, 1].
    """
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: size {len(data)} is not a positive multiple of "
            f"{RECORD_BYTES} (truncated or not a CIFAR-10 batch)")
    n = len(data) // RECORD_BYTES
    if indices is None:
        indices = range(n)
    out = []
    for idx in indices:
        idx = int(idx)
        if not 0 <= idx < n:
            raise FormatError(f"record index {idx} out of range (file has {n})")
        rec = data[idx * RECORD_BYTES:(idx + 1) * RECORD_BYTES]
        label = rec[0]
        if label >= NUM_CLASSES:
            raise FormatError(f"record {idx}: label {label} is not a CIFAR-10 class")
        pixels = np.frombuffer(rec, dtype=np.uint8, count=PIXEL_BYTES, offset=1)
        img = pixels.reshape(CHANNELS, IMAGE_SIZE, IMAGE_SIZE)
        img = img.transpose(1, 2, 0).astype(np.float64) / 255.0
        out.append((img, int(label)))
    return out


def write_cifar10(path, images, labels) -> None:
    """Encode (32, 32, 3) float images in [0,1] and labels into a batch file."""
    images = list(images)
    labels = list(labels)
    if len(images) != len(labels):
        raise ValueError("images and labels differ in length")
    chunks = []
    for img, label in zip(images, labels):
        img = np.asarray(img)
        if img.shape != (IMAGE_SIZE, IMAGE_SIZE, CHANNELS):
            raise ValueError(f"image must be (32, 32, 3), got {img.shape}")
        if not 0 <= int(label) < NUM_CLASSES:
            raise ValueError(f"label {label} is not a CIFAR-10 class")
        if img.dtype == np.uint8:
            quantized = img
        else:
            quantized = np.floor(img * 255.0 + 0.5).astype(np.uint8)
        chunks.append(bytes([int(label)]))
        chunks.append(quantized.transpose(2, 0, 1).tobytes())
    Path(path).write_bytes(b"".join(chunks))
