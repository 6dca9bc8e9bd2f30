"""Named-tensor binary container.

File layout (all integers little-endian):

    magic   4 bytes  b"SSVW"
    version u32
    count   u32
    count entries, each:
        name_len u16, name bytes (UTF-8), ndim u8, ndim * dims u32,
        data_offset u64 (absolute, from file start)
    data section: float32 LE payloads, each starting on an 8-byte boundary,
    zero padding between payloads.

The writer is canonical (entries in insertion order, payloads packed in the
same order), so write -> read -> write reproduces a file bit-exactly.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SSVW"
VERSION = 1

_HEAD = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_NDIM = struct.Struct("<B")
_DIM = struct.Struct("<I")
_OFFSET = struct.Struct("<Q")


def _align8(n: int) -> int:
    return (n + 7) & ~7


class TensorStore:
    """Insertion-ordered mapping of unique names to float32 arrays."""

    def __init__(self, tensors=None):
        self._tensors: dict[str, np.ndarray] = {}
        if tensors is not None:
            items = tensors.items() if hasattr(tensors, "items") else tensors
            for name, array in items:
                self[name] = array

    def __setitem__(self, name: str, array: np.ndarray) -> None:
        if not isinstance(name, str) or not name:
            raise ValueError("tensor name must be a non-empty string")
        if len(name.encode("utf-8")) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name!r}")
        if name in self._tensors:
            raise ValueError(f"duplicate tensor name {name!r}")
        array = np.asarray(array)
        if array.dtype != np.float32:
            raise TypeError(
                f"tensor {name!r}: container stores float32, got {array.dtype}")
        if array.ndim > 0xFF:
            raise ValueError(f"tensor {name!r}: too many dimensions")
        array = np.array(array, dtype=np.float32, order="C", copy=True)
        array.flags.writeable = False
        self._tensors[name] = array

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self):
        return iter(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def copy(self) -> "TensorStore":
        out = TensorStore()
        for name, array in self.items():
            out[name] = array.copy()
        return out

    # -- serialization ------------------------------------------------------

    def tobytes(self) -> bytes:
        entries = []
        header_len = _HEAD.size
        for name, array in self.items():
            name_bytes = name.encode("utf-8")
            header_len += (_NAME_LEN.size + len(name_bytes) + _NDIM.size
                           + _DIM.size * array.ndim + _OFFSET.size)
            entries.append((name_bytes, array))
        blob = bytearray()
        blob += _HEAD.pack(MAGIC, VERSION, len(entries))
        offsets = []
        cursor = header_len
        for _, array in entries:
            cursor = _align8(cursor)
            offsets.append(cursor)
            cursor += array.size * 4
        for (name_bytes, array), offset in zip(entries, offsets):
            blob += _NAME_LEN.pack(len(name_bytes))
            blob += name_bytes
            blob += _NDIM.pack(array.ndim)
            for dim in array.shape:
                blob += _DIM.pack(dim)
            blob += _OFFSET.pack(offset)
        for (_, array), offset in zip(entries, offsets):
            blob += b"\x00" * (offset - len(blob))
            blob += array.astype("<f4", copy=False).tobytes()
        return bytes(blob)

    @classmethod
    def frombytes(cls, data: bytes) -> "TensorStore":
        if len(data) < _HEAD.size:
            raise FormatError("tensor container truncated before header")
        magic, version, count = _HEAD.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        pos = _HEAD.size
        entries = []
        for _ in range(count):
            try:
                (name_len,) = _NAME_LEN.unpack_from(data, pos)
                pos += _NAME_LEN.size
                name = data[pos:pos + name_len].decode("utf-8")
                if len(data) < pos + name_len:
                    raise FormatError("tensor container truncated inside a name")
                pos += name_len
                (ndim,) = _NDIM.unpack_from(data, pos)
                pos += _NDIM.size
                shape = []
                for _ in range(ndim):
                    (dim,) = _DIM.unpack_from(data, pos)
                    pos += _DIM.size
                    shape.append(dim)
                (offset,) = _OFFSET.unpack_from(data, pos)
                pos += _OFFSET.size
            except (struct.error, UnicodeDecodeError) as exc:
                raise FormatError(f"tensor container header corrupt: {exc}") from exc
            entries.append((name, tuple(shape), offset))
        store = cls()
        for name, shape, offset in entries:
            n = int(np.prod(shape, dtype=np.int64)) if shape else 1
            nbytes = n * 4
            if offset % 8 != 0:
                raise FormatError(f"tensor {name!r}: offset {offset} not 8-byte aligned")
            if offset + nbytes > len(data):
                raise FormatError(f"tensor {name!r}: payload runs past end of file")
            payload = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
            try:
                store[name] = payload.reshape(shape).astype(np.float32, copy=True)
            except ValueError as exc:
                raise FormatError(str(exc)) from exc
        return store

    def save(self, path) -> None:
        Path(path).write_bytes(self.tobytes())

    @classmethod
    def load(cls, path) -> "TensorStore":
        return cls.frombytes(Path(path).read_bytes())

    def fingerprint(self) -> str:
        """SHA-256 of the serialized container."""
        return hashlib.sha256(self.tobytes()).hexdigest()
