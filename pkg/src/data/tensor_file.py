"""Flat binary tensor files.

Single tensor: 16-byte header ``<4s magic "FSRT"><u32 dtype><u32 rank><u32 reserved>``,
``rank`` u32 dimensions, then the little-endian payload.
Named container: ``<4s magic "FSRN"><u32 version><u32 count><u32 reserved>``,
then per entry ``<u32 name bytes><utf-8 name>`` followed by a single-tensor record.
"""

from __future__ import annotations

import io
import shutil
import struct
from pathlib import Path
from typing import BinaryIO, Mapping

import numpy as np

from src.errors import DatasetError

TENSOR_MAGIC = b"FSRT"
CONTAINER_MAGIC = b"FSRN"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<4sIII")
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("int64"): 3}


def _write_tensor(stream: BinaryIO, array: np.ndarray) -> None:
    array = np.asarray(array)
    code = _CODES.get(array.dtype)
    if code is None:
        raise DatasetError(f"unsupported tensor dtype {array.dtype}")
    stream.write(_HEADER.pack(TENSOR_MAGIC, code, array.ndim, 0))
    stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
    stream.write(np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes())


def _read_exact(stream: BinaryIO, n: int, source: Path | str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise DatasetError("truncated tensor file", source)
    return data


def _read_tensor(stream: BinaryIO, source: Path | str) -> np.ndarray:
    magic, code, rank, _ = _HEADER.unpack(_read_exact(stream, _HEADER.size, source))
    if magic != TENSOR_MAGIC:
        raise DatasetError(f"bad tensor magic {magic!r}", source)
    if code not in _DTYPES:
        raise DatasetError(f"unknown dtype code {code}", source)
    shape = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank, source))
    dtype = _DTYPES[code]
    count = int(np.prod(shape)) if rank else 1
    payload = _read_exact(stream, count * dtype.itemsize, source)
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_bytes(payload)
        shutil.move(str(tmp), str(path))
    except OSError as exc:
        raise DatasetError(f"cannot write tensor file: {exc}", path) from exc


def save_tensor(path: Path | str, array: np.ndarray) -> None:
    buffer = io.BytesIO()
    _write_tensor(buffer, array)
    _atomic_write(Path(path), buffer.getvalue())


def load_tensor(path: Path | str) -> np.ndarray:
    path = Path(path)
    try:
        with path.open("rb") as stream:
            return _read_tensor(stream, path)
    except DatasetError:
        raise
    except OSError as exc:
        raise DatasetError(f"cannot read tensor file: {exc}", path) from exc


def save_named(path: Path | str, tensors: Mapping[str, np.ndarray]) -> None:
    """Entries are written in sorted name order so the bytes depend only on the content."""
    buffer = io.BytesIO()
    buffer.write(_HEADER.pack(CONTAINER_MAGIC, CONTAINER_VERSION, len(tensors), 0))
    for name in sorted(tensors):
        encoded = name.encode("utf-8")
        buffer.write(struct.pack("<I", len(encoded)))
        buffer.write(encoded)
        _write_tensor(buffer, tensors[name])
    _atomic_write(Path(path), buffer.getvalue())


def load_named(path: Path | str) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with path.open("rb") as stream:
            magic, version, count, _ = _HEADER.unpack(_read_exact(stream, _HEADER.size, path))
            if magic != CONTAINER_MAGIC:
                raise DatasetError(f"bad container magic {magic!r}", path)
            if version != CONTAINER_VERSION:
                raise DatasetError(f"unsupported container version {version}", path)
            out = {}
            for _ in range(count):
                (length,) = struct.unpack("<I", _read_exact(stream, 4, path))
                name = _read_exact(stream, length, path).decode("utf-8")
                out[name] = _read_tensor(stream, path)
            return out
    except DatasetError:
        raise
    except OSError as exc:
        raise DatasetError(f"cannot read tensor container: {exc}", path) from exc
