"""Flat binary record files for arrays and named-array bundles.

A record is a dimension header followed by raw little-endian data:

    magic b"SPAR" | u16 version | u8 dtype code | u8 ndim | u64 shape... | data

A bundle is a sequence of named records:

    magic b"SPBN" | u16 version | u32 count | (u16 name_len | name utf-8 | record)*

Entries are written in sorted name order so that two bundles holding equal
arrays are byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

RECORD_MAGIC = b"SPAR"
BUNDLE_MAGIC = b"SPBN"
FORMAT_VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("<f8"): 1,
    np.dtype("<i4"): 2,
    np.dtype("<i8"): 3,
    np.dtype("u1"): 4,
    np.dtype("<u8"): 5,
    np.dtype("<i2"): 6,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def _pack_array(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, order="C")  # keeps 0-d arrays 0-d
    dt = arr.dtype.newbyteorder("<")
    if dt not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype for record: {arr.dtype}")
    header = RECORD_MAGIC + struct.pack(
        "<HBB", FORMAT_VERSION, _DTYPE_CODES[dt], arr.ndim
    )
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return header + arr.astype(dt, copy=False).tobytes()


def _unpack_array(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    if buf[offset : offset + 4] != RECORD_MAGIC:
        raise ValueError("not an array record (bad magic)")
    version, code, ndim = struct.unpack_from("<HBB", buf, offset + 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported record version {version}")
    pos = offset + 8
    shape = struct.unpack_from(f"<{ndim}Q", buf, pos) if ndim else ()
    pos += 8 * ndim
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    nbytes = count * dtype.itemsize
    arr = np.frombuffer(buf[pos : pos + nbytes], dtype=dtype).reshape(shape).copy()
    return arr, pos + nbytes


def write_array(path, arr) -> None:
    Path(path).write_bytes(_pack_array(np.asarray(arr)))


def read_array(path) -> np.ndarray:
    arr, _ = _unpack_array(Path(path).read_bytes())
    return arr


def write_bundle(path, entries: dict[str, np.ndarray]) -> None:
    parts = [BUNDLE_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(entries))]
    for name in sorted(entries):
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(_pack_array(np.asarray(entries[name])))
    Path(path).write_bytes(b"".join(parts))


def read_bundle(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != BUNDLE_MAGIC:
        raise ValueError(f"{path}: not a bundle file (bad magic)")
    version, count = struct.unpack_from("<HI", buf, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported bundle version {version}")
    pos = 10
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + name_len].decode("utf-8")
        pos += name_len
        out[name], pos = _unpack_array(buf, pos)
    return out


def str_to_array(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).copy()


def array_to_str(arr: np.ndarray) -> str:
    return arr.tobytes().decode("utf-8")
