"""Portable binary weight files.

Layout (all integers little-endian):
    magic   4 bytes  "HWDW"
    version u32      (1 = weights paired with [-1,1] pixel normalization)
    entries, each:
        u16   name length
        ...   UTF-8 name
        u8    rank
        u32*rank dims
        f32*prod(dims) payload (IEEE-754 binary32, little-endian)
    crc32   u32 of all preceding bytes

Round trips are bit-exact; loads validate magic, CRC, and the exact
name/shape set of the target architecture.
"""

import struct
import zlib

import numpy as np

from .errors import (
    BadChecksum,
    BadMagic,
    ExtraEntry,
    MissingEntry,
    ShapeMismatch,
    TruncatedFile,
)

MAGIC = b"HWDW"
VERSION = 1


def save_weights(spec, params, path):
    """Write params (entry order = spec parameter order) to a weight file."""
    shapes = spec.param_shapes()
    missing = set(shapes) - set(params)
    if missing:
        raise MissingEntry(f"params missing entries: {sorted(missing)}")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    for name, shape in shapes.items():
        arr = np.ascontiguousarray(params[name], dtype=np.float32)
        if arr.shape != shape:
            raise ShapeMismatch(f"{name}: have {arr.shape}, spec wants {shape}")
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb))
        out += nb
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.astype("<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(out))


def _read_entries(body):
    pos = 0
    entries = {}
    n = len(body)
    while pos < n:
        if pos + 2 > n:
            raise TruncatedFile(f"entry header truncated at byte {pos}")
        (nlen,) = struct.unpack_from("<H", body, pos)
        pos += 2
        if pos + nlen + 1 > n:
            raise TruncatedFile(f"entry name truncated at byte {pos}")
        name = body[pos : pos + nlen].decode("utf-8")
        pos += nlen
        rank = body[pos]
        pos += 1
        if pos + 4 * rank > n:
            raise TruncatedFile(f"dims of {name!r} truncated at byte {pos}")
        dims = struct.unpack_from(f"<{rank}I", body, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        if pos + 4 * count > n:
            raise TruncatedFile(f"payload of {name!r} truncated at byte {pos}")
        arr = np.frombuffer(body, dtype="<f4", count=count, offset=pos)
        pos += 4 * count
        entries[name] = arr.reshape(dims).astype(np.float32)
    return entries


def _read_validated(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12:
        raise TruncatedFile(f"file is only {len(raw)} bytes")
    if raw[:4] != MAGIC:
        raise BadMagic(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    actual = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual:
        raise BadChecksum(f"crc mismatch: stored {stored_crc:#x}, computed {actual:#x}")
    return _read_entries(raw[8:-4])


def read_entry_shapes(path):
    """{name: shape} of a weight file, after magic/CRC validation."""
    return {name: arr.shape for name, arr in _read_validated(path).items()}


def load_weights(spec, path):
    """Load and validate a weight file against an architecture spec."""
    entries = _read_validated(path)
    shapes = spec.param_shapes()
    for name, shape in shapes.items():
        if name not in entries:
            raise MissingEntry(f"weight file lacks entry {name!r}")
        if entries[name].shape != shape:
            raise ShapeMismatch(
                f"{name}: file has {entries[name].shape}, spec wants {shape}"
            )
    extra = set(entries) - set(shapes)
    if extra:
        raise ExtraEntry(f"unexpected entries: {sorted(extra)}")
    return {name: entries[name] for name in shapes}
