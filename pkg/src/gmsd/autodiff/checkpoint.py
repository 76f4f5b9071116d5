"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic       8 bytes  b"GMSDCKPT"
    version     u32      1
    count       u32      number of parameter records
    record * count:
        name_len  u16
        name      UTF-8, name_len bytes
        rank      u8
        extents   u32 * rank
        values    f32 * prod(extents), row-major
    config_len  u32      length of the trailer (0 if absent)
    config      UTF-8 key=value text the model was built from
"""

from __future__ import annotations

import struct
from typing import Iterable

import numpy as np

from ..errors import FormatError

MAGIC = b"GMSDCKPT"
VERSION = 1


def dump_checkpoint(params: Iterable[tuple[str, np.ndarray]], config_text: str = "") -> bytes:
    items = list(params)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise FormatError("parameter names must be unique within a checkpoint")
    parts = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, arr in items:
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    cfg = config_text.encode("utf-8")
    parts.append(struct.pack("<I", len(cfg)))
    parts.append(cfg)
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"checkpoint truncated at byte {self.pos} (needed {n} more bytes)")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(buf: bytes) -> tuple[dict[str, np.ndarray], str]:
    """Parse checkpoint bytes into ``({name: float32 array}, config_text)``."""
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError("not a checkpoint (bad magic)")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"parameter name is not UTF-8 near byte {r.pos}") from exc
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I")
        n = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
        if name in params:
            raise FormatError(f"duplicate parameter {name!r}")
        params[name] = values.astype(np.float32)
    config = ""
    if r.pos < len(buf):
        (cfg_len,) = r.unpack("<I")
        config = r.take(cfg_len).decode("utf-8")
    return params, config


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = 0xCBF29CE484222325
    prime = 0x100000001B3
    mask = 0xFFFFFFFFFFFFFFFF
    for byte in data:
        h = ((h ^ byte) * prime) & mask
    return h
