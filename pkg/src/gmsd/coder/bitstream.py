"""Bitstream container: a fixed 32-byte header, the z segment, then the y segment.

Header layout (little-endian)::

    offset size field
         0    4 magic "GMSD"
         4    1 version (1)
         5    1 decoder mode: 0 mixed, 1 separate, 2 widened mixed
         6    1 K (mixture components)
         7    1 reserved, must be 0
         8    2 N (nominal)
        10    2 M (nominal)
        12    4 original width
        16    4 original height
        20    8 model hash (FNV-1a 64 of the checkpoint bytes)
        28    4 z segment length in bytes

The y segment runs from the end of the z segment to the end of the stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import DecodeError

MAGIC = b"GMSD"
VERSION = 1
HEADER = struct.Struct("<4sBBBBHHIIQI")
HEADER_SIZE = HEADER.size
MODE_CODES = {"mixed": 0, "separate": 1, "widened": 2}
MODE_NAMES = {v: k for k, v in MODE_CODES.items()}
# largest original extent accepted on decode; keeps hostile headers from allocating huge canvases
MAX_EXTENT = 1 << 15


@dataclass(frozen=True)
class Header:
    mode: str
    K: int
    N: int
    M: int
    width: int
    height: int
    model_hash: int
    z_length: int

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, MODE_CODES[self.mode], self.K, 0, self.N, self.M,
                           self.width, self.height, self.model_hash, self.z_length)


@dataclass(frozen=True)
class Bitstream:
    header: Header
    z_segment: bytes
    y_segment: bytes

    def to_bytes(self) -> bytes:
        return self.header.pack() + self.z_segment + self.y_segment

    @property
    def num_bits(self) -> int:
        return 8 * (HEADER_SIZE + len(self.z_segment) + len(self.y_segment))

    @property
    def bpp(self) -> float:
        """Total stream bits over the original (unpadded) pixel count."""
        return self.num_bits / (self.header.width * self.header.height)


def parse_bitstream(data: bytes) -> Bitstream:
    """Split raw bytes into header and segments, validating every header field."""
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise DecodeError(f"stream of {len(data)} bytes is shorter than the {HEADER_SIZE}-byte header",
                          offset=len(data))
    magic, version, mode, k, reserved, n, m, w, h, model_hash, z_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DecodeError("bad magic, not a GMSD bitstream", offset=0)
    if version != VERSION:
        raise DecodeError(f"unsupported bitstream version {version}", offset=4)
    if mode not in MODE_NAMES:
        raise DecodeError(f"unknown decoder mode code {mode}", offset=5)
    if reserved != 0:
        raise DecodeError("reserved header byte is not zero", offset=7)
    if not (1 <= w <= MAX_EXTENT and 1 <= h <= MAX_EXTENT):
        raise DecodeError(f"image extent {w}x{h} outside 1..{MAX_EXTENT}", offset=12)
    if z_len > len(data) - HEADER_SIZE:
        raise DecodeError(f"z segment length {z_len} exceeds the {len(data) - HEADER_SIZE} bytes present",
                          offset=28)
    header = Header(MODE_NAMES[mode], k, n, m, w, h, model_hash, z_len)
    z_end = HEADER_SIZE + z_len
    return Bitstream(header, data[HEADER_SIZE:z_end], data[z_end:])
