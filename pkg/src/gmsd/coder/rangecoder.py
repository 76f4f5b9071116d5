"""Byte-oriented range coder over 16-bit integer CDFs.

The encoder keeps a 64-bit ``low`` and a 32-bit ``range``; carries out of
``low`` are resolved through one cached byte plus a run of pending 0xFF
bytes, so output is emitted strictly in order without backtracking. The
first byte the carry logic produces is always zero (the interval starts
inside [0, 2^32)), so it is not stored.
"""

from __future__ import annotations

import numpy as np

from ..errors import DecodeError, GmsdError

TOP = 1 << 24
MASK32 = 0xFFFFFFFF


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self._finished = False

    def _shift_low(self) -> None:
        if self.low < 0xFF000000 or self.low > MASK32:
            carry = self.low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (self.low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, start: int, size: int, precision: int = 16) -> None:
        """Code the interval ``[start, start + size)`` out of ``2**precision``."""
        if size <= 0 or start < 0 or start + size > (1 << precision):
            raise GmsdError(f"internal: invalid coding interval start={start} size={size}")
        r = self.range >> precision
        self.low += r * start
        self.range = r * size
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def encode_symbol(self, symbol: int, cdf: np.ndarray, s_min: int, precision: int = 16) -> None:
        idx = symbol - s_min
        if idx < 0 or idx >= len(cdf) - 1:
            raise GmsdError(f"internal: symbol {symbol} outside table alphabet")
        lo = int(cdf[idx])
        self.encode(lo, int(cdf[idx + 1]) - lo, precision)

    def finish(self) -> bytes:
        if not self._finished:
            for _ in range(5):
                self._shift_low()
            self._finished = True
        return bytes(self._out[1:])


class RangeDecoder:
    """Mirror of :class:`RangeEncoder`; ``base_offset`` only labels error offsets.

    A well-formed segment is consumed exactly: reading past its end, or
    finishing with bytes left over (see :meth:`finish`), is a decode error.
    """

    def __init__(self, data: bytes, base_offset: int = 0):
        self._data = data
        self._pos = 0
        self._base = base_offset
        self.range = MASK32
        self.code = 0
        for _ in range(4):
            self.code = (self.code << 8) | self._next_byte()

    @property
    def position(self) -> int:
        return self._pos

    def _next_byte(self) -> int:
        pos = self._pos
        self._pos += 1
        if pos >= len(self._data):
            raise DecodeError("range-coded segment is truncated", offset=self._base + len(self._data))
        return self._data[pos]

    def decode_symbol(self, cdf: np.ndarray, s_min: int, precision: int = 16) -> int:
        r = self.range >> precision
        value = self.code // r
        if value >= (1 << precision):
            raise DecodeError("range-coded segment is corrupt", offset=self._base + min(self._pos, len(self._data)))
        idx = int(np.searchsorted(cdf, value, side="right")) - 1
        lo, hi = int(cdf[idx]), int(cdf[idx + 1])
        self.code -= r * lo
        self.range = r * (hi - lo)
        while self.range < TOP:
            self.range <<= 8
            self.code = ((self.code << 8) | self._next_byte()) & MASK32
        return idx + s_min

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} unread bytes after the last symbol",
                              offset=self._base + self._pos)


def encode_symbols(symbols, cdfs: np.ndarray, s_min: int, precision: int = 16) -> bytes:
    """Code ``symbols[i]`` under ``cdfs[i]`` (or one shared ``cdf`` row)."""
    enc = RangeEncoder()
    cdfs = np.asarray(cdfs)
    shared = cdfs.ndim == 1
    for i, s in enumerate(symbols):
        enc.encode_symbol(int(s), cdfs if shared else cdfs[i], s_min, precision)
    return enc.finish()


def decode_symbols(data: bytes, count: int, cdfs: np.ndarray, s_min: int, precision: int = 16) -> list[int]:
    dec = RangeDecoder(data)
    cdfs = np.asarray(cdfs)
    shared = cdfs.ndim == 1
    out = [dec.decode_symbol(cdfs if shared else cdfs[i], s_min, precision) for i in range(count)]
    dec.finish()
    return out
