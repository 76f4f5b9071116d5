"""Binary PPM (P6) / PGM (P5) reading and writing, and padding to the codec grid.

Images travel through the library as float arrays ``(3, H, W)`` in [0, 1];
grayscale files are replicated to three channels on read.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError

IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm")


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out, pos, n = [], 0, len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        out.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def decode_pnm(data: bytes) -> np.ndarray:
    """Parse P5/P6 bytes into a uint8 array ``(3, H, W)``."""
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError("not a binary PPM/PGM file (expected P5 or P6 magic)")
    (magic, w, h, maxval), pos = _tokens(data, 4)
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("malformed PNM header") from None
    if width < 1 or height < 1:
        raise FormatError(f"invalid image extent {width}x{height}")
    if maxval != 255:
        raise FormatError(f"only 8-bit PNM is supported (maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raster = data[pos:pos + need]
    if len(raster) != need:
        raise FormatError(f"PNM raster truncated: {len(raster)} of {need} bytes")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels).transpose(2, 0, 1)
    if channels == 1:
        img = np.repeat(img, 3, axis=0)
    return np.ascontiguousarray(img)


def encode_ppm(img: np.ndarray) -> bytes:
    """uint8 ``(3, H, W)`` (or ``(1, H, W)`` for PGM) to P6/P5 bytes."""
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[0] not in (1, 3):
        raise FormatError(f"expected uint8 (3, H, W) or (1, H, W), got {img.dtype} {img.shape}")
    magic = b"P6" if img.shape[0] == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, img.shape[2], img.shape[1])
    return header + np.ascontiguousarray(img.transpose(1, 2, 0)).tobytes()


def read_image(path) -> np.ndarray:
    return decode_pnm(Path(path).read_bytes())


def write_image(path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(img))


def to_float(img: np.ndarray) -> np.ndarray:
    if img.dtype != np.uint8:
        raise FormatError(f"expected an 8-bit image, got dtype {img.dtype}")
    return img.astype(np.float64) / 255.0


def to_uint8(x: np.ndarray) -> np.ndarray:
    # round half up; inputs are clamped to [0, 1] first
    return np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def pad_to_multiple(x: np.ndarray, multiple: int = 64) -> np.ndarray:
    """Reflect-pad the last two axes up to a multiple of ``multiple``.

    Falls back to edge replication where the image is too small to reflect.
    """
    h, w = x.shape[-2:]
    ph, pw = -h % multiple, -w % multiple
    if not ph and not pw:
        return x
    lead = [(0, 0)] * (x.ndim - 2)
    while ph or pw:
        # reflection can add at most (extent - 1) pixels per pass
        sh, sw = min(ph, x.shape[-2] - 1), min(pw, x.shape[-1] - 1)
        if sh == 0 and sw == 0:
            return np.pad(x, lead + [(0, ph), (0, pw)], mode="edge")
        x = np.pad(x, lead + [(0, sh), (0, sw)], mode="reflect")
        ph, pw = ph - sh, pw - sw
    return x


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FormatError(f"{d} is not a directory")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
