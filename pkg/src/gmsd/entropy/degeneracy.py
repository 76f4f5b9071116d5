"""Mixture-collapse diagnostic: channel mean of the smallest mixture weight per pixel.

A value near zero at a pixel means that, on average over channels, one of the
K components carries almost no weight, i.e. the ternary mixture behaves like
a binary one there.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

COLLAPSE_THRESHOLD = 0.02


def min_weight_channel_average(weights: np.ndarray) -> np.ndarray:
    """``(B, H, W, C, K)`` weights -> ``(B, H, W)`` map of channel-averaged minimum weights."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 5:
        raise ConfigurationError(f"expected weights of shape (B, H, W, C, K), got {w.shape}")
    # min over K never exceeds 1/K; clip away float32 softmax rounding
    return np.minimum(w.min(axis=-1).mean(axis=-1), 1.0 / w.shape[-1])


def weights_bhwck(weights_bchwk: np.ndarray) -> np.ndarray:
    """Reorder codec-layout weights ``(B, C, H, W, K)`` to ``(B, H, W, C, K)``."""
    return np.transpose(weights_bchwk, (0, 2, 3, 1, 4))


def summarize(degeneracy_map: np.ndarray, threshold: float = COLLAPSE_THRESHOLD) -> dict[str, float]:
    m = np.asarray(degeneracy_map, dtype=np.float64)
    return {
        "mean": float(m.mean()),
        "median": float(np.median(m)),
        "min": float(m.min()),
        "max": float(m.max()),
        "frac_below_threshold": float(np.mean(m < threshold)),
        "threshold": threshold,
    }


def degeneracy_csv(degeneracy_map: np.ndarray) -> str:
    """Row-major CSV of a single ``(H, W)`` map, one latent row per line."""
    buf = io.StringIO()
    for row in np.asarray(degeneracy_map, dtype=np.float64):
        buf.write(",".join(f"{v:.8f}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def degeneracy_pgm(degeneracy_map: np.ndarray, K: int) -> bytes:
    """8-bit binary PGM with value ``round(255 * map * K)`` (full scale = uniform weights)."""
    m = np.asarray(degeneracy_map, dtype=np.float64)
    pix = np.clip(np.floor(255.0 * m * K + 0.5), 0, 255).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def write_degeneracy(prefix: str | Path, degeneracy_map: np.ndarray, K: int) -> tuple[Path, Path]:
    prefix = Path(prefix)
    csv_path = prefix.with_name(prefix.name + "_degeneracy.csv")
    pgm_path = prefix.with_name(prefix.name + "_degeneracy.pgm")
    csv_path.write_text(degeneracy_csv(degeneracy_map))
    pgm_path.write_bytes(degeneracy_pgm(degeneracy_map, K))
    return csv_path, pgm_path
