"""Image-quality metrics on 8-bit images."""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, no_grad
from ..errors import ConfigurationError
from ..train.losses import SSIM_FILTER_SIZE, ms_ssim

PSNR_IDENTICAL = math.inf


def psnr(x: np.ndarray, x_hat: np.ndarray, max_val: float = 255.0) -> float:
    """``10 log10(max^2 / MSE)`` in dB; identical inputs give ``+inf``."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"PSNR inputs differ in shape: {a.shape} vs {b.shape}")
    err = float(np.mean((a - b) ** 2))
    if err == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(max_val**2 / err)


def ms_ssim_uint8(x: np.ndarray, x_hat: np.ndarray) -> float:
    """MS-SSIM of two uint8 images ``(3, H, W)``; NaN when the image is smaller than the SSIM window."""
    if min(x.shape[-2:]) < SSIM_FILTER_SIZE:
        return math.nan
    with no_grad():
        a = Tensor(np.asarray(x, dtype=np.float64)[None] / 255.0)
        b = Tensor(np.asarray(x_hat, dtype=np.float64)[None] / 255.0)
        return float(ms_ssim(a, b).data[0])
