"""Distortion metrics and the rate-distortion training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, conv2d, make_node_public
from ..autodiff import functional as F
from ..autodiff.branches import note
from ..entropy import add_uniform_noise, factorized_pmf, gmm_discrete_pmf, rate_bits
from ..errors import ConfigurationError

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SSIM_FILTER_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
MSE_LOSS_SCALE = 255.0**2


def gaussian_window(size: int = SSIM_FILTER_SIZE, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    return g / g.sum()


def _blur(t: Tensor, window: np.ndarray) -> Tensor:
    # separable VALID filter applied to every (image, channel) plane
    b, c, h, w = t.shape
    planes = F.reshape(t, (b * c, 1, h, w))
    kv = Tensor(window.reshape(1, 1, -1, 1).astype(t.dtype))
    kh = Tensor(window.reshape(1, 1, 1, -1).astype(t.dtype))
    out = conv2d(conv2d(planes, kv), kh)
    return F.reshape(out, (b, c) + out.shape[-2:])


def _ssim_terms(x: Tensor, y: Tensor, max_val: float, window: np.ndarray) -> tuple[Tensor, Tensor]:
    """Mean SSIM and mean contrast-structure per (image, channel)."""
    c1 = (SSIM_K1 * max_val) ** 2
    c2 = (SSIM_K2 * max_val) ** 2
    mu_x = _blur(x, window)
    mu_y = _blur(y, window)
    num0 = mu_x * mu_y * 2.0
    den0 = mu_x * mu_x + mu_y * mu_y
    luminance = (num0 + c1) / (den0 + c1)
    num1 = _blur(x * y, window) * 2.0
    den1 = _blur(x * x + y * y, window)
    cs = (num1 - num0 + c2) / (den1 - den0 + c2)
    return F.mean(luminance * cs, axis=(2, 3)), F.mean(cs, axis=(2, 3))


def _relu_pow(t: Tensor, p: float) -> Tensor:
    """``max(t, 0) ** p`` with a zero gradient where ``t <= 0``."""
    d = t.data
    pos = d > 0
    note(pos)
    safe = np.where(pos, d, 1.0)
    out = np.where(pos, safe**p, 0.0).astype(d.dtype)
    grad = np.where(pos, p * safe ** (p - 1.0), 0.0).astype(d.dtype)
    return make_node_public(out, (t,), lambda g: (g * grad,))


def ms_ssim_levels(h: int, w: int, filter_size: int = SSIM_FILTER_SIZE, max_levels: int = 5) -> int:
    """Number of scales such that the coarsest one still fits the filter.

    Five scales need at least ``(filter_size - 1) * 16 + 1 = 161`` pixels.
    """
    side = min(h, w)
    levels = max_levels
    while levels > 1 and side < (filter_size - 1) * 2 ** (levels - 1) + 1:
        levels -= 1
    if side < filter_size:
        raise ConfigurationError(f"image extent {h}x{w} is smaller than the {filter_size}px SSIM window")
    return levels


def ms_ssim(x: Tensor, y: Tensor, max_val: float = 1.0, levels: int | None = None) -> Tensor:
    """Per-image MS-SSIM, shape ``(B,)``; channels are averaged.

    Power factors are the standard five-scale set, truncated to ``levels``
    and renormalised to sum to one when fewer scales fit.
    """
    if x.shape != y.shape:
        raise ConfigurationError(f"MS-SSIM inputs differ in shape: {x.shape} vs {y.shape}")
    if levels is None:
        levels = ms_ssim_levels(*x.shape[-2:])
    weights = np.asarray(MS_SSIM_WEIGHTS[:levels])
    weights = weights / weights.sum()
    window = gaussian_window()
    factors = []
    for level in range(levels):
        if level > 0:
            x, y = F.avg_pool2(x), F.avg_pool2(y)
        ssim_val, cs = _ssim_terms(x, y, max_val, window)
        term = ssim_val if level == levels - 1 else cs
        factors.append(_relu_pow(term, float(weights[level])))
    out = factors[0]
    for f in factors[1:]:
        out = out * f
    return F.mean(out, axis=1)


def mse(x: Tensor, y: Tensor) -> Tensor:
    d = x - y
    return F.mean(d * d)


def distortion(x: Tensor, x_rec: Tensor, kind: str) -> Tensor:
    """Scalar distortion: MSE on [0, 1] pixels, or ``1 - MS-SSIM`` averaged over the batch."""
    if kind == "mse":
        return mse(x, x_rec)
    if kind == "ms_ssim":
        return 1.0 - F.mean(ms_ssim(x, x_rec))
    raise ConfigurationError(f"unknown distortion {kind!r}")


def loss_distortion(d: Tensor, kind: str) -> Tensor:
    # lambda values for MSE are calibrated on 8-bit pixel errors
    return d * MSE_LOSS_SCALE if kind == "mse" else d


@dataclass
class RdTerms:
    loss: Tensor
    rate_bits: Tensor
    y_bits: Tensor
    z_bits: Tensor
    distortion: Tensor
    num_pixels: int

    @property
    def bpp(self) -> float:
        return float(self.rate_bits.data) / self.num_pixels


def rd_loss(x: Tensor, model, lmbda: float, kind: str, rng: np.random.Generator) -> RdTerms:
    """Noisy-latent rate plus ``lmbda`` times distortion, rate in bits per pixel."""
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=model.dtype))
    b, _, h, w = x.shape
    num_pixels = b * h * w
    y = model.analysis(x)
    z = model.hyper_analysis(y)
    y_tilde = add_uniform_noise(y, rng)
    z_tilde = add_uniform_noise(z, rng)
    z_bits = rate_bits(factorized_pmf(model.factorized, z_tilde))
    params = model.gmm_params(y_tilde, z_tilde)
    y_bits = rate_bits(gmm_discrete_pmf(params, y_tilde))
    x_tilde = model.synthesis(y_tilde)
    d = distortion(x, x_tilde, kind)
    total_bits = y_bits + z_bits
    loss = total_bits / float(num_pixels) + loss_distortion(d, kind) * lmbda
    return RdTerms(loss, total_bits, y_bits, z_bits, d, num_pixels)
