"""Discretized Gaussian-mixture likelihood for the quantized latent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..autodiff import functional as F

SCALE_MIN = 1e-6
SCALE_MAX = 256.0
PROB_FLOOR = 1e-9


@dataclass
class Diagnostics:
    scale_clamps: int = 0

    def reset(self) -> None:
        self.scale_clamps = 0


DIAGNOSTICS = Diagnostics()


@dataclass
class GmmParams:
    """Mixture parameters with the component axis last: ``(..., K)``.

    For latent tensors the leading layout is ``(B, C, H, W)``.
    """

    weights: Tensor
    means: Tensor
    scales: Tensor

    @property
    def K(self) -> int:
        return self.weights.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape[:-1]

    def numpy(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.weights.data, self.means.data, self.scales.data


def _clamp_scales(s: Tensor) -> Tensor:
    out_of_range = np.count_nonzero((s.data < SCALE_MIN) | (s.data > SCALE_MAX))
    DIAGNOSTICS.scale_clamps += int(out_of_range)
    return F.clamp(s, SCALE_MIN, SCALE_MAX) if out_of_range else s


def params_from_raw(weight_logits: Tensor, means: Tensor, scale_raw: Tensor) -> GmmParams:
    """Map raw network outputs to valid mixture parameters.

    Weights: softmax over K. Scales: ``exp`` of the raw value, clamped to
    ``[SCALE_MIN, SCALE_MAX]`` (applied in log space so ``exp`` never overflows).
    """
    lo, hi = math.log(SCALE_MIN), math.log(SCALE_MAX)
    outside = np.count_nonzero((scale_raw.data < lo) | (scale_raw.data > hi))
    DIAGNOSTICS.scale_clamps += int(outside)
    if outside:
        scale_raw = F.clamp(scale_raw, lo, hi)
    return GmmParams(F.softmax(weight_logits, axis=-1), means, F.exp(scale_raw))


def gmm_discrete_pmf(params: GmmParams, symbols) -> Tensor:
    """P(symbol) under the mixture convolved with U(-1/2, 1/2), floored at ``PROB_FLOOR``.

    ``symbols`` has the params' leading shape (no K axis). Uses the
    reflection ``|s - mu|`` so both CDF evaluations sit in the lower tail.
    """
    if not isinstance(symbols, Tensor):
        symbols = Tensor(np.asarray(symbols, dtype=params.means.dtype))
    scales = _clamp_scales(params.scales)
    centred = F.abs(F.reshape(symbols, symbols.shape + (1,)) - params.means)
    upper = F.ndtr((0.5 - centred) / scales)
    lower = F.ndtr((-0.5 - centred) / scales)
    pmf = F.sum(params.weights * (upper - lower), axis=-1)
    return F.maximum(pmf, PROB_FLOOR)


def gmm_pmf_numpy(weights: np.ndarray, means: np.ndarray, scales: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Unfloored float64 mixture pmf for broadcastable arrays ``(..., K)`` and symbols ``(..., 1)``."""
    from scipy.special import ndtr

    scales = np.clip(scales, SCALE_MIN, SCALE_MAX)
    centred = np.abs(symbols - means)
    comp = ndtr((0.5 - centred) / scales) - ndtr((-0.5 - centred) / scales)
    return np.sum(weights * comp, axis=-1)


def rate_bits(pmf: Tensor) -> Tensor:
    """Total ideal code length in bits: sum of -log2 p."""
    return -F.sum(F.log2(pmf))


def quantize_round(y) -> np.ndarray:
    """Round half away from zero, returning integers."""
    arr = y.data if isinstance(y, Tensor) else np.asarray(y)
    return (np.sign(arr) * np.floor(np.abs(arr) + 0.5)).astype(np.int64)


def add_uniform_noise(y: Tensor, rng: np.random.Generator) -> Tensor:
    noise = rng.uniform(-0.5, 0.5, size=y.shape).astype(y.dtype)
    return y + Tensor(noise)
