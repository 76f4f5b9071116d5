"""Quantized CDF tables handed to the range coder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from ..errors import ConfigurationError
from .factorized import FactorizedDensity, factorized_pmf_numpy
from .gmm import SCALE_MAX, SCALE_MIN, GmmParams, gmm_pmf_numpy

ALPHABET = (-127, 128)
PRECISION = 16


@dataclass(frozen=True)
class PmfTable:
    """Integer CDFs over ``[s_min, s_max]``; the last axis has ``n + 1`` entries.

    ``cdf[..., 0] == 0``, ``cdf[..., -1] == 2**precision`` and every symbol
    has a count of at least one.
    """

    cdf: np.ndarray
    s_min: int
    precision: int = PRECISION
    tails_folded: bool = True

    @property
    def n_symbols(self) -> int:
        return self.cdf.shape[-1] - 1

    @property
    def s_max(self) -> int:
        return self.s_min + self.n_symbols - 1

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.cdf, axis=-1)

    def probabilities(self) -> np.ndarray:
        return self.counts / float(1 << self.precision)

    def row(self, index) -> np.ndarray:
        return self.cdf[index]


def quantize_pmf(probs: np.ndarray, precision: int = PRECISION) -> np.ndarray:
    """Largest-remainder quantization of pmfs (last axis) to integer CDFs.

    Every symbol first receives one count; the remaining ``2**precision - n``
    counts are shared in proportion to ``probs`` with leftovers going to the
    largest fractional parts (lowest index first on ties).
    """
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[-1]
    total = 1 << precision
    if n > total:
        raise ConfigurationError(f"alphabet of {n} symbols cannot be coded at {precision}-bit precision")
    probs = np.where(np.isfinite(probs), np.clip(probs, 0.0, None), 0.0)
    mass = probs.sum(axis=-1, keepdims=True)
    probs = np.where(mass > 0, probs / np.where(mass > 0, mass, 1.0), 1.0 / n)
    free = total - n
    raw = probs * free
    base = np.floor(raw).astype(np.int64)
    leftover = free - base.sum(axis=-1)
    frac = raw - base
    order = np.argsort(-frac, axis=-1, kind="stable")
    rank = np.argsort(order, axis=-1, kind="stable")
    counts = 1 + base + (rank < leftover[..., None])
    cdf = np.zeros(counts.shape[:-1] + (n + 1,), dtype=np.int64)
    np.cumsum(counts, axis=-1, out=cdf[..., 1:])
    return cdf


def _alphabet_symbols(alphabet: tuple[int, int]) -> np.ndarray:
    s_min, s_max = alphabet
    if s_max < s_min:
        raise ConfigurationError(f"empty alphabet {alphabet}")
    return np.arange(s_min, s_max + 1, dtype=np.float64)


def gmm_alphabet_pmf(weights: np.ndarray, means: np.ndarray, scales: np.ndarray,
                     alphabet: tuple[int, int] = ALPHABET) -> np.ndarray:
    """Mixture pmf over the alphabet with out-of-range mass folded into the edge symbols.

    Parameter arrays are ``(..., K)``; the result is ``(..., n)``.
    """
    w = np.asarray(weights, np.float64)[..., None, :]
    mu = np.asarray(means, np.float64)[..., None, :]
    sigma = np.clip(np.asarray(scales, np.float64), SCALE_MIN, SCALE_MAX)[..., None, :]
    symbols = _alphabet_symbols(alphabet)
    pmf = gmm_pmf_numpy(w, mu, sigma, symbols[:, None])
    s_min, s_max = alphabet
    below = np.sum(w * ndtr((s_min + 0.5 - mu) / sigma), axis=-1)[..., 0]
    above = np.sum(w * ndtr((mu - (s_max - 0.5)) / sigma), axis=-1)[..., 0]
    if pmf.shape[-1] == 1:
        pmf[..., 0] = 1.0
    else:
        pmf[..., 0] = below
        pmf[..., -1] = above
    return pmf


def factorized_alphabet_pmf(model: FactorizedDensity, alphabet: tuple[int, int] = ALPHABET) -> np.ndarray:
    """``(C, n)`` pmf of the factorized density with tails folded into the edges."""
    symbols = _alphabet_symbols(alphabet)
    grid = np.broadcast_to(symbols, (model.channels, symbols.size))
    pmf = factorized_pmf_numpy(model, grid)
    s_min, s_max = alphabet
    lo = model._logits_numpy(np.full((model.channels, 1, 1), s_min + 0.5))[:, 0, 0]
    hi = model._logits_numpy(np.full((model.channels, 1, 1), s_max - 0.5))[:, 0, 0]
    if symbols.size == 1:
        pmf[:, 0] = 1.0
    else:
        pmf[:, 0] = expit(lo)
        pmf[:, -1] = expit(-hi)
    return pmf


def build_pmf_table(source, alphabet: tuple[int, int] = ALPHABET, precision: int = PRECISION) -> PmfTable:
    """Quantized table for a :class:`GmmParams`, a :class:`FactorizedDensity` or a raw pmf array."""
    s_min, s_max = alphabet
    if s_max - s_min + 1 > (1 << precision):
        raise ConfigurationError(
            f"alphabet span {s_max - s_min + 1} exceeds 2^{precision} = {1 << precision} counts"
        )
    if isinstance(source, GmmParams):
        pmf = gmm_alphabet_pmf(*source.numpy(), alphabet=alphabet)
    elif isinstance(source, FactorizedDensity):
        pmf = factorized_alphabet_pmf(source, alphabet)
    else:
        pmf = np.asarray(source, dtype=np.float64)
        if pmf.shape[-1] != s_max - s_min + 1:
            raise ConfigurationError(f"pmf has {pmf.shape[-1]} entries for an alphabet of {s_max - s_min + 1}")
    return PmfTable(quantize_pmf(pmf, precision), s_min, precision)
