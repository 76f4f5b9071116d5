"""Per-channel learned univariate density for the hyper-latent.

The cumulative is ``sigmoid(f(x))`` where ``f`` is a small monotone network
(positive matrices via softplus, tanh-gated residual couplings), one per
channel. Probabilities of integer symbols are ``c(s + 1/2) - c(s - 1/2)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..autodiff import Module, Parameter, Tensor
from ..autodiff import functional as F
from .gmm import PROB_FLOOR


class FactorizedDensity(Module):
    def __init__(self, channels: int, filters: tuple[int, ...] = (3, 3, 3), init_scale: float = 1.0,
                 *, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.filters = tuple(filters)
        dims = (1,) + self.filters + (1,)
        scale = init_scale ** (1.0 / (len(self.filters) + 1))
        self._n_layers = len(dims) - 1
        for i in range(self._n_layers):
            init = np.log(np.expm1(1.0 / scale / dims[i + 1]))
            setattr(self, f"matrix{i}", Parameter(np.full((channels, dims[i + 1], dims[i]), init, dtype=dtype)))
            setattr(self, f"bias{i}", Parameter(rng.uniform(-0.5, 0.5, (channels, dims[i + 1], 1)).astype(dtype)))
            if i < self._n_layers - 1:
                setattr(self, f"factor{i}", Parameter(np.zeros((channels, dims[i + 1], 1), dtype=dtype)))

    def logits_cumulative(self, x: Tensor) -> Tensor:
        """``x`` is ``(C, 1, L)``; returns cumulative logits of the same shape."""
        for i in range(self._n_layers):
            x = F.matmul(F.softplus(getattr(self, f"matrix{i}")), x) + getattr(self, f"bias{i}")
            if i < self._n_layers - 1:
                x = x + F.tanh(getattr(self, f"factor{i}")) * F.tanh(x)
        return x

    def cdf(self, x) -> np.ndarray:
        """Cumulative at points ``x`` of shape ``(C, L)`` (no gradient)."""
        x = np.asarray(x, dtype=np.float64)
        logits = self._logits_numpy(x[:, None, :])
        return expit(logits[:, 0, :])

    def _logits_numpy(self, x: np.ndarray) -> np.ndarray:
        for i in range(self._n_layers):
            m = np.logaddexp(0.0, getattr(self, f"matrix{i}").data.astype(np.float64))
            x = m @ x + getattr(self, f"bias{i}").data.astype(np.float64)
            if i < self._n_layers - 1:
                x = x + np.tanh(getattr(self, f"factor{i}").data.astype(np.float64)) * np.tanh(x)
        return x

    def forward(self, z: Tensor) -> Tensor:
        return factorized_pmf(self, z)


def factorized_pmf(model: FactorizedDensity, symbols: Tensor) -> Tensor:
    """Probability of each element of ``symbols`` (``(B, C, H, W)``), floored at ``PROB_FLOOR``."""
    if not isinstance(symbols, Tensor):
        symbols = Tensor(np.asarray(symbols, dtype=model.matrix0.dtype))
    b, c, h, w = symbols.shape
    flat = F.reshape(F.transpose(symbols, (1, 0, 2, 3)), (c, 1, b * h * w))
    upper = model.logits_cumulative(flat + 0.5)
    lower = model.logits_cumulative(flat - 0.5)
    # evaluate in whichever tail keeps the difference well conditioned
    sign = Tensor(np.where(upper.data + lower.data > 0, -1.0, 1.0).astype(upper.dtype))
    pmf = F.abs(F.sigmoid(sign * upper) - F.sigmoid(sign * lower))
    pmf = F.transpose(F.reshape(pmf, (c, b, h, w)), (1, 0, 2, 3))
    return F.maximum(pmf, PROB_FLOOR)


def factorized_pmf_numpy(model: FactorizedDensity, symbols: np.ndarray) -> np.ndarray:
    """Unfloored float64 pmf for ``symbols`` of shape ``(C, L)``."""
    s = np.asarray(symbols, dtype=np.float64)[:, None, :]
    upper = model._logits_numpy(s + 0.5)
    lower = model._logits_numpy(s - 0.5)
    sign = np.where(upper + lower > 0, -1.0, 1.0)
    return np.abs(expit(sign * upper) - expit(sign * lower))[:, 0, :]
