"""Image encoding and decoding through the range coder.

Both directions run the same serial pipeline: for each latent position in
raster order, gather the already-coded neighbours under the causal mask,
evaluate the context and entropy-parameter networks for that one position in
float64, and quantize the resulting mixture into a CDF table. Because the
encoder fills its latent canvas in the same order the decoder does, both
sides feed bit-identical inputs to identical code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..autodiff import Tensor, causal_mask, no_grad
from ..entropy.factorized import factorized_pmf
from ..entropy.gmm import SCALE_MAX, SCALE_MIN, gmm_discrete_pmf, quantize_round, rate_bits
from ..entropy.tables import ALPHABET, PRECISION, factorized_alphabet_pmf, gmm_alphabet_pmf, quantize_pmf
from ..errors import DecodeError, ModelMismatchError
from ..imageio import pad_to_multiple, to_uint8
from ..network.codec import HYPER_STRIDE, LATENT_STRIDE, CodecModel, check_padded
from .bitstream import HEADER_SIZE, Bitstream, Header, parse_bitstream
from .rangecoder import RangeDecoder, RangeEncoder

S_MIN, S_MAX = ALPHABET
LEAKY_SLOPE = 0.2
# cheapest possible symbol under a 16-bit table with 256 symbols of count >= 1:
# -log2((65536 - 255) / 65536) bits, i.e. at most ~1424 symbols per byte
MAX_SYMBOLS_PER_BYTE = 1424


def clamp_symbols(q: np.ndarray) -> np.ndarray:
    return np.clip(q, S_MIN, S_MAX)


def _dense_layers(seq) -> list[tuple[np.ndarray, np.ndarray]]:
    """(weight, bias) pairs of a 1x1-conv stack as float64 matrices."""
    layers = []
    for step in seq:
        if hasattr(step, "weight"):
            w = step.weight.data.astype(np.float64)
            layers.append((w.reshape(w.shape[0], w.shape[1]), step.bias.data.astype(np.float64)))
    return layers


def _mlp(layers, v: np.ndarray) -> np.ndarray:
    for i, (w, b) in enumerate(layers):
        v = w @ v + b
        if i < len(layers) - 1:
            v = np.where(v >= 0, v, LEAKY_SLOPE * v)
    return v


class CoderContext:
    """Float64 snapshot of a frozen model's entropy path, shared by encode and decode."""

    def __init__(self, model: CodecModel):
        self.model = model
        self.config = model.config
        self.fingerprint = model.fingerprint()
        self.model64 = model.copy(dtype=np.float64)
        k = self.config.context_kernel
        self.kernel = k
        self.taps = np.flatnonzero(causal_mask(k, k).ravel())
        wctx = self.model64.context.weight.data  # (2m, m, k, k)
        self.ctx_weight = wctx.reshape(wctx.shape[0], wctx.shape[1], k * k)[:, :, self.taps].reshape(wctx.shape[0], -1)
        self.ctx_bias = self.model64.context.bias.data
        self.branches = [_dense_layers(net) for net in self.model64.entropy_params]
        self.z_cdf = quantize_pmf(factorized_alphabet_pmf(self.model64.factorized), PRECISION)

    @property
    def m(self) -> int:
        return self.config.m_eff

    def hyper_features(self, z_hat: np.ndarray) -> list[np.ndarray]:
        """Hyper-decoder outputs ``(C, h, w)`` per branch for one image's ``z_hat`` ``(n, hz, wz)``."""
        with no_grad():
            feats = self.model64.hyper_synthesis(Tensor(z_hat[None].astype(np.float64)))
        return [f.data[0] for f in feats]

    def position_params(self, canvas: np.ndarray, feats, i: int, j: int):
        """Mixture parameters ``(m, K)`` x3 at latent position (i, j).

        ``canvas`` is the zero-padded latent grid; only taps before (i, j) in
        raster order are read.
        """
        k, m, K = self.kernel, self.m, self.config.K
        patch = canvas[:, i:i + k, j:j + k].reshape(m, k * k)[:, self.taps]
        ctx = self.ctx_weight @ patch.ravel() + self.ctx_bias
        outs = [_mlp(layers, np.concatenate([ctx, f[:, i, j]])) for layers, f in zip(self.branches, feats)]
        if len(outs) == 1:
            w_raw, mu, s_raw = np.split(outs[0], 3)
        else:
            w_raw, mu, s_raw = outs
        # each family is laid out (K, m); the coder wants (m, K)
        w_raw, mu, s_raw = (a.reshape(K, m).T for a in (w_raw, mu, s_raw))
        scales = np.exp(np.clip(s_raw, math.log(SCALE_MIN), math.log(SCALE_MAX)))
        return softmax(w_raw, axis=-1), mu, scales

    def position_cdf(self, canvas, feats, i, j) -> np.ndarray:
        return quantize_pmf(gmm_alphabet_pmf(*self.position_params(canvas, feats, i, j)), PRECISION)


def _context(model: CodecModel, context: CoderContext | None) -> CoderContext:
    if context is not None and context.model is model and context.fingerprint == model.fingerprint():
        return context
    return CoderContext(model)


def quantized_latents(model: CodecModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rounded, alphabet-clamped ``(y_hat, z_hat)`` for one padded image ``(3, H, W)``."""
    check_padded(x.shape)
    with no_grad():
        y = model.analysis(Tensor(np.asarray(x, dtype=model.dtype)[None]))
        z = model.hyper_analysis(y)
    return clamp_symbols(quantize_round(y))[0], clamp_symbols(quantize_round(z))[0]


def reconstruct(model: CodecModel, y_hat: np.ndarray) -> np.ndarray:
    """8-bit reconstruction ``(3, H, W)`` of a latent grid; shared by encoder and decoder."""
    with no_grad():
        x_hat = model.synthesis(Tensor(y_hat[None].astype(model.dtype)), clamp=True)
    return to_uint8(x_hat.data[0])


@dataclass
class EncodeResult:
    bitstream: Bitstream
    y_hat: np.ndarray
    z_hat: np.ndarray
    reconstruction: np.ndarray  # uint8 (3, orig_h, orig_w)

    def to_bytes(self) -> bytes:
        return self.bitstream.to_bytes()


@dataclass
class DecodeResult:
    header: Header
    y_hat: np.ndarray
    z_hat: np.ndarray
    image: np.ndarray  # uint8 (3, orig_h, orig_w)


def _encode_z(ctx: CoderContext, z_hat: np.ndarray) -> bytes:
    enc = RangeEncoder()
    n, hz, wz = z_hat.shape
    for i in range(hz):
        for j in range(wz):
            for c in range(n):
                enc.encode_symbol(int(z_hat[c, i, j]), ctx.z_cdf[c], S_MIN, PRECISION)
    return enc.finish()


def _decode_z(ctx: CoderContext, data: bytes, shape) -> np.ndarray:
    dec = RangeDecoder(data, base_offset=HEADER_SIZE)
    n, hz, wz = shape
    z_hat = np.zeros(shape, dtype=np.int64)
    for i in range(hz):
        for j in range(wz):
            for c in range(n):
                z_hat[c, i, j] = dec.decode_symbol(ctx.z_cdf[c], S_MIN, PRECISION)
    dec.finish()
    return z_hat


def encode_image(x: np.ndarray, model: CodecModel, original_size: tuple[int, int] | None = None,
                 context: CoderContext | None = None) -> EncodeResult:
    """Encode a padded float image ``(3, H, W)`` in [0, 1].

    ``original_size`` is ``(height, width)`` before padding; the header
    records it and the decoder crops back to it.
    """
    x = np.asarray(x)
    check_padded(x.shape)
    ctx = _context(model, context)
    h, w = x.shape[-2:]
    oh, ow = original_size if original_size is not None else (h, w)
    y_hat, z_hat = quantized_latents(model, x)
    z_bytes = _encode_z(ctx, z_hat)

    feats = ctx.hyper_features(z_hat)
    m, hy, wy = y_hat.shape
    pad = ctx.kernel // 2
    canvas = np.zeros((m, hy + 2 * pad, wy + 2 * pad))
    enc = RangeEncoder()
    for i in range(hy):
        for j in range(wy):
            cdf = ctx.position_cdf(canvas, feats, i, j)
            for c in range(m):
                enc.encode_symbol(int(y_hat[c, i, j]), cdf[c], S_MIN, PRECISION)
            canvas[:, i + pad, j + pad] = y_hat[:, i, j]
    header = Header(ctx.config.arm, ctx.config.K, ctx.config.N, ctx.config.M, ow, oh,
                    ctx.fingerprint, len(z_bytes))
    recon = reconstruct(model, y_hat)[:, :oh, :ow]
    return EncodeResult(Bitstream(header, z_bytes, enc.finish()), y_hat, z_hat, recon)


def compress(img: np.ndarray, model: CodecModel, context: CoderContext | None = None) -> EncodeResult:
    """Pad an arbitrary-size float image reflectively to the 64-pixel grid and encode it."""
    img = np.asarray(img)
    return encode_image(pad_to_multiple(img, HYPER_STRIDE), model, img.shape[-2:], context)


def _check_header(header: Header, ctx: CoderContext) -> None:
    cfg = ctx.config
    if header.model_hash != ctx.fingerprint:
        raise ModelMismatchError(
            f"bitstream was produced by model {header.model_hash:016x}, checkpoint is {ctx.fingerprint:016x}"
        )
    if header.mode != cfg.arm or header.K != cfg.K or header.N != cfg.N or header.M != cfg.M:
        raise ModelMismatchError(
            f"bitstream header ({header.mode}, K={header.K}, N={header.N}, M={header.M}) does not match "
            f"the checkpoint ({cfg.arm}, K={cfg.K}, N={cfg.N}, M={cfg.M})"
        )


def decode_image(data: bytes | Bitstream, model: CodecModel, context: CoderContext | None = None) -> DecodeResult:
    stream = data if isinstance(data, Bitstream) else parse_bitstream(data)
    ctx = _context(model, context)
    header = stream.header
    _check_header(header, ctx)
    ph = -(-header.height // HYPER_STRIDE) * HYPER_STRIDE
    pw = -(-header.width // HYPER_STRIDE) * HYPER_STRIDE
    m, n = ctx.config.m_eff, ctx.config.n_eff
    hy, wy = ph // LATENT_STRIDE, pw // LATENT_STRIDE
    z_shape = (n, ph // HYPER_STRIDE, pw // HYPER_STRIDE)
    y_count = m * hy * wy
    z_count = int(np.prod(z_shape))
    # a stream cannot hold more symbols than its length allows; reject before any work
    if z_count > MAX_SYMBOLS_PER_BYTE * (len(stream.z_segment) + 4):
        raise DecodeError(f"z segment of {len(stream.z_segment)} bytes cannot hold {z_count} symbols",
                          offset=HEADER_SIZE)
    y_offset = HEADER_SIZE + len(stream.z_segment)
    if y_count > MAX_SYMBOLS_PER_BYTE * (len(stream.y_segment) + 4):
        raise DecodeError(f"y segment of {len(stream.y_segment)} bytes cannot hold {y_count} symbols",
                          offset=y_offset)

    z_hat = _decode_z(ctx, stream.z_segment, z_shape)
    feats = ctx.hyper_features(z_hat)
    pad = ctx.kernel // 2
    canvas = np.zeros((m, hy + 2 * pad, wy + 2 * pad))
    y_hat = np.zeros((m, hy, wy), dtype=np.int64)
    dec = RangeDecoder(stream.y_segment, base_offset=y_offset)
    for i in range(hy):
        for j in range(wy):
            cdf = ctx.position_cdf(canvas, feats, i, j)
            for c in range(m):
                y_hat[c, i, j] = dec.decode_symbol(cdf[c], S_MIN, PRECISION)
            canvas[:, i + pad, j + pad] = y_hat[:, i, j]
    dec.finish()
    image = reconstruct(model, y_hat)[:, :header.height, :header.width]
    return DecodeResult(header, y_hat, z_hat, image)


def estimate_bits(model: CodecModel, y_hat: np.ndarray, z_hat: np.ndarray) -> tuple[float, float]:
    """Ideal code lengths ``(y_bits, z_bits)``: sum of -log2 p under the model for fixed latents."""
    with no_grad():
        yt = Tensor(y_hat[None].astype(np.float64))
        zt = Tensor(z_hat[None].astype(np.float64))
        m64 = model.copy(dtype=np.float64)
        params = m64.gmm_params(yt, zt)
        y_bits = float(rate_bits(gmm_discrete_pmf(params, yt)).data)
        z_bits = float(rate_bits(factorized_pmf(m64.factorized, zt)).data)
    return y_bits, z_bits
