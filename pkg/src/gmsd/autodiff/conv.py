"""2-D convolution kernels (cross-correlation), their adjoints and the causal mask.

Layout is NCHW; kernels are ``(out_ch, in_ch, kh, kw)``. The transposed
convolution takes the *same* kernel layout as :func:`conv2d` and computes its
exact adjoint, so ``<conv2d(x, k), y> == <conv2d_transpose(y, k), x>``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import ConfigurationError
from .functional import unbroadcast
from .tensor import Tensor, make_node


def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    b, c = xp.shape[:2]
    sb, sc, sh, sw = xp.strides
    win = as_strided(
        xp,
        shape=(b, ho, wo, c, kh, kw),
        strides=(sb, sh * stride, sw * stride, sc, sh, sw),
        writeable=False,
    )
    return win.reshape(b * ho * wo, c * kh * kw)


def _col2im(cols: np.ndarray, shape: tuple, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    b, c = shape[:2]
    # tap-major copy so every accumulation below reads contiguous memory
    blocks = np.ascontiguousarray(cols.reshape(b, ho, wo, c, kh, kw).transpose(4, 5, 0, 3, 1, 2))
    out = np.zeros(shape, dtype=cols.dtype)
    he, we = stride * (ho - 1) + 1, stride * (wo - 1) + 1
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + he:stride, j:j + we:stride] += blocks[i, j]
    return out


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _unpad(x: np.ndarray, p: int, h: int, w: int) -> np.ndarray:
    return x[:, :, p:p + h, p:p + w]


def _correlate(xd: np.ndarray, kd: np.ndarray, ph: int, pw: int) -> np.ndarray:
    """Stride-1 cross-correlation with separate vertical/horizontal zero padding."""
    b, c, h, w = xd.shape
    o, _, kh, kw = kd.shape
    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else xd
    ho, wo = h + 2 * ph - kh + 1, w + 2 * pw - kw + 1
    cols = _im2col(xp, kh, kw, 1, ho, wo)
    return (cols @ kd.reshape(o, -1).T).reshape(b, ho, wo, o).transpose(0, 3, 1, 2)


def _check(x: np.ndarray, k: np.ndarray, channel_axis_len: int, stride: int, padding: int) -> None:
    if x.ndim != 4 or k.ndim != 4:
        raise ConfigurationError(f"conv expects 4-D input and kernel, got {x.shape} and {k.shape}")
    if channel_axis_len != x.shape[1]:
        raise ConfigurationError(
            f"kernel {k.shape} expects {channel_axis_len} input channels, input has {x.shape[1]}"
        )
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"invalid stride {stride} / padding {padding}")


def _bias_grad(g: np.ndarray, bias: Tensor | None):
    if bias is None or not bias.requires_grad:
        return None
    return unbroadcast(g.sum(axis=(0, 2, 3)), bias.shape)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0, bias: Tensor | None = None) -> Tensor:
    xd, kd = x.data, kernel.data
    _check(xd, kd, kd.shape[1], stride, padding)
    b, c, h, w = xd.shape
    o, _, kh, kw = kd.shape
    ho, wo = conv_output_size(h, kh, stride, padding), conv_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ConfigurationError(f"input {xd.shape} too small for kernel {kd.shape} at padding {padding}")
    kmat = kd.reshape(o, c * kh * kw)

    pointwise = kh == 1 and kw == 1 and stride == 1 and padding == 0
    if pointwise:
        cols = xd.transpose(0, 2, 3, 1).reshape(b * h * w, c)
    else:
        xp = _pad(xd, padding)
        cols = _im2col(xp, kh, kw, stride, ho, wo)
    out = (cols @ kmat.T).reshape(b, ho, wo, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(b * ho * wo, o)
        gx = gk = None
        if kernel.requires_grad:
            gk = (gm.T @ cols).reshape(kd.shape)
        if x.requires_grad:
            if pointwise:
                dcols = gm @ kmat
                gx = dcols.reshape(b, h, w, c).transpose(0, 3, 1, 2)
            elif stride == 1 and padding < min(kh, kw):
                # the adjoint of a stride-1 correlation is a full correlation with the flipped kernel
                flipped = kd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
                gx = _correlate(g, flipped, kh - 1 - padding, kw - 1 - padding)
            else:
                dcols = gm @ kmat
                shape_p = (b, c, h + 2 * padding, w + 2 * padding)
                gx = _unpad(_col2im(dcols, shape_p, kh, kw, stride, ho, wo), padding, h, w)
        return gx, gk, _bias_grad(g, bias)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return make_node(out, parents, backward)


def transpose_output_size(n: int, k: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return stride * (n - 1) + k - 2 * padding + output_padding


def conv2d_transpose(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
    bias: Tensor | None = None,
) -> Tensor:
    """Adjoint of :func:`conv2d` for the same kernel and geometry.

    ``kernel`` has the forward layout ``(out_ch, in_ch, kh, kw)``: the input
    here carries ``out_ch`` channels and the result carries ``in_ch``.
    ``output_padding`` selects among the output extents that map back onto
    the input extent under the forward geometry.
    """
    xd, kd = x.data, kernel.data
    _check(xd, kd, kd.shape[0], stride, padding)
    if output_padding < 0 or (output_padding and output_padding >= stride):
        raise ConfigurationError(f"output_padding {output_padding} must be < stride {stride}")
    b, o, h, w = xd.shape
    _, c, kh, kw = kd.shape
    ho = transpose_output_size(h, kh, stride, padding, output_padding)
    wo = transpose_output_size(w, kw, stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise ConfigurationError(f"transpose conv output would be empty for input {xd.shape}")
    kmat = kd.reshape(o, c * kh * kw)
    xm = xd.transpose(0, 2, 3, 1).reshape(b * h * w, o)
    # padded canvas must hold every tap of the forward geometry
    hp = max(ho + 2 * padding, stride * (h - 1) + kh)
    wp = max(wo + 2 * padding, stride * (w - 1) + kw)
    cols = xm @ kmat
    canvas = _col2im(cols, (b, c, hp, wp), kh, kw, stride, h, w)
    out = np.ascontiguousarray(_unpad(canvas, padding, ho, wo))
    if bias is not None:
        out = out + bias.data.reshape(1, c, 1, 1)

    def backward(g):
        gp = np.zeros((b, c, hp, wp), dtype=g.dtype)
        gp[:, :, padding:padding + ho, padding:padding + wo] = g
        gcols = _im2col(gp, kh, kw, stride, h, w)
        gx = gk = None
        if x.requires_grad:
            gx = (gcols @ kmat.T).reshape(b, h, w, o).transpose(0, 3, 1, 2)
        if kernel.requires_grad:
            gk = (xm.T @ gcols).reshape(kd.shape)
        return gx, gk, _bias_grad(g, bias)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return make_node(out, parents, backward)


def causal_mask(kh: int, kw: int, kind: str = "A") -> np.ndarray:
    """Spatial mask keeping only taps strictly before the centre in raster order."""
    if kind != "A":
        raise ConfigurationError(f"unsupported mask kind {kind!r}")
    if kh % 2 == 0 or kw % 2 == 0 or kh != kw:
        raise ConfigurationError(f"masked convolution needs a square odd kernel, got {kh}x{kw}")
    mask = np.zeros((kh, kw))
    ch, cw = kh // 2, kw // 2
    mask[:ch, :] = 1.0
    mask[ch, :cw] = 1.0
    return mask


def masked_conv2d(x: Tensor, kernel: Tensor, mask_kind: str = "A", bias: Tensor | None = None) -> Tensor:
    """Same-size causal convolution: output at p sees only inputs before p."""
    kh, kw = kernel.shape[-2:]
    mask = causal_mask(kh, kw, mask_kind).astype(kernel.dtype)
    masked = kernel * Tensor(mask)
    return conv2d(x, masked, stride=1, padding=kh // 2, bias=bias)
