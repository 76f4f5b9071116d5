"""Differentiable primitives on :class:`~gmsd.autodiff.tensor.Tensor`.

Each function computes its forward value with numpy and registers a closure
that maps the output gradient to one gradient per parent.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import special

from ..errors import ConfigurationError
from .branches import note
from .tensor import Tensor, make_node

LEAKY_SLOPE = 0.2


def _lift(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    b = _lift(b)
    return _lift(a, b), b


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- arithmetic ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_node(ad * bd, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        ga = unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, p: float) -> Tensor:
    ad = a.data
    return make_node(ad**p, (a,), lambda g: (g * p * ad ** (p - 1),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return make_node(np.log(ad), (a,), lambda g: (g / ad,))


def log2(a: Tensor) -> Tensor:
    ad = a.data
    inv_ln2 = 1.0 / np.log(2.0)
    return make_node(np.log2(ad), (a,), lambda g: (g * inv_ln2 / ad,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return make_node(out, (a,), lambda g: (g * 0.5 / out,))


def abs(a: Tensor) -> Tensor:  # noqa: A001
    ad = a.data
    note(ad > 0)
    note(ad < 0)
    return make_node(np.abs(ad), (a,), lambda g: (g * np.sign(ad),))


def maximum(a: Tensor, floor: float) -> Tensor:
    """Elementwise ``max(a, floor)``; gradient passes only where ``a > floor``."""
    ad = a.data
    keep = ad > floor
    note(keep)
    out = np.where(keep, ad, np.asarray(floor, dtype=ad.dtype))
    return make_node(out, (a,), lambda g: (g * keep,))


def clamp(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    ad = a.data
    out = np.clip(ad, lo, hi)
    inside = np.ones(ad.shape, dtype=bool)
    if lo is not None:
        inside &= ad >= lo
    if hi is not None:
        inside &= ad <= hi
    note(inside)
    return make_node(out, (a,), lambda g: (g * inside,))


# -- reductions and shape ----------------------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return make_node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.mean(a.data, axis=axis, keepdims=keepdims)
    count = a.data.size // max(out.size, 1)
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape),)

    return make_node(out, (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    return make_node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def getitem(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        if _is_advanced(index):
            np.add.at(full, index, g)
        else:
            full[index] = g
        return (full,)

    return make_node(a.data[index], (a,), backward)


def _is_advanced(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def split(a: Tensor, sections: int, axis: int = 1) -> list[Tensor]:
    n = a.shape[axis]
    if n % sections:
        raise ConfigurationError(f"cannot split extent {n} into {sections} equal parts")
    step = n // sections
    out = []
    for i in range(sections):
        index = [slice(None)] * a.ndim
        index[axis] = slice(i * step, (i + 1) * step)
        out.append(getitem(a, tuple(index)))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the trailing two axes."""
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_node(ad @ bd, (a, b), backward)


# -- activations ---------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    note(mask)
    return make_node(a.data * mask, (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    ad = a.data
    note(ad > 0)
    factor = np.where(ad > 0, 1.0, slope).astype(ad.dtype)
    return make_node(ad * factor, (a,), lambda g: (g * factor,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = special.expit(a.data)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Tensor) -> Tensor:
    ad = a.data
    out = np.logaddexp(0.0, ad).astype(ad.dtype, copy=False)
    return make_node(out, (a,), lambda g: (g * special.expit(ad),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (a,), backward)


def ndtr(a: Tensor) -> Tensor:
    """Standard normal CDF; derivative is the standard normal density."""
    ad = a.data
    inv_sqrt_2pi = 1.0 / np.sqrt(2.0 * np.pi)

    def backward(g):
        return (g * (inv_sqrt_2pi * np.exp(-0.5 * ad * ad)),)

    return make_node(special.ndtr(ad), (a,), backward)


ACTIVATIONS = {
    "leaky_relu": leaky_relu,
    "relu": relu,
    "tanh": tanh,
    "softplus": softplus,
    "exp": exp,
    "sigmoid": sigmoid,
}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}") from None
    return fn(a)


# -- pooling -----------------------------------------------------------------

def avg_pool2(a: Tensor) -> Tensor:
    """2x2 average pooling, stride 2. Odd extents are padded symmetrically at the far edge."""
    ad = a.data
    h, w = ad.shape[-2:]
    ph, pw = h % 2, w % 2
    if ph or pw:
        ad = np.pad(ad, [(0, 0)] * (ad.ndim - 2) + [(0, ph), (0, pw)], mode="symmetric")
    hh, ww = ad.shape[-2] // 2, ad.shape[-1] // 2
    lead = ad.shape[:-2]
    out = ad.reshape(*lead, hh, 2, ww, 2).mean(axis=(-3, -1))

    def backward(g):
        up = np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25
        if ph:
            up[..., h - 1, :] += up[..., h, :]
            up = up[..., :h, :]
        if pw:
            up[..., :, w - 1] += up[..., :, w]
            up = up[..., :, :w]
        return (up,)

    return make_node(out, (a,), backward)
