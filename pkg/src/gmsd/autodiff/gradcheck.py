"""Central finite-difference checks against the tape's analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .branches import record_branches
from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-5,
                 indices: Sequence[tuple[int, ...]] | None = None) -> dict[tuple[int, ...], float]:
    """d fn() / d t at ``indices`` (all entries when None) by central differences."""
    if indices is None:
        indices = list(np.ndindex(t.shape))
    out = {}
    for idx in indices:
        orig = t.data[idx]
        t.data[idx] = orig + eps
        plus = float(fn().data.sum())
        t.data[idx] = orig - eps
        minus = float(fn().data.sum())
        t.data[idx] = orig
        out[idx] = (plus - minus) / (2.0 * eps)
    return out


def _traced(fn: Callable[[], Tensor]) -> tuple[float, list[bytes]]:
    with record_branches() as trace:
        value = float(fn().data.sum())
    return value, trace


def piecewise_numeric_grad(fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-4,
                           indices: Sequence[tuple[int, ...]] | None = None,
                           min_eps: float = 1e-9) -> dict[tuple[int, ...], float]:
    """Central differences whose stencil never straddles a kink.

    The step starts at ``eps`` and is quartered until both probes take the
    same branches as the base point. Entries that cannot be resolved above
    ``min_eps`` (the base point sits on a kink) are returned as NaN.
    """
    if indices is None:
        indices = list(np.ndindex(t.shape))
    _, base = _traced(fn)
    out = {}
    for idx in indices:
        orig = t.data[idx]
        h, value = eps, float("nan")
        while h >= min_eps:
            t.data[idx] = orig + h
            plus, tp = _traced(fn)
            t.data[idx] = orig - h
            minus, tm = _traced(fn)
            t.data[idx] = orig
            if tp == base and tm == base:
                value = (plus - minus) / (2.0 * h)
                break
            h /= 4.0
        out[idx] = value
    return out


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor], eps: float = 1e-5,
                    max_entries: int | None = None, rng: np.random.Generator | None = None,
                    floor: float = 1e-8, piecewise: bool = False) -> float:
    """Return the max relative error between tape and finite-difference gradients.

    ``fn`` must rebuild the graph on every call and return a scalar. With
    ``max_entries`` set, that many entries per tensor are sampled with ``rng``.
    ``piecewise`` switches to :func:`piecewise_numeric_grad` (``eps`` is then
    the starting step); entries sitting exactly on a kink are skipped.
    """
    for t in tensors:
        t.grad = None
    loss = fn()
    loss.backward()
    analytic = {id(t): (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for t in tensors}
    worst = 0.0
    for t in tensors:
        if max_entries is not None and t.size > max_entries:
            rng = rng or np.random.default_rng(0)
            flat = rng.choice(t.size, size=max_entries, replace=False)
            indices = [np.unravel_index(i, t.shape) for i in flat]
        else:
            indices = None
        num = piecewise_numeric_grad(fn, t, eps, indices) if piecewise else numeric_grad(fn, t, eps, indices)
        num = {k: v for k, v in num.items() if np.isfinite(v)}
        a = np.array([analytic[id(t)][idx] for idx in num])
        n = np.array(list(num.values()))
        if a.size:
            worst = max(worst, float(relative_error(a, n, floor).max()))
    return worst
