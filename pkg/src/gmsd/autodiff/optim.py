"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .nn import Parameter

DEFAULT_LR = 1e-4


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: list[Parameter], state: AdamState, lr: float = DEFAULT_LR,
              grads: list[np.ndarray | None] | None = None) -> None:
    """Apply one Adam update in place.

    ``grads`` defaults to each parameter's ``.grad``; a missing gradient is
    treated as zero so the moments still decay.
    """
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if grads is None:
        grads = [p.grad for p in params]
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g in zip(params, grads):
        if not p.trainable:
            continue
        key = p.name or str(id(p))
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.shape:
            raise ConfigurationError(f"gradient shape {g.shape} does not match parameter {key} {p.shape}")
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (lr / c1) * m / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.dtype, copy=False)
