"""Parameters, a small module system and the conv layers the codec is built from."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as F
from .conv import conv2d, conv2d_transpose, masked_conv2d
from .tensor import Tensor


class Parameter(Tensor):
    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable


class Module:
    """Registers parameters and submodules assigned as attributes, in order."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, key, value):
        if isinstance(value, Parameter):
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, p in self._params.items():
            yield prefix + key, p
        for key, child in self._children.items():
            yield from child.named_parameters(prefix + key + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self) -> None:
        for name, p in self.named_parameters():
            p.name = name

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items: list[Module] = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    # variance 1/fan_in
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, stride: int = 1, *, rng: np.random.Generator,
                 dtype=np.float32, padding: int | None = None):
        super().__init__()
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.weight = Parameter(fan_in_uniform(rng, (cout, cin, k, k), cin * k * k, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.stride, self.padding, bias=self.bias)


class ConvTranspose2d(Module):
    """Upsampling by ``stride``: output extent is exactly ``stride * input``."""

    def __init__(self, cin: int, cout: int, k: int, stride: int = 2, *, rng: np.random.Generator,
                 dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.padding = k // 2
        self.output_padding = stride - 1
        # forward-conv layout: (channels produced by the matching conv, channels we emit)
        fan_in = cin * k * k // (stride * stride)
        self.weight = Parameter(fan_in_uniform(rng, (cin, cout, k, k), max(fan_in, 1), dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return conv2d_transpose(x, self.weight, self.stride, self.padding, self.output_padding, bias=self.bias)


class MaskedConv2d(Module):
    """Causal type-A convolution used as the autoregressive context model."""

    def __init__(self, cin: int, cout: int, k: int = 5, *, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        n_active = (k * k) // 2
        self.weight = Parameter(fan_in_uniform(rng, (cout, cin, k, k), cin * n_active, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return masked_conv2d(x, self.weight, "A", bias=self.bias)


class ResidualBlock(Module):
    def __init__(self, ch: int, *, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv1 = Conv2d(ch, ch, 3, rng=rng, dtype=dtype)
        self.conv2 = Conv2d(ch, ch, 3, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        h = F.leaky_relu(self.conv1(x))
        h = F.leaky_relu(self.conv2(h))
        return x + h


class Sequential(Module):
    """Layers and plain callables (activations) applied in order."""

    def __init__(self, *steps):
        super().__init__()
        self._steps = []
        for i, step in enumerate(steps):
            if isinstance(step, Module):
                setattr(self, str(i), step)
            self._steps.append(step)

    def forward(self, x: Tensor) -> Tensor:
        for step in self._steps:
            x = step(x)
        return x

    def __iter__(self):
        return iter(self._steps)

    def __len__(self) -> int:
        return len(self._steps)
