from . import functional
from .checkpoint import dump_checkpoint, fnv1a64, load_checkpoint
from .conv import causal_mask, conv2d, conv2d_transpose, masked_conv2d
from .functional import activation
from .nn import Conv2d, ConvTranspose2d, MaskedConv2d, Module, ModuleList, Parameter, ResidualBlock, Sequential
from .optim import DEFAULT_LR, AdamState, adam_step
from .tensor import Tensor, as_tensor, is_grad_enabled, no_grad
from .tensor import make_node as make_node_public

__all__ = [
    "AdamState",
    "Conv2d",
    "ConvTranspose2d",
    "DEFAULT_LR",
    "MaskedConv2d",
    "Module",
    "ModuleList",
    "Parameter",
    "ResidualBlock",
    "Sequential",
    "Tensor",
    "activation",
    "adam_step",
    "as_tensor",
    "causal_mask",
    "conv2d",
    "conv2d_transpose",
    "dump_checkpoint",
    "fnv1a64",
    "functional",
    "is_grad_enabled",
    "load_checkpoint",
    "make_node_public",
    "masked_conv2d",
    "no_grad",
]
