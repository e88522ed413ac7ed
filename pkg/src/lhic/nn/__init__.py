"""Minimal numpy autodiff engine: exactly the layers the autoencoder uses."""

from . import functional
from .functional import conv2d, conv_transpose2d, dropout, prelu, relu, tanh
from .gradcheck import check_gradients, numerical_gradient
from .layers import Conv2d, ConvTranspose2d, Dropout, Module, PReLU, ReLU, Sequential, Tanh
from .optim import Adam, AdamState, adam_step
from .tensor import Parameter, Tensor, as_tensor

__all__ = [
    "Adam",
    "AdamState",
    "Conv2d",
    "ConvTranspose2d",
    "Dropout",
    "Module",
    "PReLU",
    "Parameter",
    "ReLU",
    "Sequential",
    "Tanh",
    "Tensor",
    "adam_step",
    "as_tensor",
    "check_gradients",
    "conv2d",
    "conv_transpose2d",
    "dropout",
    "functional",
    "numerical_gradient",
    "prelu",
    "relu",
    "tanh",
]
