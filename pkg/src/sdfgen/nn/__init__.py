"""Minimal float64 autodiff kernel for the generator and discriminator networks."""

from .layers import BatchNorm, Conv3d, ConvTranspose3d, Linear, Module, frozen_stats
from .optim import Adam, AdamState, adam_step
from .tensor import GraphError, Parameter, Tensor, no_grad

__all__ = [
    "Adam", "AdamState", "BatchNorm", "Conv3d", "ConvTranspose3d", "GraphError", "Linear",
    "Module", "Parameter", "Tensor", "adam_step", "frozen_stats", "no_grad",
]
