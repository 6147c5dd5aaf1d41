from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor

INIT_STD = 0.02


class Module:
    """Container with ordered parameters and buffers.

    Parameters, buffers and sub-modules are discovered from instance
    attributes in assignment order, which fixes the checkpoint layout.
    """

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield f"{name}.{i}", v

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for name in getattr(self, "_buffers", ()):
            yield prefix + name, getattr(self, name)
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def state(self) -> list[tuple[str, np.ndarray]]:
        """Parameters then buffers, in declaration order."""
        return [(n, p.data) for n, p in self.named_parameters()] + list(self.named_buffers())

    def load_state(self, arrays: dict) -> None:
        for name, p in self.named_parameters():
            if arrays[name].shape != p.shape:
                raise ValueError(f"{name}: shape {arrays[name].shape} != {p.shape}")
            p.data = np.array(arrays[name], dtype=np.float64)
        for name, _ in self.named_buffers():
            owner, attr = self._resolve(name)
            setattr(owner, attr, np.array(arrays[name], dtype=np.float64))

    def _resolve(self, dotted: str):
        obj = self
        *path, attr = dotted.split(".")
        for part in path:
            obj = obj[int(part)] if isinstance(obj, (list, tuple)) else getattr(obj, part)
        return obj, attr

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for _, a in self.state():
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, INIT_STD, (n_out, n_in)))
        self.bias = Parameter(np.zeros(n_out))

    def forward(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class Conv3d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0):
        self.weight = Parameter(rng.normal(0.0, INIT_STD, (c_out, c_in, kernel, kernel, kernel)))
        self.bias = Parameter(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return T.conv3d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose3d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 5,
                 stride: int = 2, padding: int = 2, output_padding: int = 1):
        self.weight = Parameter(rng.normal(0.0, INIT_STD, (c_in, c_out, kernel, kernel, kernel)))
        self.bias = Parameter(np.zeros(c_out))
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding

    def forward(self, x: Tensor) -> Tensor:
        return T.conv_transpose3d(x, self.weight, self.bias, self.stride, self.padding, self.output_padding)


class BatchNorm(Module):
    """Batch normalization over the channel axis (axis 1) of any-rank input."""

    _buffers = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps
        # cleared to evaluate with batch statistics without touching the running ones
        self.track_stats = True

    def forward(self, x: Tensor) -> Tensor:
        if not self.training:
            y, _, _ = T.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var, self.eps)
            return y
        y, mu, var = T.batch_norm(x, self.gamma, self.beta, eps=self.eps)
        if self.track_stats:
            m = x.data.size // x.shape[1]
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var * m / (m - 1)
        return y


class frozen_stats:
    """Context manager: batch-norm layers of ``module`` stop updating running statistics."""

    def __init__(self, module: Module):
        self.layers = [m for m in _walk(module) if isinstance(m, BatchNorm)]

    def __enter__(self):
        for m in self.layers:
            m.track_stats = False
        return self

    def __exit__(self, *exc):
        for m in self.layers:
            m.track_stats = True


def _walk(module: Module):
    yield module
    for _, child in module._children():
        yield from _walk(child)
