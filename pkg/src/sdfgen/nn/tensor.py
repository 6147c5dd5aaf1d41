"""Dense float64 tensors with tape-based reverse-mode differentiation.

Only the operations the generator/discriminator networks need are
provided. Every op checks its result for NaN/Inf and raises
``FloatingPointError`` on the spot, so a diverging run fails where it
diverges rather than several layers later.
"""

from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Run forward passes without recording the graph."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class GraphError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_freed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._freed = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return self._backward is None and not self._freed

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``, then free the graph."""
        if self._freed:
            raise GraphError("graph already consumed by an earlier backward(); run forward again")
        if grad is None:
            if self.data.size != 1:
                raise GraphError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node._freed:
                raise GraphError("graph contains a node consumed by an earlier backward()")
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if node._backward is None:
                if node.requires_grad and g is not None:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if g is not None:
                for parent, pg in zip(node._parents, node._backward(g)):
                    if pg is None or not parent.requires_grad:
                        continue
                    grads[id(parent)] = grads[id(parent)] + pg if id(parent) in grads else pg
            node._parents = ()
            node._backward = None
            node._freed = True

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value produced in forward pass")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def abs_(a: Tensor) -> Tensor:
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(a.data)  # non-positive input is reported by _result
    return _result(y, (a,), lambda g: (g / a.data,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def sum_(a: Tensor) -> Tensor:
    return _result(np.array(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _result(np.array(a.data.mean()), (a,), lambda g: (np.full(a.shape, float(g) / n),))


def mean_per_sample(a: Tensor) -> Tensor:
    """Mean over every axis but the first."""
    n = a.data[0].size
    axes = tuple(range(1, a.data.ndim))
    return _result(a.data.mean(axis=axes), (a,),
                   lambda g: (np.broadcast_to(g.reshape((-1,) + (1,) * len(axes)), a.shape) / n,))


def reshape(a: Tensor, shape) -> Tensor:
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors, axis: int = 1) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                   lambda g: tuple(np.split(g, cuts, axis=axis)))


# activations

#: largest float64 below 1; keeps tanh outputs strictly inside (-1, 1)
_TANH_MAX = np.nextafter(1.0, 0.0)


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return _result(np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,))


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    """max(x, alpha * x) for 0 < alpha < 1."""
    slope = np.where(x.data >= 0, 1.0, alpha)
    return _result(x.data * slope, (x,), lambda g: (g * slope,))


def tanh(x: Tensor) -> Tensor:
    y = np.clip(np.tanh(x.data), -_TANH_MAX, _TANH_MAX)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


# dense layers

def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with weight shaped (out, in)."""
    y = x.data @ weight.data.T
    if bias is not None:
        y = y + bias.data

    def backward(g):
        gx = g @ weight.data
        gw = g.T @ x.data
        return (gx, gw) + ((g.sum(axis=0),) if bias is not None else ())

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return _result(y, parents, backward)


def _out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _windows(buf: np.ndarray, k: int, stride: int, out: tuple) -> np.ndarray:
    """Strided k^3 patches of ``buf`` (N, C, X, Y, Z) -> (N, C, oX, oY, oZ, k, k, k)."""
    w = sliding_window_view(buf, (k, k, k), axis=(2, 3, 4))
    return w[:, :, ::stride, ::stride, ::stride][:, :, :out[0], :out[1], :out[2]]


def _scatter(cols: np.ndarray, buf_shape: tuple, stride: int) -> np.ndarray:
    """Adjoint of :func:`_windows`. ``cols`` is (C, k, k, k, N, i, j, l); returns (N, C, *buf_shape)."""
    c, k = cols.shape[0], cols.shape[1]
    n, i, j, l = cols.shape[4:]
    buf = np.zeros((c, n) + tuple(buf_shape))
    s = stride
    for a in range(k):
        for b in range(k):
            for d in range(k):
                buf[:, :, a:a + s * i:s, b:b + s * j:s, d:d + s * l:s] += cols[:, a, b, d]
    return buf.transpose(1, 0, 2, 3, 4)


def _check_conv_shapes(x, w, in_axis):
    if x.data.ndim != 5:
        raise ValueError(f"expected (N, C, D, H, W) input, got {x.shape}")
    if w.data.ndim != 5 or w.shape[2] != w.shape[3] or w.shape[3] != w.shape[4]:
        raise ValueError(f"expected cubic kernel, got {w.shape}")
    if x.shape[1] != w.shape[in_axis]:
        raise ValueError(f"channel mismatch: input {x.shape[1]}, kernel expects {w.shape[in_axis]}")


def conv3d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation; weight shaped (C_out, C_in, k, k, k)."""
    _check_conv_shapes(x, weight, 1)
    k = weight.shape[2]
    sp = x.shape[2:]
    out = tuple(_out_size(n, k, stride, padding) for n in sp)
    if min(out) < 1:
        raise ValueError(f"kernel {k} with padding {padding} does not fit input {sp}")
    p = padding
    buf = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))
    win = _windows(buf, k, stride, out)
    y = np.tensordot(win, weight.data, axes=([1, 5, 6, 7], [1, 2, 3, 4])).transpose(0, 4, 1, 2, 3)
    if bias is not None:
        y = y + bias.data[None, :, None, None, None]

    def backward(g):
        gw = np.tensordot(g, win, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        cols = np.tensordot(weight.data, g, axes=([0], [1]))
        gbuf = _scatter(cols, buf.shape[2:], stride)
        gx = gbuf[:, :, p:p + sp[0], p:p + sp[1], p:p + sp[2]]
        res = (gx, gw)
        if bias is not None:
            res += (g.sum(axis=(0, 2, 3, 4)),)
        return res

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return _result(y, parents, backward)


def conv_transpose3d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 2,
                     padding: int = 2, output_padding: int = 1) -> Tensor:
    """Transposed convolution; weight shaped (C_in, C_out, k, k, k).

    Output size per axis is ``stride * (n - 1) + k - 2 * padding + output_padding``;
    the defaults with k = 5 double every spatial dimension.
    """
    _check_conv_shapes(x, weight, 0)
    if output_padding > padding:
        raise ValueError("output_padding must not exceed padding")
    k = weight.shape[2]
    sp = x.shape[2:]
    s, p = stride, padding
    out = tuple(s * (n - 1) + k - 2 * p + output_padding for n in sp)
    full = tuple(s * (n - 1) + k for n in sp)
    cols = np.tensordot(weight.data, x.data, axes=([0], [1]))
    buf = _scatter(cols, full, s)
    y = buf[:, :, p:p + out[0], p:p + out[1], p:p + out[2]]
    if bias is not None:
        y = y + bias.data[None, :, None, None, None]

    def backward(g):
        gbuf = np.zeros(buf.shape)
        gbuf[:, :, p:p + out[0], p:p + out[1], p:p + out[2]] = g
        win = _windows(gbuf, k, s, sp)
        gx = np.tensordot(win, weight.data, axes=([1, 5, 6, 7], [1, 2, 3, 4])).transpose(0, 4, 1, 2, 3)
        gw = np.tensordot(x.data, win, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        res = (gx, gw)
        if bias is not None:
            res += (g.sum(axis=(0, 2, 3, 4)),)
        return res

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return _result(np.ascontiguousarray(y), parents, backward)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, mean_: np.ndarray | None = None,
               var: np.ndarray | None = None, eps: float = 1e-5):
    """Per-channel normalization over every axis except 1.

    With ``mean_``/``var`` given (eval mode) those statistics are used;
    otherwise batch statistics are computed. Returns ``(y, batch_mean, batch_var)``
    where the batch statistics are None in eval mode.
    """
    axes = (0,) + tuple(range(2, x.data.ndim))
    bshape = (1, -1) + (1,) * (x.data.ndim - 2)
    training = mean_ is None
    if training:
        m = x.data.size // x.shape[1]
        if m < 2:
            raise ValueError("batch norm in train mode needs at least 2 values per channel")
        mu = x.data.mean(axis=axes)
        v = x.data.var(axis=axes)
    else:
        mu, v = mean_, var
    inv = 1.0 / np.sqrt(v + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv.reshape(bshape)
    y = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def backward(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            gx = inv.reshape(bshape) / m * (
                m * dxhat - dxhat.sum(axis=axes).reshape(bshape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape))
        else:
            gx = dxhat * inv.reshape(bshape)
        return gx, gg, gb

    out = _result(y, (x, gamma, beta), backward)
    return out, (mu if training else None), (v if training else None)
