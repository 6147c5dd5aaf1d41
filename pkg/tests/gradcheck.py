"""Finite-difference gradient checks shared by the unit and acceptance suites."""

import numpy as np

from oracles import numeric_grad
from sdfgen.nn import Tensor
from sdfgen.nn import tensor as T

H = 1e-4
TOL = 1e-4


def away_from_kinks(a, margin=1e-2):
    # push values off piecewise-linear kinks so central differences stay one-sided-free
    return np.where(np.abs(a) < margin, np.sign(a + 1e-300) * margin + a, a)


def check(fn, arrays, rng):
    """Max over inputs of |analytic - numeric| / max(1, |numeric|) for loss = sum(fn(...) * R)."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    probe = fn(*[Tensor(a) for a in arrays])
    weights = rng.normal(size=probe.shape)

    def loss_value():
        return float(np.sum(fn(*[Tensor(a) for a in arrays]).data * weights))

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    T.sum_(T.mul(fn(*leaves), Tensor(weights))).backward()
    worst = 0.0
    for leaf, a in zip(leaves, arrays):
        num = numeric_grad(loss_value, a, H)
        ana = leaf.grad if leaf.grad is not None else np.zeros_like(a)
        worst = max(worst, float(np.max(np.abs(ana - num) / np.maximum(1.0, np.abs(num)))))
    return worst


def _off_clip_bounds(x):
    return np.sign(x) * (away_from_kinks(np.abs(x) - 0.5) + 0.5)


def _dims(rng, lo, hi, n):
    return tuple(int(d) for d in rng.integers(lo, hi + 1, n))


def _conv_case(rng):
    k = int(rng.choice([1, 3, 5]))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    n, cin, cout = _dims(rng, 1, 2, 3)
    sp = _dims(rng, max(1, k - 2 * pad), max(1, k - 2 * pad) + 2, 3)
    return (lambda x, w, b: T.conv3d(x, w, b, stride, pad),
            [rng.normal(size=(n, cin) + sp), rng.normal(size=(cout, cin, k, k, k)), rng.normal(size=cout)])


def _upconv_case(rng):
    k = int(rng.choice([3, 5]))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    op = int(rng.integers(0, min(pad, stride - 1) + 1))
    n, cin, cout = _dims(rng, 1, 2, 3)
    sp = _dims(rng, 1, 3, 3)
    return (lambda x, w, b: T.conv_transpose3d(x, w, b, stride, pad, op),
            [rng.normal(size=(n, cin) + sp), rng.normal(size=(cin, cout, k, k, k)), rng.normal(size=cout)])


def _bn_case(rng):
    n, c = int(rng.integers(2, 4)), int(rng.integers(1, 3))
    sp = _dims(rng, 1, 3, int(rng.integers(0, 4)))
    return (lambda x, g, b: T.batch_norm(x, g, b)[0],
            [rng.normal(size=(n, c) + sp) * 2 + 1, rng.normal(size=c), rng.normal(size=c)])


def _bn_eval_case(rng):
    n, c = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    sp = _dims(rng, 1, 3, 3)
    mu, var = rng.normal(size=c), rng.uniform(0.5, 2, c)
    return (lambda x, g, b: T.batch_norm(x, g, b, mu, var)[0],
            [rng.normal(size=(n, c) + sp), rng.normal(size=c), rng.normal(size=c)])


def _linear_case(rng):
    n, i, o = _dims(rng, 1, 5, 3)
    return (lambda x, w, b: T.linear(x, w, b), [rng.normal(size=(n, i)), rng.normal(size=(o, i)), rng.normal(size=o)])


def _unary(op, sampler=lambda rng, s: rng.normal(size=s)):
    def case(rng):
        return op, [sampler(rng, _dims(rng, 1, 4, int(rng.integers(1, 4))))]
    return case


def _binary(op):
    def case(rng):
        s = _dims(rng, 1, 4, int(rng.integers(1, 4)))
        # broadcast the second operand over a random subset of axes
        s2 = tuple(1 if rng.random() < 0.3 else d for d in s)
        return op, [rng.normal(size=s), rng.normal(size=s2)]
    return case


def _concat_case(rng):
    s = _dims(rng, 1, 3, 3)
    return (lambda a, b: T.concat([a, b], axis=1),
            [rng.normal(size=s), rng.normal(size=(s[0], int(rng.integers(1, 3)), s[2]))])


LAYERS = {
    "linear": _linear_case,
    "conv3d": _conv_case,
    "conv_transpose3d": _upconv_case,
    "batch_norm_train": _bn_case,
    "batch_norm_eval": _bn_eval_case,
    "relu": _unary(T.relu, lambda rng, s: away_from_kinks(rng.normal(size=s))),
    "leaky_relu": _unary(lambda x: T.leaky_relu(x, 0.2), lambda rng, s: away_from_kinks(rng.normal(size=s))),
    "tanh": _unary(T.tanh),
    "sigmoid": _unary(T.sigmoid, lambda rng, s: rng.normal(size=s) * 4),
    "log": _unary(T.log, lambda rng, s: rng.uniform(0.1, 2, s)),
    "abs": _unary(T.abs_, lambda rng, s: away_from_kinks(rng.normal(size=s))),
    "clip": _unary(lambda x: T.clip(x, -0.5, 0.5), lambda rng, s: _off_clip_bounds(rng.normal(size=s))),
    "mean": _unary(T.mean),
    "mean_per_sample": _unary(T.mean_per_sample),
    "sum": _unary(T.sum_),
    "reshape": _unary(lambda x: T.reshape(x, (-1,))),
    "add": _binary(T.add),
    "mul": _binary(T.mul),
    "concat": _concat_case,
}


def run_all(n_shapes=20, seed=0):
    """{layer: worst relative error over ``n_shapes`` random cases}."""
    out = {}
    for name, case in LAYERS.items():
        rng = np.random.default_rng([seed, len(name)] + [ord(c) for c in name])
        worst = 0.0
        for _ in range(n_shapes):
            fn, arrays = case(rng)
            worst = max(worst, check(fn, arrays, rng))
        out[name] = worst
    return out


def adjointness(rng, n_cases=10):
    """max |<conv(x), y> - <x, upconv(y)>| / scale using the same kernel array."""
    worst = 0.0
    done = 0
    while done < n_cases:
        k = int(rng.choice([3, 5]))
        s = int(rng.integers(1, 3))
        p = int(rng.integers(0, k // 2 + 1))
        cin, cout, n = (int(v) for v in rng.integers(1, 4, 3))
        sp = (int(rng.integers(k, k + 5)),) * 3
        if (sp[0] + 2 * p - k) % s > p:
            continue  # output_padding would exceed padding
        done += 1
        x = rng.normal(size=(n, cin) + sp)
        w = rng.normal(size=(cout, cin, k, k, k))
        y_shape = T.conv3d(Tensor(x), Tensor(w), None, s, p).shape
        y = rng.normal(size=y_shape)
        # conv weight (C_out, C_in, ...) is read by the transposed op as (C_in', C_out') = (C_out, C_in)
        op = sp[0] - (s * (y_shape[2] - 1) + k - 2 * p)
        lhs = np.sum(T.conv3d(Tensor(x), Tensor(w), None, s, p).data * y)
        up = T.conv_transpose3d(Tensor(y), Tensor(w), None, s, p, op).data
        rhs = np.sum(x * up)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst
