"""Slow reference implementations used only by the tests."""

import itertools

import numpy as np


def segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t * ab))


def triangle_distance(p, a, b, c):
    """Plane projection if it lands inside (barycentric test), else nearest edge."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    q = p - np.dot(p - a, n) * n
    # barycentric coordinates of the projection via sub-triangle areas
    area = np.dot(np.cross(b - a, c - a), n)
    u = np.dot(np.cross(c - b, q - b), n) / area
    v = np.dot(np.cross(a - c, q - c), n) / area
    w = 1.0 - u - v
    if u >= 0 and v >= 0 and w >= 0:
        return abs(np.dot(p - a, n))
    return min(segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a))


def _segment_many(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def brute_distance(mesh, points):
    """Same formula as :func:`triangle_distance`, vectorized over every triangle."""
    c = mesh.corners()
    a, b, cc = c[:, 0], c[:, 1], c[:, 2]
    n = np.cross(b - a, cc - a)
    n /= np.linalg.norm(n, axis=1)[:, None]
    area = np.einsum("ij,ij->i", np.cross(b - a, cc - a), n)
    out = []
    for p in points:
        h = np.einsum("ij,ij->i", p - a, n)
        q = p - h[:, None] * n
        u = np.einsum("ij,ij->i", np.cross(cc - b, q - b), n) / area
        v = np.einsum("ij,ij->i", np.cross(a - cc, q - cc), n) / area
        w = 1.0 - u - v
        edge = np.minimum(np.minimum(_segment_many(p, a, b), _segment_many(p, b, cc)), _segment_many(p, cc, a))
        d = np.where((u >= 0) & (v >= 0) & (w >= 0), np.abs(h), edge)
        out.append(d.min())
    return np.array(out)


def naive_dft3(f):
    n0, n1, n2 = f.shape
    out = np.zeros(f.shape, dtype=complex)
    x = np.array(list(itertools.product(range(n0), range(n1), range(n2))))
    vals = f.ravel()
    for k in itertools.product(range(n0), range(n1), range(n2)):
        phase = x[:, 0] * k[0] / n0 + x[:, 1] * k[1] / n1 + x[:, 2] * k[2] / n2
        out[k] = np.sum(vals * np.exp(-2j * np.pi * phase))
    return out


def conv3d_loops(x, w, b, stride, pad):
    n, cin, d0, d1, d2 = x.shape
    cout, _, k, _, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad)))
    o = [(d + 2 * pad - k) // stride + 1 for d in (d0, d1, d2)]
    out = np.zeros((n, cout, *o))
    for bi in range(n):
        for co in range(cout):
            for i in range(o[0]):
                for j in range(o[1]):
                    for l in range(o[2]):
                        patch = xp[bi, :, i * stride:i * stride + k, j * stride:j * stride + k,
                                   l * stride:l * stride + k]
                        out[bi, co, i, j, l] = np.sum(patch * w[co]) + (b[co] if b is not None else 0.0)
    return out


def conv_transpose3d_zero_stuffed(x, w, b, stride, pad, output_padding):
    """Insert stride-1 zeros, pad by k-1-p (plus output padding), then a stride-1 conv
    with the spatially flipped, channel-swapped kernel."""
    n, cin, *dims = x.shape
    _, cout, k, _, _ = w.shape
    up = np.zeros((n, cin, *[(d - 1) * stride + 1 for d in dims]))
    up[:, :, ::stride, ::stride, ::stride] = x
    lo = k - 1 - pad
    hi = k - 1 - pad + output_padding
    up = np.pad(up, ((0, 0), (0, 0), (lo, hi), (lo, hi), (lo, hi)))
    wf = np.flip(w, axis=(2, 3, 4)).transpose(1, 0, 2, 3, 4)
    return conv3d_loops(up, wf, b, 1, 0)


def numeric_grad(f, x, h=1e-4):
    """Central differences of scalar ``f`` with respect to array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def sphere_sdf(points, r):
    return r - np.linalg.norm(points, axis=-1)


def box_inside(points, lo, hi):
    return np.all((points > lo) & (points < hi), axis=-1)
