"""Mesh to signed distance field conversion.

Unsigned distance comes from a branch-and-bound query over an AABB tree;
the sign comes from the generalized winding number, which stays meaningful
for meshes with holes. Positive values are inside.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numba
import numpy as np

from .grid import SdfGrid, canonical_points
from .mesh import TriMesh

DEFAULT_LEAF_CAPACITY = 8
DEFAULT_THRESHOLD = 0.5

# the TBB layer available here is too old and only produces a warning
numba.config.THREADING_LAYER = os.environ.get("NUMBA_THREADING_LAYER", "workqueue")
if os.environ.get("SDFGEN_THREADS"):
    numba.set_num_threads(int(os.environ["SDFGEN_THREADS"]))


@dataclass(frozen=True)
class AabbTree:
    """Flat binary bounding-volume hierarchy.

    Node ``n`` covers ``order[start[n]:start[n] + count[n]]``; inner nodes have
    ``count == 0`` and children ``left[n]``, ``right[n]``. Node 0 is the root.
    """

    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    leaf_capacity: int

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def leaves(self):
        for n in range(self.n_nodes):
            if self.count[n] > 0:
                yield n, self.order[self.start[n]:self.start[n] + self.count[n]]


def build_tree(mesh: TriMesh, leaf_capacity: int = DEFAULT_LEAF_CAPACITY) -> AabbTree:
    """Median split on the longest axis of the centroid bounding box."""
    if mesh.n_triangles == 0:
        raise ValueError("cannot build a tree over an empty mesh")
    if leaf_capacity < 1:
        raise ValueError("leaf capacity must be positive")
    corners = mesh.corners()
    tri_lo = corners.min(axis=1)
    tri_hi = corners.max(axis=1)
    centroids = corners.mean(axis=1)
    order = np.arange(mesh.n_triangles)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(a, b):
        idx = order[a:b]
        lo.append(tri_lo[idx].min(axis=0))
        hi.append(tri_hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(a)
        count.append(0)
        return len(lo) - 1

    stack = [(new_node(0, len(order)), 0, len(order))]
    while stack:
        node, a, b = stack.pop()
        if b - a <= leaf_capacity:
            count[node] = b - a
            continue
        idx = order[a:b]
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        # stable sort keeps construction deterministic for tied centroids
        order[a:b] = idx[np.argsort(c[:, axis], kind="stable")]
        mid = (a + b) // 2
        left[node] = new_node(a, mid)
        right[node] = new_node(mid, b)
        stack.append((right[node], mid, b))
        stack.append((left[node], a, mid))

    return AabbTree(np.array(lo), np.array(hi), np.array(left, dtype=np.int64),
                    np.array(right, dtype=np.int64), np.array(start, dtype=np.int64),
                    np.array(count, dtype=np.int64), order.astype(np.int64), leaf_capacity)


@numba.njit(cache=True)
def _closest_point(p, a, b, c):
    # Voronoi-region walk over vertices, edges and the face
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a
    bp = p - b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return a + (d1 / (d1 - d3)) * ab
    cp = p - c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return a + (d2 / (d2 - d6)) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


def point_triangle_distance(p, tri) -> tuple[float, np.ndarray]:
    """Distance from ``p`` to the closed triangle ``tri`` (3x3) and the closest point."""
    tri = np.asarray(tri, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])) == 0.0:
        raise ValueError("degenerate triangle")
    q = _closest_point(p, tri[0], tri[1], tri[2])
    return float(np.sqrt(((p - q) ** 2).sum())), q


@numba.njit(cache=True)
def _box_dist2(p, lo, hi):
    d = 0.0
    for a in range(3):
        if p[a] < lo[a]:
            d += (lo[a] - p[a]) ** 2
        elif p[a] > hi[a]:
            d += (p[a] - hi[a]) ** 2
    return d


@numba.njit(cache=True)
def _query_one(p, corners, lo, hi, left, right, start, count, order):
    best = np.inf
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        n = stack[top]
        if _box_dist2(p, lo[n], hi[n]) >= best:
            continue
        if count[n] > 0:
            for s in range(start[n], start[n] + count[n]):
                t = order[s]
                q = _closest_point(p, corners[t, 0], corners[t, 1], corners[t, 2])
                d = ((p - q) ** 2).sum()
                if d < best:
                    best = d
            continue
        l, r = left[n], right[n]
        dl = _box_dist2(p, lo[l], hi[l])
        dr = _box_dist2(p, lo[r], hi[r])
        # push the farther child first so the nearer one is popped next
        if dl <= dr:
            stack[top] = r
            stack[top + 1] = l
        else:
            stack[top] = l
            stack[top + 1] = r
        top += 2
    return np.sqrt(best)


@numba.njit(cache=True, parallel=True)
def _query_many(points, corners, lo, hi, left, right, start, count, order):
    out = np.empty(len(points))
    for i in numba.prange(len(points)):
        out[i] = _query_one(points[i], corners, lo, hi, left, right, start, count, order)
    return out


def unsigned_distance(tree: AabbTree, mesh: TriMesh, points) -> np.ndarray | float:
    """Distance from each point to the nearest triangle of ``mesh``."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.ascontiguousarray(pts.reshape(-1, 3))
    d = _query_many(pts, mesh.corners(), tree.lo, tree.hi, tree.left, tree.right,
                    tree.start, tree.count, tree.order)
    return float(d[0]) if single else d


@numba.njit(cache=True)
def _winding_one(px, py, pz, corners):
    total = 0.0
    for t in range(corners.shape[0]):
        ax = corners[t, 0, 0] - px
        ay = corners[t, 0, 1] - py
        az = corners[t, 0, 2] - pz
        bx = corners[t, 1, 0] - px
        by = corners[t, 1, 1] - py
        bz = corners[t, 1, 2] - pz
        cx = corners[t, 2, 0] - px
        cy = corners[t, 2, 1] - py
        cz = corners[t, 2, 2] - pz
        la = np.sqrt(ax * ax + ay * ay + az * az)
        lb = np.sqrt(bx * bx + by * by + bz * bz)
        lc = np.sqrt(cx * cx + cy * cy + cz * cz)
        det = ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)
        den = (la * lb * lc + (ax * bx + ay * by + az * bz) * lc
               + (bx * cx + by * cy + bz * cz) * la + (cx * ax + cy * ay + cz * az) * lb)
        total += np.arctan2(det, den)
    # each triangle subtends 2 * atan2(det, den); the sum is divided by 4 pi
    return total / (2.0 * np.pi)


@numba.njit(cache=True, parallel=True)
def _winding_many(points, corners):
    out = np.empty(len(points))
    for i in numba.prange(len(points)):
        out[i] = _winding_one(points[i, 0], points[i, 1], points[i, 2], corners)
    return out


def winding_number(mesh: TriMesh, points) -> np.ndarray | float:
    """Generalized winding number: summed signed solid angles over 4*pi.

    About 1 inside and 0 outside a closed outward-oriented surface; for open
    surfaces it varies smoothly in between.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    w = _winding_many(np.ascontiguousarray(pts.reshape(-1, 3)), np.ascontiguousarray(mesh.corners()))
    return float(w[0]) if single else w


def signed_distance(mesh: TriMesh, points, threshold: float = DEFAULT_THRESHOLD,
                    tree: AabbTree | None = None) -> np.ndarray:
    """``+d`` where the winding number exceeds ``threshold``, ``-d`` elsewhere."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    tree = tree or build_tree(mesh)
    dist = unsigned_distance(tree, mesh, pts)
    inside = winding_number(mesh, pts) > threshold
    return np.where(inside, dist, -dist)


def mesh_to_sdf(mesh: TriMesh, resolution: int, threshold: float = DEFAULT_THRESHOLD,
                leaf_capacity: int = DEFAULT_LEAF_CAPACITY) -> SdfGrid:
    """Sample the signed distance of ``mesh`` on an n^3 lattice over [-0.5, 0.5]^3."""
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    if mesh.n_triangles == 0:
        raise ValueError("empty mesh")
    tree = build_tree(mesh, leaf_capacity)
    values = signed_distance(mesh, canonical_points(resolution), threshold, tree)
    return SdfGrid.canonical(values.reshape((resolution,) * 3))


@dataclass(frozen=True)
class EikonalReport:
    mean: float
    median: float
    p95: float
    n_checked: int
    n_excluded: int


def eikonal_residual(grid: SdfGrid, band_cells: int = 2) -> EikonalReport:
    """Statistics of ``| |grad f| - 1 |`` over interior lattice points.

    Points within ``band_cells`` cells of a gradient-direction flip (adjacent
    gradients with negative dot product, a proxy for the medial axis) are
    excluded.
    """
    f = grid.values
    if min(f.shape) < 3:
        raise ValueError("eikonal check needs at least 3 samples per axis")
    h = grid.spacing
    g = np.stack([(f[2:, 1:-1, 1:-1] - f[:-2, 1:-1, 1:-1]),
                  (f[1:-1, 2:, 1:-1] - f[1:-1, :-2, 1:-1]),
                  (f[1:-1, 1:-1, 2:] - f[1:-1, 1:-1, :-2])], axis=-1) / (2 * h)
    flip = np.zeros(g.shape[:3], dtype=bool)
    for axis in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis] = slice(None, -1)
        b[axis] = slice(1, None)
        bad = (g[tuple(a)] * g[tuple(b)]).sum(axis=-1) < 0
        flip[tuple(a)] |= bad
        flip[tuple(b)] |= bad
    excluded = flip.copy()
    for axis in range(3):
        for _ in range(band_cells):
            grown = excluded.copy()
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            grown[tuple(lo)] |= excluded[tuple(hi)]
            grown[tuple(hi)] |= excluded[tuple(lo)]
            excluded = grown
    res = np.abs(np.linalg.norm(g, axis=-1) - 1.0)[~excluded]
    if res.size == 0:
        return EikonalReport(float("nan"), float("nan"), float("nan"), 0, int(excluded.sum()))
    return EikonalReport(float(res.mean()), float(np.median(res)), float(np.percentile(res, 95)),
                         int(res.size), int(excluded.sum()))


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    n_violations: int
    tolerance: float


def lipschitz_check(grid: SdfGrid, tolerance: float = 0.0) -> LipschitzReport:
    """Largest ``|f(p) - f(q)| / |p - q|`` over axis-aligned lattice neighbours."""
    f = grid.values
    worst, bad = 0.0, 0
    for axis in range(3):
        ratio = np.abs(np.diff(f, axis=axis)) / grid.spacing
        worst = max(worst, float(ratio.max()))
        bad += int((ratio > 1.0 + tolerance).sum())
    return LipschitzReport(worst, bad, tolerance)
