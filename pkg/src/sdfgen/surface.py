"""Iso-surface extraction and umbrella-Laplacian smoothing.

Marching cubes uses the standard 256-case table without an asymptotic
decider, so ambiguous faces follow the table's fixed split. Vertices are
keyed by the lattice edge they sit on, which makes shared vertices exact
and the output watertight wherever the table is consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._mc_table import CORNER_OFFSETS, EDGE_CORNERS, TRIANGLES
from .grid import SdfGrid
from .mesh import TriMesh


@dataclass(frozen=True)
class IsoSurfaceConfig:
    iso_value: float = 0.0
    smoothing_iterations: int = 5
    smoothing_lambda: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.smoothing_lambda <= 1.0:
            raise ValueError("smoothing_lambda must lie in (0, 1]")
        if self.smoothing_iterations < 0:
            raise ValueError("smoothing_iterations must be non-negative")


# lattice edge along `axis` starting at corner offset `start`, for each of the 12 cube edges
_EDGE_AXIS = np.array([np.flatnonzero(CORNER_OFFSETS[b] - CORNER_OFFSETS[a])[0] for a, b in EDGE_CORNERS])
_EDGE_START = np.array([np.minimum(CORNER_OFFSETS[a], CORNER_OFFSETS[b]) for a, b in EDGE_CORNERS])
_N_TRIS = (TRIANGLES >= 0).sum(axis=1) // 3


def _empty() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


def marching_cubes(grid: SdfGrid, iso: float = 0.0) -> TriMesh:
    """Triangulate ``{f == iso}``; normals point toward decreasing ``f``."""
    f = grid.values
    nx, ny, nz = f.shape
    if min(f.shape) < 2 or not (f.min() < iso < f.max()):
        return _empty()
    below = f < iso
    code = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for bit, (di, dj, dk) in enumerate(CORNER_OFFSETS):
        code |= below[di:nx - 1 + di, dj:ny - 1 + dj, dk:nz - 1 + dk].astype(np.int64) << bit
    cells = np.argwhere(_N_TRIS[code] > 0)
    if len(cells) == 0:
        return _empty()
    codes = code[cells[:, 0], cells[:, 1], cells[:, 2]]
    rows = TRIANGLES[codes, :15].reshape(len(cells), 5, 3)
    valid = rows[:, :, 0] >= 0
    cell_of_tri = np.repeat(np.arange(len(cells)), 5)[valid.ravel()]
    tri_edges = rows[valid]  # (T, 3) cube-edge ids

    # global key of a lattice edge: axis * N + flat index of its lower corner
    n_pts = nx * ny * nz
    lower = cells[cell_of_tri][:, None, :] + _EDGE_START[tri_edges]
    axis = _EDGE_AXIS[tri_edges]
    flat = (lower[..., 0] * ny + lower[..., 1]) * nz + lower[..., 2]
    keys = axis * n_pts + flat
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)

    ax = uniq // n_pts
    base = uniq % n_pts
    i0 = np.stack(np.unravel_index(base, f.shape), axis=1)
    i1 = i0 + np.eye(3, dtype=np.int64)[ax]
    f0 = f[i0[:, 0], i0[:, 1], i0[:, 2]]
    f1 = f[i1[:, 0], i1[:, 1], i1[:, 2]]
    t = (iso - f0) / (f1 - f0)
    pos = i0 + t[:, None] * (i1 - i0)
    verts = np.asarray(grid.origin) + grid.spacing * pos
    # table winding already faces the below-iso corners, i.e. decreasing f
    return TriMesh(verts, inverse.reshape(-1, 3))


def trilinear(grid: SdfGrid, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of ``grid`` at world-space ``points``."""
    f = grid.values
    u = (np.asarray(points, dtype=np.float64) - np.asarray(grid.origin)) / grid.spacing
    i = np.clip(np.floor(u).astype(np.int64), 0, np.array(f.shape) - 2)
    w = u - i
    out = np.zeros(len(u))
    for di, dj, dk in CORNER_OFFSETS:
        c = (w[:, 0] if di else 1 - w[:, 0]) * (w[:, 1] if dj else 1 - w[:, 1]) * (w[:, 2] if dk else 1 - w[:, 2])
        out += c * f[i[:, 0] + di, i[:, 1] + dj, i[:, 2] + dk]
    return out


def _adjacency(mesh: TriMesh) -> sp.csr_matrix:
    e = mesh.edges()
    n = mesh.n_vertices
    ones = np.ones(len(e))
    a = sp.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
    return (a + a.T).tocsr()


def laplace_smooth(mesh: TriMesh, iterations: int = 5, lam: float = 0.5) -> TriMesh:
    """Explicit umbrella smoothing: ``v += lam * (mean(neighbours) - v)`` per iteration.

    Vertices without neighbours stay put. Connectivity is untouched.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    if iterations == 0 or mesh.n_triangles == 0:
        return mesh
    adj = _adjacency(mesh)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    isolated = deg == 0
    v = mesh.vertices.copy()
    for _ in range(iterations):
        centroid = adj @ v / np.where(isolated, 1.0, deg)[:, None]
        step = lam * (centroid - v)
        step[isolated] = 0.0
        v = v + step
    return TriMesh(v, mesh.triangles, mesh.normalization)


def extract_surface(grid: SdfGrid, config: IsoSurfaceConfig = IsoSurfaceConfig()) -> TriMesh:
    mesh = marching_cubes(grid, config.iso_value)
    return laplace_smooth(mesh, config.smoothing_iterations, config.smoothing_lambda)
