"""Indexed triangle meshes: loading, normalization and OBJ output.

Only the subset of Wavefront OBJ needed for geometry is understood
(``v`` and ``f`` records); polygon faces are fan-triangulated. Binary STL
can be read but not written.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

#: largest bounding-box extent after normalization; the canonical domain is [-0.5, 0.5]^3
CANONICAL_EXTENT = 0.9


class MeshError(ValueError):
    """Raised for unreadable, malformed or empty meshes."""


@dataclass(frozen=True)
class Normalization:
    """Affine map ``canonical = (original - center) * scale``."""

    center: tuple
    scale: float

    def to_canonical(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.center)) * self.scale

    def to_original(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + np.asarray(self.center)


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    normalization: Optional[Normalization] = None
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinate")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        if t.size and np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshError("degenerate triangle (repeated index)")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (T, 3, 3)."""
        return self.vertices[self.triangles]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def flipped(self) -> "TriMesh":
        return replace(self, triangles=self.triangles[:, ::-1].copy())

    def area(self) -> float:
        c = self.corners()
        return float(0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1).sum())

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def drop_degenerate(triangles: np.ndarray) -> tuple[np.ndarray, int]:
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    bad = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
    return t[~bad], int(bad.sum())


def _parse_obj(text: str, path) -> tuple[list, list]:
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(x) for x in parts[1:4]])
                if len(parts) < 4:
                    raise ValueError("vertex needs 3 coordinates")
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/", 1)[0])
                    # negative indices are relative to the current vertex count
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError("face needs at least 3 vertices")
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
        except ValueError as exc:
            raise MeshError(f"{path}:{lineno}: malformed {tag!r} record: {exc}") from None
    return verts, tris


def _parse_stl(data: bytes, path) -> tuple[np.ndarray, np.ndarray]:
    if len(data) < 84:
        raise MeshError(f"{path}: truncated STL header (byte offset {len(data)})")
    (count,) = struct.unpack_from("<I", data, 80)
    need = 84 + 50 * count
    if len(data) < need:
        raise MeshError(f"{path}: truncated STL record at byte offset {84 + 50 * ((len(data) - 84) // 50)}")
    rec = np.frombuffer(data, dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]),
                        count=count, offset=84)
    corners = rec["v"].astype(np.float64).reshape(-1, 3)
    # weld exactly coincident corners so connectivity survives
    verts, inverse = np.unique(corners, axis=0, return_inverse=True)
    return verts, inverse.reshape(-1, 3)


def load_mesh(path: PathLike, format: Optional[str] = None) -> TriMesh:
    """Read an OBJ or binary STL file.

    Degenerate triangles (repeated vertex index) are dropped; their number is
    logged and kept on ``TriMesh.dropped``.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    if fmt == "obj":
        verts, tris = _parse_obj(data.decode("utf-8", errors="replace"), path)
        verts = np.array(verts, dtype=np.float64).reshape(-1, 3)
        tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    elif fmt == "stl":
        verts, tris = _parse_stl(data, path)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        raise MeshError(f"{path}: face index out of range")
    tris, dropped = drop_degenerate(tris)
    if dropped:
        log.warning("%s: dropped %d degenerate triangle(s)", path, dropped)
    if len(tris) == 0:
        raise MeshError(f"{path}: no usable triangles")
    return TriMesh(verts, tris, dropped=dropped)


def normalize_mesh(mesh: TriMesh) -> TriMesh:
    """Center the bounding box at the origin and scale its largest extent to 0.9."""
    if mesh.n_vertices == 0:
        raise MeshError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise MeshError("all vertices coincide; zero extent")
    center = (lo + hi) / 2
    scale = CANONICAL_EXTENT / extent
    verts = (mesh.vertices - center) * scale
    # compose with any earlier normalization so the record maps from the original file
    if mesh.normalization is not None:
        prev = mesh.normalization
        center = prev.to_original(center[None])[0]
        scale = scale * prev.scale
    norm = Normalization(tuple(float(c) for c in center), float(scale))
    return TriMesh(verts, mesh.triangles, norm, mesh.dropped)


def _fmt(x: float) -> str:
    # 9 significant digits survives float32 and keeps output stable across runs
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def save_mesh(mesh: TriMesh, path: PathLike, format: str = "obj") -> None:
    """Write ``mesh`` as OBJ. Output is canonical: identical meshes give identical bytes."""
    if format != "obj":
        raise MeshError(f"cannot write format {format!r}")
    if mesh.n_triangles == 0:
        raise MeshError("refusing to write a mesh without triangles")
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise MeshError(f"cannot write {path}: {exc}") from exc


def box_mesh(lo, hi) -> TriMesh:
    """Closed axis-aligned box with outward-facing triangles."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    corners = np.array([[(hi if (i >> a) & 1 else lo)[a] for a in range(3)] for i in range(8)])
    # corner i has bit a set when its coordinate a is at hi
    quads = [(0, 4, 6, 2), (1, 3, 7, 5), (0, 1, 5, 4), (2, 6, 7, 3), (0, 2, 3, 1), (4, 5, 7, 6)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh(corners, np.array(tris))


def merge_meshes(meshes) -> TriMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += m.n_vertices
    return TriMesh(np.concatenate(verts), np.concatenate(tris))


def icosphere(radius: float = 1.0, subdivisions: int = 0) -> TriMesh:
    """Subdivided icosahedron projected onto a sphere, outward orientation."""
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriMesh(np.array(verts) * radius, np.array(faces))


def cylinder_mesh(radius: float, height: float, segments: int = 24) -> TriMesh:
    """Closed cylinder along y, centered at the origin."""
    ang = 2 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(ang), np.zeros(segments), radius * np.sin(ang)], axis=1)
    bottom = ring - [0, height / 2, 0]
    top = ring + [0, height / 2, 0]
    verts = np.concatenate([bottom, top, [[0, -height / 2, 0], [0, height / 2, 0]]])
    cb, ct = 2 * segments, 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris += [(i, segments + i, j), (j, segments + i, segments + j)]
        tris += [(cb, i, j), (ct, segments + j, segments + i)]
    return TriMesh(verts, np.array(tris))
