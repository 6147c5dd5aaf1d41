"""Regular-lattice scalar fields and the SDF1 binary container."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__

MAGIC = b"SDF1"
_HEADER = struct.Struct("<4s3I4fB3x")


class GridFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SdfGrid:
    """Samples of a signed distance field at the corners of a regular lattice.

    ``values[i, j, k]`` is the field at ``origin + spacing * (i, j, k)``.
    Positive values are inside the solid.
    """

    values: np.ndarray
    origin: tuple = (-0.5, -0.5, -0.5)
    spacing: float = 1.0
    positive_inside: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise GridFormatError(f"grid values must be 3-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridFormatError("grid contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def canonical(cls, values: np.ndarray) -> "SdfGrid":
        """Wrap an n^3 array as a grid spanning [-0.5, 0.5]^3 inclusively."""
        n = np.shape(values)[0]
        return cls(values, (-0.5, -0.5, -0.5), 1.0 / (n - 1))

    @property
    def dims(self) -> tuple:
        return self.values.shape

    def points(self) -> np.ndarray:
        """Lattice coordinates, shape dims + (3,)."""
        axes = [self.origin[a] + self.spacing * np.arange(n) for a, n in enumerate(self.dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def with_values(self, values: np.ndarray) -> "SdfGrid":
        return replace(self, values=values)


def canonical_points(resolution: int) -> np.ndarray:
    return SdfGrid.canonical(np.zeros((resolution,) * 3)).points()


def write_sdf(grid: SdfGrid, path, sidecar: Optional[dict] = None) -> None:
    """Write ``grid`` as SDF1 (float32 payload, x fastest) plus a JSON sidecar."""
    path = Path(path)
    nx, ny, nz = grid.dims
    header = _HEADER.pack(MAGIC, nx, ny, nz, *grid.origin, grid.spacing, 1 if grid.positive_inside else 0)
    payload = np.asarray(grid.values, dtype="<f4").ravel(order="F").tobytes()
    path.write_bytes(header + payload)
    meta = {"tool_version": __version__}
    meta.update(sidecar or {})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_sdf(path) -> SdfGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    magic, nx, ny, nz, ox, oy, oz, h, sign = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    count = nx * ny * nz
    if len(data) != _HEADER.size + 4 * count:
        raise GridFormatError(f"{path}: expected {count} values, file size {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape((nx, ny, nz), order="F")
    return SdfGrid(values.astype(np.float64), (ox, oy, oz), h, bool(sign))


def read_sidecar(path) -> dict:
    p = Path(path).with_suffix(".json")
    return json.loads(p.read_text()) if p.exists() else {}
