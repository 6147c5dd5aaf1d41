"""Procedural stand-in datasets: boxes, cylinders and chair-like box assemblies.

Every shape is normalized into the canonical domain, written as OBJ and as
an SDF1 grid, and listed in ``manifest.jsonl`` together with the sampled
parameters. All randomness derives from ``SynthSpec.seed``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import SdfGrid, read_sdf, write_sdf
from .mesh import TriMesh, box_mesh, cylinder_mesh, merge_meshes, normalize_mesh, save_mesh
from .sdf import DEFAULT_THRESHOLD, mesh_to_sdf

FAMILIES = ("boxes", "cylinders", "chairs")

CHAIR_RANGES = {
    "seat_width": (0.5, 0.8),
    "seat_depth": (0.5, 0.8),
    "seat_thickness": (0.08, 0.14),
    "leg_height": (0.3, 0.45),
    "leg_thickness": (0.08, 0.12),
    "back_height": (0.3, 0.45),
    "back_thickness": (0.08, 0.12),
}
BOX_RANGES = {"width": (0.3, 1.0), "height": (0.3, 1.0), "depth": (0.3, 1.0)}
CYLINDER_RANGES = {"radius": (0.1, 0.4), "height": (0.3, 1.0)}


@dataclass(frozen=True)
class SynthSpec:
    family: str = "chairs"
    count: int = 20
    seed: int = 0
    resolution: int = 16

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def _sample(rng: np.random.Generator, ranges: dict) -> dict:
    return {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in ranges.items()}


def chair_mesh(p: dict) -> tuple[TriMesh, np.ndarray]:
    """Seat slab on four legs with a back slab; y is up. Returns the mesh and the seat centre."""
    w, d = p["seat_width"] / 2, p["seat_depth"] / 2
    lh, st, lt = p["leg_height"], p["seat_thickness"], p["leg_thickness"]
    parts = []
    for sx in (-1, 1):
        for sz in (-1, 1):
            x0, x1 = sorted((sx * w, sx * (w - lt)))
            z0, z1 = sorted((sz * d, sz * (d - lt)))
            parts.append(box_mesh([x0, 0.0, z0], [x1, lh, z1]))
    parts.append(box_mesh([-w, lh, -d], [w, lh + st, d]))
    top = lh + st
    parts.append(box_mesh([-w, top, -d], [w, top + p["back_height"], -d + p["back_thickness"]]))
    return merge_meshes(parts), np.array([0.0, lh + st / 2, 0.0])


def make_shape(family: str, rng: np.random.Generator) -> tuple[TriMesh, dict, np.ndarray]:
    """Sample one normalized shape; returns (mesh, params, interior probe point)."""
    if family == "boxes":
        p = _sample(rng, BOX_RANGES)
        half = np.array([p["width"], p["height"], p["depth"]]) / 2
        mesh, probe = box_mesh(-half, half), np.zeros(3)
    elif family == "cylinders":
        p = _sample(rng, CYLINDER_RANGES)
        mesh, probe = cylinder_mesh(p["radius"], p["height"]), np.zeros(3)
    else:
        p = _sample(rng, CHAIR_RANGES)
        mesh, probe = chair_mesh(p)
    mesh = normalize_mesh(mesh)
    return mesh, p, mesh.normalization.to_canonical(probe[None])[0]


def synth_dataset(spec: SynthSpec, out_dir) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    records = []
    for i in range(spec.count):
        mesh, params, probe = make_shape(spec.family, rng)
        stem = f"{spec.family}_{i:04d}"
        save_mesh(mesh, out / f"{stem}.obj")
        grid = mesh_to_sdf(mesh, spec.resolution)
        write_sdf(grid, out / f"{stem}.sdf", {"source_mesh": f"{stem}.obj", "resolution": spec.resolution,
                                               "threshold": DEFAULT_THRESHOLD})
        records.append({"index": i, "family": spec.family, "params": params, "probe": probe.tolist(),
                        "mesh": f"{stem}.obj", "sdf": f"{stem}.sdf", "resolution": spec.resolution,
                        "seed": spec.seed})
    with open(out / "manifest.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return records


def load_grids(directory) -> list[SdfGrid]:
    """Grids listed in ``manifest.jsonl`` (or every ``*.sdf`` in name order)."""
    d = Path(directory)
    manifest = d / "manifest.jsonl"
    if manifest.exists():
        names = [json.loads(line)["sdf"] for line in manifest.read_text().splitlines() if line.strip()]
    else:
        names = sorted(p.name for p in d.glob("*.sdf"))
    if not names:
        raise FileNotFoundError(f"no SDF grids in {d}")
    return [read_sdf(d / n) for n in names]
