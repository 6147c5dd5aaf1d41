"""Turn a triangle mesh into a signed distance grid and check it.

Builds an icosphere, samples it on a 64^3 lattice, compares against the
exact sphere distance and prints the eikonal and Lipschitz diagnostics.
Then repeats the sign test on a cube with its lid removed.

    python3 demos/01_mesh_to_sdf.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from sdfgen.grid import write_sdf
from sdfgen.mesh import TriMesh, box_mesh, icosphere, normalize_mesh, save_mesh
from sdfgen.sdf import eikonal_residual, lipschitz_check, mesh_to_sdf, winding_number

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

sphere = normalize_mesh(icosphere(0.45, 3))
print(f"icosphere: {sphere.n_vertices} vertices, {sphere.n_triangles} triangles")
grid = mesh_to_sdf(sphere, 64)
exact = 0.45 - np.linalg.norm(grid.points(), axis=-1)
err = np.abs(grid.values - exact)
print(f"vs analytic sphere: max err {err.max():.4f}, mean {err.mean():.4f}  (grid spacing {grid.spacing:.4f})")

eik = eikonal_residual(grid)
lip = lipschitz_check(grid, tolerance=0.05)
print(f"eikonal | |grad f| - 1 |: median {eik.median:.4f}, p95 {eik.p95:.4f}")
print(f"largest neighbour slope {lip.max_ratio:.4f}, violations {lip.n_violations}")

save_mesh(sphere, out / "sphere.obj")
write_sdf(grid, out / "sphere.sdf", {"source_mesh": "sphere.obj"})

# the winding number still separates inside from outside when the surface has a hole
cube = box_mesh([-0.45] * 3, [0.45] * 3)
lidless = TriMesh(cube.vertices, cube.triangles[2:])
probes = np.array([[0, 0, 0], [0, 0, 0.3], [0, 0, -0.3], [0.7, 0, 0], [0, 0, 0.7]])
for p, w in zip(probes, winding_number(lidless, probes)):
    print(f"  w{tuple(p.tolist())} = {w:+.3f} -> {'inside' if w > 0.5 else 'outside'}")
