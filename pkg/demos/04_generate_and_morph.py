"""Sample shapes from trained checkpoints and morph between two of them.

Uses the checkpoints written by 03_train_desk.py. Each shape is the low
band of the LFG output plus the HFG's predicted detail, mirrored across x,
then meshed at the zero level.

    python3 demos/04_generate_and_morph.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from sdfgen.mesh import save_mesh
from sdfgen.models import ModelCheckpoint
from sdfgen.pipeline import GenerationRequest, generate, interpolate
from sdfgen.surface import IsoSurfaceConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
lfg = ModelCheckpoint.load(out / "lfg.ckpt")
hfg = ModelCheckpoint.load(out / "hfg.ckpt")
smooth = IsoSurfaceConfig(smoothing_iterations=5)

for seed in range(4):
    g = generate(GenerationRequest(lfg, hfg, seed=seed, symmetry="x", surface=smooth))
    detail = np.abs(g.high).mean() / max(np.abs(g.low).mean(), 1e-12)
    print(f"seed {seed}: {g.mesh.n_triangles} triangles, detail/low ratio {detail:.3f}")
    if g.mesh.n_triangles:
        save_mesh(g.mesh, out / f"sample_{seed}.obj")

frames = interpolate(lfg, hfg, 0, 1, steps=9, symmetry="x", surface=smooth)
(out / "morph").mkdir(exist_ok=True)
for i, f in enumerate(frames):
    if f.mesh.n_triangles:
        save_mesh(f.mesh, out / "morph" / f"frame_{i}.obj")
print(f"{len(frames)} morph frames in {out / 'morph'}")
