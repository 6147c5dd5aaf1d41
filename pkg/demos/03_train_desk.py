"""Train both generators on a small synthetic chair set.

The low-frequency generator learns whole 16^3 fields from noise; the
high-frequency generator learns to add the detail band back given the
low band (cutoff 2 at 16^3). Step counts are kept small so this finishes
in a few minutes; pass larger ones for better shapes.

    python3 demos/03_train_desk.py [out_dir] [lfg_steps] [hfg_steps]
"""

import logging
import sys
from pathlib import Path

import numpy as np

from sdfgen.models import LfgConfig, to_network
from sdfgen.spectral import FilterSpec, split_bands
from sdfgen.synth import SynthSpec, load_grids, synth_dataset
from sdfgen.training import TrainSchedule, dataset_l1, train_hfg, train_lfg

logging.basicConfig(level=logging.INFO, format="%(message)s")

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
lfg_steps = int(sys.argv[2]) if len(sys.argv) > 2 else 200
hfg_steps = int(sys.argv[3]) if len(sys.argv) > 3 else 300
out.mkdir(exist_ok=True)

synth_dataset(SynthSpec("chairs", count=20, seed=0, resolution=16), out / "chairs")
# fields are trained in network units, clamp(f / tau, -1, 1)
data = np.stack([to_network(g.values) for g in load_grids(out / "chairs")])

lfg, hist = train_lfg(data, TrainSchedule(total_steps=lfg_steps, seed=0), LfgConfig.desk(),
                      log_path=out / "lfg.jsonl", checkpoint_path=out / "lfg.ckpt")
skips = sum(m.d_skipped for m in hist)
print(f"LFG: {lfg_steps} steps, discriminator skipped on {skips}")

cutoff = FilterSpec.for_resolution(16).cutoff
pairs = [split_bands(x, FilterSpec(cutoff)) for x in data]
lows, highs = np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
hfg, hist = train_hfg(lows, highs, TrainSchedule(total_steps=hfg_steps, seed=0), cutoff,
                      log_path=out / "hfg.jsonl", checkpoint_path=out / "hfg.ckpt")
print(f"HFG: mean |high - H(low)| on the training set {dataset_l1(hfg, lows, highs):.4f} "
      f"(mean |high| {np.abs(highs).mean():.4f})")
