"""Command-line entry point: ``sdfgen <command> ...``.

Failures exit nonzero with one JSON object on stderr,
``{"error": <kind>, "message": <text>}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .grid import GridFormatError, SdfGrid, read_sdf, read_sidecar, write_sdf
from .mesh import load_mesh, normalize_mesh, save_mesh
from .models import DEFAULT_TAU, HfgConfig, LfgConfig, ModelCheckpoint, to_network
from .pipeline import GenerationRequest, generate, interpolate
from .sdf import DEFAULT_THRESHOLD, eikonal_residual, lipschitz_check, mesh_to_sdf
from .spectral import FilterSpec, band_pair_f32, low_pass, split_bands
from .surface import IsoSurfaceConfig, extract_surface
from .synth import FAMILIES, SynthSpec, load_grids, synth_dataset
from .training import TrainSchedule, train_hfg, train_lfg


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def cmd_convert(args) -> dict:
    mesh = load_mesh(args.mesh)
    if not args.no_normalize:
        mesh = normalize_mesh(mesh)
    grid = mesh_to_sdf(mesh, args.res, args.threshold)
    meta = {"source_mesh": str(args.mesh), "resolution": args.res, "threshold": args.threshold,
            "dropped_triangles": mesh.dropped}
    if mesh.normalization is not None:
        meta["normalization"] = {"center": list(mesh.normalization.center), "scale": mesh.normalization.scale}
    write_sdf(grid, args.out, meta)
    return {"output": str(args.out), "dims": list(grid.dims)}


def cmd_split(args) -> dict:
    grid = read_sdf(args.sdf)
    spec = FilterSpec(args.cutoff)
    low = low_pass(grid, spec)
    low32, high32 = band_pair_f32(grid.values, low.values)
    for band, values, path in (("low", low32, args.low), ("high", high32, args.high)):
        write_sdf(grid.with_values(values.astype(np.float64)), path,
                  {"band": band, "cutoff": args.cutoff, "source": str(args.sdf)})
    return {"low": str(args.low), "high": str(args.high), "cutoff": args.cutoff}


def cmd_extract(args) -> dict:
    grid = read_sdf(args.sdf)
    mesh = extract_surface(grid, IsoSurfaceConfig(args.iso, args.smooth, args.lam))
    if mesh.n_triangles == 0:
        raise ValueError(f"no iso-surface at level {args.iso} in {args.sdf}")
    save_mesh(mesh, args.out)
    return {"output": str(args.out), "vertices": mesh.n_vertices, "triangles": mesh.n_triangles}


def cmd_synth(args) -> dict:
    records = synth_dataset(SynthSpec(args.family, args.count, args.seed, args.res), args.out_dir)
    return {"manifest": str(Path(args.out_dir) / "manifest.jsonl"), "count": len(records)}


def _schedule(args) -> TrainSchedule:
    return TrainSchedule(lr_discriminator=args.lr_d, lr_generator=args.lr_g, batch_size=args.batch,
                         total_steps=args.steps, seed=args.seed)


def _network_fields(directory, tau: float) -> np.ndarray:
    return np.stack([to_network(g.values, tau) for g in load_grids(directory)])


def cmd_train_lfg(args) -> dict:
    data = _network_fields(args.data, args.tau)
    config = LfgConfig() if args.full else LfgConfig.desk()
    if data.shape[1] != config.output_resolution:
        config = LfgConfig(config.latent_dim, data.shape[1] // 2 ** config.n_upconv_layers,
                           config.base_channels, config.n_upconv_layers)
    models, history = train_lfg(data, _schedule(args), config, args.tau, args.log, args.out)
    return {"checkpoint": str(args.out), "steps": len(history)}


def cmd_train_hfg(args) -> dict:
    data = _network_fields(args.data, args.tau)
    cutoff = args.cutoff or FilterSpec.for_resolution(data.shape[1]).cutoff
    pairs = [split_bands(x, FilterSpec(cutoff)) for x in data]
    lows = np.stack([p[0] for p in pairs])
    highs = np.stack([p[1] for p in pairs])
    config = HfgConfig.for_resolution(data.shape[1])
    models, history = train_hfg(lows, highs, _schedule(args), cutoff, config, args.tau, args.log, args.out)
    return {"checkpoint": str(args.out), "steps": len(history), "cutoff": cutoff}


def _surface(args) -> IsoSurfaceConfig:
    return IsoSurfaceConfig(0.0, args.smooth, args.lam)


def _symmetry(args):
    return None if args.symmetry == "none" else args.symmetry


def cmd_generate(args) -> dict:
    result = generate(GenerationRequest(args.lfg, args.hfg, args.seed, _symmetry(args), args.cutoff, _surface(args)))
    meta = {"seed": args.seed, "symmetry": args.symmetry, "lfg": str(args.lfg), "hfg": str(args.hfg)}
    write_sdf(result.grid, args.out_sdf, meta)
    out = {"sdf": str(args.out_sdf), "triangles": result.mesh.n_triangles}
    if args.out_obj and result.mesh.n_triangles:
        save_mesh(result.mesh, args.out_obj)
        out["obj"] = str(args.out_obj)
    return out


def cmd_interpolate(args) -> dict:
    frames = interpolate(args.lfg, args.hfg, args.seed_a, args.seed_b, args.steps, args.cutoff,
                         _symmetry(args), _surface(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        write_sdf(frame.grid, out_dir / f"frame_{i:03d}.sdf", {"frame": i, "seed_a": args.seed_a, "seed_b": args.seed_b})
        if frame.mesh.n_triangles:
            save_mesh(frame.mesh, out_dir / f"frame_{i:03d}.obj")
            written.append(f"frame_{i:03d}.obj")
    return {"frames": len(frames), "meshes": written}


def cmd_verify(args) -> dict:
    grid = read_sdf(args.sdf)
    dims = grid.dims
    expected = 1.0 / (dims[0] - 1)
    eik = eikonal_residual(grid)
    lip = lipschitz_check(grid, args.lipschitz_tolerance)
    report = {
        "dims": list(dims),
        "format": {"canonical_origin": bool(np.allclose(grid.origin, -0.5, atol=1e-6)),
                   "canonical_spacing": bool(abs(grid.spacing - expected) < 1e-6),
                   "positive_inside": grid.positive_inside},
        "eikonal": {"mean": eik.mean, "median": eik.median, "p95": eik.p95,
                    "checked": eik.n_checked, "excluded": eik.n_excluded},
        "lipschitz": {"max_ratio": lip.max_ratio, "violations": lip.n_violations, "tolerance": lip.tolerance},
        "sidecar": read_sidecar(args.sdf),
    }
    return report


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdfgen", description="Hierarchical SDF shape generation")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("convert", help="triangle mesh -> SDF1 grid")
    c.add_argument("mesh", type=Path)
    c.add_argument("out", type=Path)
    c.add_argument("--res", type=int, default=64)
    c.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    c.add_argument("--no-normalize", action="store_true")
    c.set_defaults(func=cmd_convert)

    c = sub.add_parser("split", help="SDF1 grid -> low and high frequency bands")
    c.add_argument("sdf", type=Path)
    c.add_argument("low", type=Path)
    c.add_argument("high", type=Path)
    c.add_argument("--cutoff", type=int, default=8)
    c.set_defaults(func=cmd_split)

    c = sub.add_parser("extract", help="SDF1 grid -> OBJ surface")
    c.add_argument("sdf", type=Path)
    c.add_argument("out", type=Path)
    c.add_argument("--iso", type=float, default=0.0)
    c.add_argument("--smooth", type=int, default=5)
    c.add_argument("--lam", type=float, default=0.5)
    c.set_defaults(func=cmd_extract)

    c = sub.add_parser("synth", help="procedural training shapes")
    c.add_argument("out_dir", type=Path)
    c.add_argument("--family", choices=FAMILIES, default="chairs")
    c.add_argument("--count", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--res", type=int, default=16)
    c.set_defaults(func=cmd_synth)

    for name, func in (("train-lfg", cmd_train_lfg), ("train-hfg", cmd_train_hfg)):
        c = sub.add_parser(name, help=f"train the {name[-3:].upper()} on a directory of SDF1 grids")
        c.add_argument("data", type=Path)
        c.add_argument("--out", type=Path, required=True)
        c.add_argument("--log", type=Path)
        c.add_argument("--steps", type=int, default=500)
        c.add_argument("--batch", type=int, default=8)
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--lr-d", type=float, default=2e-4)
        c.add_argument("--lr-g", type=float, default=5e-4)
        c.add_argument("--tau", type=float, default=DEFAULT_TAU)
        if name == "train-lfg":
            c.add_argument("--full", action="store_true", help="full-size 200-d / 512-channel generator")
        else:
            c.add_argument("--cutoff", type=int, help="mode cutoff (default n/8)")
        c.set_defaults(func=func)

    for name, func in (("generate", cmd_generate), ("interpolate", cmd_interpolate)):
        c = sub.add_parser(name)
        c.add_argument("--lfg", type=Path, required=True)
        c.add_argument("--hfg", type=Path, required=True)
        c.add_argument("--cutoff", type=int)
        c.add_argument("--symmetry", choices=["x", "y", "z", "none"], default="x")
        c.add_argument("--smooth", type=int, default=0)
        c.add_argument("--lam", type=float, default=0.5)
        if name == "generate":
            c.add_argument("--seed", type=int, default=0)
            c.add_argument("--out-sdf", type=Path, required=True)
            c.add_argument("--out-obj", type=Path)
        else:
            c.add_argument("--seed-a", type=int, required=True)
            c.add_argument("--seed-b", type=int, required=True)
            c.add_argument("--steps", type=int, default=9)
            c.add_argument("--out-dir", type=Path, required=True)
        c.set_defaults(func=func)

    c = sub.add_parser("verify", help="format, eikonal and Lipschitz report for an SDF1 grid")
    c.add_argument("sdf", type=Path)
    c.add_argument("--lipschitz-tolerance", type=float, default=0.05)
    c.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except FileNotFoundError as exc:
        return _fail("missing_file", str(exc), 1)
    except (GridFormatError, ValueError, OSError, RuntimeError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
