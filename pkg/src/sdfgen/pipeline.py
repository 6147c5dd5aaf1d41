"""Composed generation ``S = lowpass(L(z)) + H(lowpass(L(z)))`` and latent interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grid import SdfGrid
from .mesh import TriMesh
from .models import ModelCheckpoint, from_network
from .nn import Tensor, no_grad
from .spectral import FilterSpec, low_pass
from .surface import IsoSurfaceConfig, extract_surface

AXES = {"x": 0, "y": 1, "z": 2}


class CompatibilityError(ValueError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    lfg: Union[ModelCheckpoint, str, Path]
    hfg: Union[ModelCheckpoint, str, Path]
    seed: int = 0
    symmetry: Optional[str] = None
    cutoff: Optional[int] = None
    surface: IsoSurfaceConfig = IsoSurfaceConfig(smoothing_iterations=0)


@dataclass
class Generation:
    latent: np.ndarray
    raw: np.ndarray  # L(z), network units
    low: np.ndarray  # lowpass(L(z))
    high: np.ndarray  # H(lowpass(L(z)))
    field: np.ndarray  # low + high, symmetrized if requested
    grid: SdfGrid  # field in distance units
    mesh: TriMesh


def _load(ckpt) -> ModelCheckpoint:
    return ckpt if isinstance(ckpt, ModelCheckpoint) else ModelCheckpoint.load(ckpt)


def check_compatible(lfg: ModelCheckpoint, hfg: ModelCheckpoint, cutoff: Optional[int]) -> int:
    """Validate a checkpoint pair and return the cutoff to use."""
    if lfg.kind != "lfg" or hfg.kind != "hfg":
        raise CompatibilityError(f"expected (lfg, hfg) checkpoints, got ({lfg.kind}, {hfg.kind})")
    if lfg.resolution != hfg.resolution:
        raise CompatibilityError(f"resolution mismatch: LFG {lfg.resolution}, HFG {hfg.resolution}")
    trained = hfg.meta.get("cutoff")
    if cutoff is None:
        cutoff = trained if trained is not None else FilterSpec.for_resolution(hfg.resolution).cutoff
    elif trained is not None and int(trained) != int(cutoff):
        raise CompatibilityError(f"cutoff {cutoff} differs from the HFG training cutoff {trained}")
    tau_l, tau_h = lfg.meta.get("tau"), hfg.meta.get("tau")
    if tau_l is not None and tau_h is not None and tau_l != tau_h:
        raise CompatibilityError(f"tau mismatch: LFG {tau_l}, HFG {tau_h}")
    return int(cutoff)


def symmetrize(field: np.ndarray, axis: str) -> np.ndarray:
    """Average with the mirror image across the mid-plane normal to ``axis``."""
    a = AXES[axis]
    return (field + np.flip(field, axis=a)) / 2


def sample_latent(seed: int, dim: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, dim)


def generate_from_latent(lfg: ModelCheckpoint, hfg: ModelCheckpoint, z: np.ndarray,
                         cutoff: Optional[int] = None, symmetry: Optional[str] = None,
                         surface: IsoSurfaceConfig = IsoSurfaceConfig(smoothing_iterations=0)) -> Generation:
    cutoff = check_compatible(lfg, hfg, cutoff)
    if symmetry is not None and symmetry not in AXES:
        raise ValueError(f"symmetry axis must be one of {sorted(AXES)}")
    lfg.generator.eval()
    hfg.generator.eval()
    with no_grad():
        raw = lfg.generator(Tensor(np.asarray(z, dtype=np.float64)[None])).data[0]
        low = low_pass(raw, FilterSpec(cutoff))
        high = hfg.generator(Tensor(low[None])).data[0]
    field = low + high
    if symmetry:
        field = symmetrize(field, symmetry)
    tau = lfg.meta.get("tau", hfg.meta.get("tau"))
    grid = SdfGrid.canonical(from_network(field, tau) if tau is not None else field)
    return Generation(np.asarray(z), raw, low, high, field, grid, extract_surface(grid, surface))


def generate(request: GenerationRequest) -> Generation:
    lfg, hfg = _load(request.lfg), _load(request.hfg)
    check_compatible(lfg, hfg, request.cutoff)
    z = sample_latent(request.seed, lfg.config.latent_dim)
    return generate_from_latent(lfg, hfg, z, request.cutoff, request.symmetry, request.surface)


def interpolate(lfg, hfg, seed_a: int, seed_b: int, steps: int, cutoff: Optional[int] = None,
                symmetry: Optional[str] = None,
                surface: IsoSurfaceConfig = IsoSurfaceConfig(smoothing_iterations=0)) -> list[Generation]:
    """Generate along ``z_t = (1 - t) z_a + t z_b`` for ``steps`` evenly spaced t in [0, 1]."""
    if steps < 2:
        raise ValueError("interpolation needs at least 2 steps")
    lfg, hfg = _load(lfg), _load(hfg)
    check_compatible(lfg, hfg, cutoff)
    za = sample_latent(seed_a, lfg.config.latent_dim)
    zb = sample_latent(seed_b, lfg.config.latent_dim)
    out = []
    for i in range(steps):
        t = i / (steps - 1)
        out.append(generate_from_latent(lfg, hfg, (1 - t) * za + t * zb, cutoff, symmetry, surface))
    return out
