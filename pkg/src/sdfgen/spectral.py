"""Fourier-domain band splitting of gridded fields.

The low-pass operator keeps every DFT mode whose integer index satisfies
``max(|kx|, |ky|, |kz|) <= cutoff`` and zeroes the rest (an ideal box
filter, ringing included). The high band is the exact remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SdfGrid

#: largest tolerated imaginary residue (relative to field magnitude) before a result is called real
IMAG_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SpectralField:
    """DFT coefficients in numpy's standard layout (mode k stored at index k mod n)."""

    coefficients: np.ndarray

    @property
    def dims(self) -> tuple:
        return self.coefficients.shape

    def modes(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return np.rint(np.fft.fftfreq(n) * n).astype(int)

    def coefficient(self, k) -> complex:
        """Coefficient at signed mode triple ``k``."""
        idx = tuple(int(ki) % n for ki, n in zip(k, self.dims))
        return complex(self.coefficients[idx])


@dataclass(frozen=True)
class FilterSpec:
    cutoff: int
    shape: str = "box"

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be a positive mode index")
        if self.shape != "box":
            raise ValueError(f"unsupported filter shape {self.shape!r}")

    @classmethod
    def for_resolution(cls, n: int) -> "FilterSpec":
        """Default cutoff n/8 (8 at 64^3)."""
        return cls(max(1, n // 8))


def _values(field) -> np.ndarray:
    return field.values if isinstance(field, SdfGrid) else np.asarray(field, dtype=np.float64)


def _check_pow2(shape):
    for n in shape:
        if n < 1 or n & (n - 1):
            raise ValueError(f"FFT dims must be powers of two, got {shape}")


def fft3(field) -> SpectralField:
    """Forward 3-D DFT, unnormalized: X[k] = sum_x f[x] exp(-2 pi i k.x / n)."""
    f = _values(field)
    _check_pow2(f.shape)
    return SpectralField(np.fft.fftn(f))


def ifft3(spectrum: SpectralField, real: bool = True) -> np.ndarray:
    """Inverse of :func:`fft3`. With ``real`` the imaginary residue is checked, then dropped."""
    x = np.fft.ifftn(spectrum.coefficients)
    if not real:
        return x
    scale = max(1.0, float(np.abs(x.real).max(initial=0.0)))
    residue = float(np.abs(x.imag).max(initial=0.0))
    if residue > IMAG_TOLERANCE * scale:
        raise FloatingPointError(f"inverse FFT not real: imaginary residue {residue:.3g}")
    return x.real.copy()


def box_mask(shape, cutoff: int) -> np.ndarray:
    """Boolean mask of retained modes, ``max |k| <= cutoff``."""
    keep = [np.abs(np.rint(np.fft.fftfreq(n) * n)) <= cutoff for n in shape]
    return keep[0][:, None, None] & keep[1][None, :, None] & keep[2][None, None, :]


def _check_spec(shape, spec: FilterSpec):
    for n in shape:
        if spec.cutoff >= n / 2:
            raise ValueError(f"cutoff {spec.cutoff} must be below n/2 = {n / 2:g}")


def low_pass(field, spec: FilterSpec):
    """Ideal box low-pass. Returns the same type it was given (SdfGrid or array)."""
    f = _values(field)
    _check_spec(f.shape, spec)
    spectrum = fft3(f)
    kept = SpectralField(np.where(box_mask(f.shape, spec.cutoff), spectrum.coefficients, 0))
    out = ifft3(kept)
    return field.with_values(out) if isinstance(field, SdfGrid) else out


def split_bands(field, spec: FilterSpec):
    """``(low, high)`` with ``low = low_pass(field)`` and ``high = field - low``."""
    low = low_pass(field, spec)
    if isinstance(field, SdfGrid):
        return low, field.with_values(field.values - low.values)
    return low, np.asarray(field, dtype=np.float64) - low


def band_pair_f32(original: np.ndarray, low: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Round a band pair for float32 storage.

    The high band is recomputed from the rounded low band, so the stored
    pair sums back to ``original`` within half a float32 ulp of the high
    band (exactly, wherever that difference is representable).
    """
    orig = np.asarray(original, dtype=np.float32).astype(np.float64)
    low32 = np.asarray(low, dtype=np.float32)
    high32 = (orig - low32.astype(np.float64)).astype(np.float32)
    return low32, high32
