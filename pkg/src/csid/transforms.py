"""Kronecker sparsifying basis: 2D Symmlet-8 wavelet per band, 1D DCT in s.

Both factors are orthonormal, so the composite transform preserves inner
products and inverts exactly.  The wavelet uses periodic boundary extension,
which keeps the decimated filter bank orthonormal on dyadic lengths and
matches the circular convolution convention of the forward model.  The
spectral axis uses the orthonormal type-II DCT, which places no power-of-two
restriction on the number of bands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct

from csid.model import SpectralCube

__all__ = [
    "CoefficientCube",
    "SYM8_SCALING",
    "analysis",
    "default_levels",
    "soft_threshold",
    "synthesis",
]

# Scaling (lowpass) filter of the least-asymmetric Daubechies wavelet with 8
# vanishing moments ("Symmlet-8", 16 taps), unit L2 norm.  Values follow the
# standard published factorization (WaveLab / PyWavelets sym8 tables agree to
# their printed precision).  Orthonormality (sum h^2 = 1, double-shift
# orthogonality) is asserted by the unit tests.
SYM8_SCALING = np.array(
    [
        0.0018899503327594609,
        -0.0003029205147213668,
        -0.014952258337048231,
        0.003808752013890615,
        0.049137179673607506,
        -0.027219029917056003,
        -0.051945838107709037,
        0.3644418948353314,
        0.7771857517005235,
        0.4813596512583722,
        -0.061273359067658524,
        -0.1432942383508097,
        0.007607487324917605,
        0.03169508781149298,
        -0.0005421323317911481,
        -0.0033824159510061256,
    ]
)

# Quadrature-mirror highpass companion g[n] = (-1)^n h[L-1-n].
SYM8_WAVELET = ((-1.0) ** np.arange(SYM8_SCALING.size)) * SYM8_SCALING[::-1]

_BASIS_ID = "sym8-dct"


@dataclass
class CoefficientCube:
    """Transform-domain representation of a spectral cube.

    ``coeffs`` has the same shape as the source cube: per-band wavelet
    subbands packed in the usual pyramid layout (approximation block in the
    top-left corner), DCT-rotated along the first (spectral) axis.
    """

    coeffs: np.ndarray
    wavelet_levels: int
    wavelengths: np.ndarray
    pixel_pitch: float
    basis_id: str = _BASIS_ID

    def l1_norm(self) -> float:
        return float(np.abs(self.coeffs).sum())


def default_levels(shape: tuple[int, int]) -> int:
    """Default decomposition depth ``log2(min(Nx, Ny)) - 2``, at least 1."""
    return max(1, int(np.log2(min(shape))) - 2)


def _check_levels(shape: tuple[int, int], levels: int) -> None:
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    factor = 2**levels
    if shape[0] % factor or shape[1] % factor:
        raise ValueError(
            f"grid {shape[0]}x{shape[1]} is not divisible by 2^levels = {factor}"
        )


def _dwt_axis(x: np.ndarray, axis: int) -> np.ndarray:
    """One periodic analysis level along ``axis``: [approx | detail]."""
    x = np.moveaxis(x, axis, -1)
    approx = np.zeros_like(x)
    detail = np.zeros_like(x)
    for n in range(SYM8_SCALING.size):
        shifted = np.roll(x, -n, axis=-1)
        approx += SYM8_SCALING[n] * shifted
        detail += SYM8_WAVELET[n] * shifted
    out = np.concatenate([approx[..., ::2], detail[..., ::2]], axis=-1)
    return np.moveaxis(out, -1, axis)


def _idwt_axis(c: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint (= inverse) of :func:`_dwt_axis`."""
    c = np.moveaxis(c, axis, -1)
    half = c.shape[-1] // 2
    up_a = np.zeros_like(c)
    up_d = np.zeros_like(c)
    up_a[..., ::2] = c[..., :half]
    up_d[..., ::2] = c[..., half:]
    x = np.zeros_like(c)
    for n in range(SYM8_SCALING.size):
        x += SYM8_SCALING[n] * np.roll(up_a, n, axis=-1)
        x += SYM8_WAVELET[n] * np.roll(up_d, n, axis=-1)
    return np.moveaxis(x, -1, axis)


def _dwt2(values: np.ndarray, levels: int) -> np.ndarray:
    """Multi-level 2D wavelet analysis of every band of an (S, Nx, Ny) array."""
    out = np.array(values, dtype=np.float64, copy=True)
    nx, ny = out.shape[-2:]
    for _ in range(levels):
        block = out[..., :nx, :ny]
        block = _dwt_axis(block, -2)
        block = _dwt_axis(block, -1)
        out[..., :nx, :ny] = block
        nx //= 2
        ny //= 2
    return out


def _idwt2(coeffs: np.ndarray, levels: int) -> np.ndarray:
    out = np.array(coeffs, dtype=np.float64, copy=True)
    nx = out.shape[-2] // 2 ** (levels - 1)
    ny = out.shape[-1] // 2 ** (levels - 1)
    for _ in range(levels):
        block = out[..., :nx, :ny]
        block = _idwt_axis(block, -1)
        block = _idwt_axis(block, -2)
        out[..., :nx, :ny] = block
        nx *= 2
        ny *= 2
    return out


def analysis_values(values: np.ndarray, levels: int) -> np.ndarray:
    """Forward transform on a raw (S, Nx, Ny) array."""
    values = np.asarray(values, dtype=np.float64)
    _check_levels(values.shape[-2:], levels)
    return dct(_dwt2(values, levels), type=2, norm="ortho", axis=0)


def synthesis_values(coeffs: np.ndarray, levels: int) -> np.ndarray:
    """Inverse transform on a raw (S, Nx, Ny) coefficient array."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _check_levels(coeffs.shape[-2:], levels)
    return _idwt2(idct(coeffs, type=2, norm="ortho", axis=0), levels)


def analysis(cube: SpectralCube, levels: int | None = None) -> CoefficientCube:
    """Transform a spectral cube into the sparsifying basis.

    ``levels`` defaults to :func:`default_levels` of the spatial grid.  The
    grid must be divisible by ``2**levels`` along both spatial axes.
    """
    if levels is None:
        levels = default_levels(cube.grid_shape)
    return CoefficientCube(
        coeffs=analysis_values(cube.values, levels),
        wavelet_levels=levels,
        wavelengths=cube.wavelengths,
        pixel_pitch=cube.pixel_pitch,
    )


def synthesis(coeffs: CoefficientCube) -> SpectralCube:
    """Invert :func:`analysis` exactly (up to floating-point rounding)."""
    if coeffs.basis_id != _BASIS_ID:
        raise ValueError(f"unknown basis {coeffs.basis_id!r}, expected {_BASIS_ID!r}")
    return SpectralCube(
        values=synthesis_values(coeffs.coeffs, coeffs.wavelet_levels),
        wavelengths=coeffs.wavelengths,
        pixel_pitch=coeffs.pixel_pitch,
    )


def soft_threshold(w: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise shrinkage ``sign(w) * max(|w| - tau, 0)``.

    The proximal operator of ``tau * ||.||_1``; ``tau`` must be nonnegative.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    w = np.asarray(w, dtype=np.float64)
    return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)
