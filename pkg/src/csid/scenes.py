"""Synthetic hyperspectral test scenes.

Real runs ingest raster stacks supplied by the user; the generator here
provides a deterministic stand-in with the two statistical properties the
reconstruction exploits: piecewise-smooth spatial structure (wavelet-sparse)
and smooth, low-dimensional spectra (DCT-compressible).  Scenes mix a few
Gaussian blobs and sharp-edged rectangles, each carrying a random convex
combination of three smooth spectral profiles.
"""

from __future__ import annotations

import numpy as np

from csid.model import SpectralCube

__all__ = ["synthetic_scene"]


def _spectral_profiles(num_bands: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, num_bands)
    centers = (0.2, 0.55, 0.85)
    widths = (0.25, 0.2, 0.3)
    return np.stack([np.exp(-(((t - c) / w) ** 2)) for c, w in zip(centers, widths)])


def synthetic_scene(
    grid_shape: tuple[int, int],
    wavelengths: np.ndarray,
    pixel_pitch: float,
    seed: int = 7,
    num_blobs: int = 6,
    num_rects: int = 3,
) -> SpectralCube:
    """Deterministic piecewise-smooth scene normalized to [0, 1]."""
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    nx, ny = grid_shape
    rng = np.random.default_rng(seed)
    profiles = _spectral_profiles(wavelengths.size)
    rows, cols = np.mgrid[:nx, :ny]
    values = np.zeros((wavelengths.size, nx, ny))

    for _ in range(num_blobs):
        cx = rng.integers(nx // 8, nx - nx // 8)
        cy = rng.integers(ny // 8, ny - ny // 8)
        radius = rng.uniform(min(nx, ny) / 16, min(nx, ny) / 5)
        blob = np.exp(-((rows - cx) ** 2 + (cols - cy) ** 2) / (2.0 * radius**2))
        weights = rng.random(3)
        spectrum = weights @ profiles / weights.sum()
        values += rng.uniform(0.3, 1.0) * spectrum[:, None, None] * blob[None]

    for _ in range(num_rects):
        r0, r1 = np.sort(rng.integers(0, nx, 2))
        c0, c1 = np.sort(rng.integers(0, ny, 2))
        r1 = max(r1, r0 + nx // 8)
        c1 = max(c1, c0 + ny // 8)
        patch = np.zeros((nx, ny))
        patch[r0:r1, c0:c1] = 1.0
        weights = rng.random(3)
        spectrum = weights @ profiles / weights.sum()
        values += rng.uniform(0.4, 0.8) * spectrum[:, None, None] * patch[None]

    values /= values.max()
    return SpectralCube(values=values, wavelengths=wavelengths, pixel_pitch=pixel_pitch)
