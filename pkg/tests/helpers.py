"""Independent oracles used to cross-check the production implementations.

Everything here is deliberately written against the *definitions* (direct
quadrature, nested-loop convolution, dense matrices) rather than the FFT or
fast-transform paths under test, so agreement is meaningful.
"""

from __future__ import annotations

import numpy as np
from scipy.special import j0

from csid.model import CodedApertureSet, DetectorResponse
from csid.optics import LensDesign, PsfStack


def fresnel_axial_intensity(design: LensDesign, wavelength: float, radius: float) -> float:
    """Detector-plane intensity at ``radius`` off axis by direct quadrature.

    Evaluates |2 pi / (lam z) * int_0^{D/2} exp(i pi (1/z - 1/f) rho^2 / lam)
    J0(2 pi r rho / (lam z)) rho d rho|^2 with a fine midpoint rule.  This is
    the radially symmetric form of the same Fresnel integral the production
    code computes via a discrete Fourier transform.
    """
    lam = wavelength
    z = design.focal_distance
    f_lam = design.focal_length_at(lam)
    curvature = 1.0 / z - 1.0 / f_lam
    a = design.outer_diameter / 2.0

    n = 20000
    rho = (np.arange(n) + 0.5) * (a / n)
    phase = np.exp(1j * np.pi * curvature * rho**2 / lam)
    bessel = j0(2.0 * np.pi * radius * rho / (lam * z))
    integral = np.sum(phase * bessel * rho) * (a / n)
    amplitude = 2.0 * np.pi / (lam * z) * integral
    return float(np.abs(amplitude) ** 2)


def circular_convolve_direct(band: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop circular convolution with the kernel centered at its middle."""
    nx, ny = band.shape
    side = kernel.shape[0]
    center = side // 2
    out = np.zeros_like(band, dtype=np.float64)
    for m in range(nx):
        for n in range(ny):
            acc = 0.0
            for u in range(side):
                for v in range(side):
                    acc += kernel[u, v] * band[(m - (u - center)) % nx, (n - (v - center)) % ny]
            out[m, n] = acc
    return out


def forward_direct(
    values: np.ndarray,
    masks: CodedApertureSet,
    b: DetectorResponse,
    psfs: PsfStack,
) -> np.ndarray:
    """Definition-level forward model using the nested-loop convolution."""
    num_frames = psfs.num_measurements
    coded = b.b[:, None, None] * masks.masks * values
    frames = np.zeros((num_frames, *values.shape[1:]))
    for k in range(num_frames):
        for s in range(values.shape[0]):
            frames[k] += circular_convolve_direct(coded[s], psfs.kernels[k, s])
    return frames


def materialize_forward_matrix(
    masks: CodedApertureSet,
    b: DetectorResponse,
    psfs: PsfStack,
    grid_shape: tuple[int, int],
) -> np.ndarray:
    """Dense (K N) x (S N) matrix of y = H C x, built entry by entry.

    Block (k, s) is the circulant of kernel (k, s) times the diagonal coding
    of band s.  Index order matches ``values.reshape(S, -1)`` row-major
    flattening.
    """
    nx, ny = grid_shape
    n = nx * ny
    num_frames = psfs.num_measurements
    num_bands = psfs.num_bands
    side = psfs.side
    center = side // 2
    coding = np.broadcast_to(b.b[:, None, None] * masks.masks, (num_bands, nx, ny))

    matrix = np.zeros((num_frames * n, num_bands * n))
    for k in range(num_frames):
        for s in range(num_bands):
            kern = psfs.kernels[k, s]
            block = np.zeros((n, n))
            for m in range(nx):
                for q in range(ny):
                    row = m * ny + q
                    for u in range(side):
                        for v in range(side):
                            src_m = (m - (u - center)) % nx
                            src_q = (q - (v - center)) % ny
                            block[row, src_m * ny + src_q] += kern[u, v]
            block *= coding[s].reshape(-1)[None, :]
            matrix[k * n : (k + 1) * n, s * n : (s + 1) * n] = block
    return matrix


def selection_psf_stack(num_bands: int, side: int, pixel_pitch: float = 4e-6) -> PsfStack:
    """K = S stack pairing frame k to band k via a centered delta kernel.

    Off-pairing kernels are zero, so H acts band-selectively and H C is an
    orthogonal-like operator.  Used for exact-recovery sanity checks.
    """
    kernels = np.zeros((num_bands, num_bands, side, side))
    center = side // 2
    for k in range(num_bands):
        kernels[k, k, center, center] = 1.0
    wavelengths = 500e-9 + 10e-9 * np.arange(num_bands)
    return PsfStack(kernels=kernels, wavelengths=wavelengths, pixel_pitch=pixel_pitch)


def delta_psf_stack(
    num_frames: int, num_bands: int, side: int, pixel_pitch: float = 4e-6
) -> PsfStack:
    """Every (k, s) kernel is a centered delta: blur-free frames sum all bands."""
    kernels = np.zeros((num_frames, num_bands, side, side))
    kernels[:, :, side // 2, side // 2] = 1.0
    wavelengths = 500e-9 + 10e-9 * np.arange(num_bands)
    return PsfStack(kernels=kernels, wavelengths=wavelengths, pixel_pitch=pixel_pitch)
