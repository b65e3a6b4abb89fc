"""Reconstruction quality metrics: PSNR, SSIM, SAM, and NMSE.

PSNR uses a fixed peak of 1.0 by default, matching cubes normalized to
[0, 1].  SSIM is the single-scale index with the standard 11x11 Gaussian
window (sigma 1.5, C1 = (0.01 peak)^2, C2 = (0.03 peak)^2), computed per band
and averaged.  SAM is the mean angle between per-pixel spectra in degrees;
NMSE is the percent relative squared error of a spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from skimage.metrics import structural_similarity

__all__ = ["EvaluationReport", "evaluate_cubes", "nmse", "psnr", "sam", "ssim"]

_SSIM_WINDOW = 11


@dataclass
class EvaluationReport:
    """Flat summary of one reconstruction-versus-truth comparison."""

    psnr_db: float
    ssim: float
    sam_deg: float
    nmse_percent: float
    per_band_psnr: np.ndarray

    CSV_HEADER = "psnr_db,ssim,sam_deg,nmse_percent"

    def to_csv_row(self) -> str:
        return f"{self.psnr_db:.6g},{self.ssim:.6g},{self.sam_deg:.6g},{self.nmse_percent:.6g}"

    def to_text(self) -> str:
        lines = [
            f"PSNR : {self.psnr_db:8.3f} dB",
            f"SSIM : {self.ssim:8.4f}",
            f"SAM  : {self.sam_deg:8.3f} deg",
            f"NMSE : {self.nmse_percent:8.4f} %",
            "per-band PSNR (dB): "
            + " ".join(f"{v:.2f}" for v in np.atleast_1d(self.per_band_psnr)),
        ]
        return "\n".join(lines)


def _check_same_shape(estimate: np.ndarray, reference: np.ndarray) -> None:
    if estimate.shape != reference.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {reference.shape}")


def psnr(estimate: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio over all voxels, in dB (inf for equality)."""
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _check_same_shape(estimate, reference)
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((estimate - reference) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def ssim(estimate: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Mean structural similarity over bands of (S, Nx, Ny) cubes.

    Raises ``ValueError`` when the spatial grid is smaller than the 11x11
    window.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _check_same_shape(estimate, reference)
    if estimate.ndim == 2:
        estimate = estimate[None]
        reference = reference[None]
    if min(estimate.shape[1:]) < _SSIM_WINDOW:
        raise ValueError(
            f"image {estimate.shape[1:]} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} SSIM window"
        )
    values = [
        structural_similarity(
            reference[s],
            estimate[s],
            win_size=_SSIM_WINDOW,
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=peak,
        )
        for s in range(estimate.shape[0])
    ]
    return float(np.mean(values))


def sam(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Mean spectral angle between per-pixel spectra, in degrees.

    Pixels whose spectrum has zero norm in either cube are excluded; if no
    valid pixel remains the angle is undefined and a ``ValueError`` is
    raised.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _check_same_shape(estimate, reference)
    bands = estimate.shape[0]
    est = estimate.reshape(bands, -1)
    ref = reference.reshape(bands, -1)
    norm_est = np.linalg.norm(est, axis=0)
    norm_ref = np.linalg.norm(ref, axis=0)
    valid = (norm_est > 0) & (norm_ref > 0)
    if not valid.any():
        raise ValueError("spectral angle undefined: all pixel spectra have zero norm")
    cosine = np.sum(est[:, valid] * ref[:, valid], axis=0) / (
        norm_est[valid] * norm_ref[valid]
    )
    angles = np.arccos(np.clip(cosine, -1.0, 1.0))
    return float(np.degrees(angles.mean()))


def nmse(estimate_spectrum: np.ndarray, reference_spectrum: np.ndarray) -> float:
    """Percent relative squared error 100 * ||xh - x||^2 / ||x||^2."""
    estimate_spectrum = np.asarray(estimate_spectrum, dtype=np.float64)
    reference_spectrum = np.asarray(reference_spectrum, dtype=np.float64)
    _check_same_shape(estimate_spectrum, reference_spectrum)
    denom = float(np.sum(reference_spectrum**2))
    if denom == 0.0:
        raise ValueError("reference spectrum has zero norm")
    return 100.0 * float(np.sum((estimate_spectrum - reference_spectrum) ** 2)) / denom


def evaluate_cubes(
    estimate: np.ndarray, reference: np.ndarray, peak: float = 1.0
) -> EvaluationReport:
    """All metrics between two (S, Nx, Ny) cubes.

    The report-level NMSE treats the whole cube as one long spectrum
    (100 * ||xh - x||_F^2 / ||x||_F^2); per-point spectra remain available
    through :func:`nmse` directly.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _check_same_shape(estimate, reference)
    per_band = np.array(
        [psnr(estimate[s], reference[s], peak) for s in range(estimate.shape[0])]
    )
    return EvaluationReport(
        psnr_db=psnr(estimate, reference, peak),
        ssim=ssim(estimate, reference, peak),
        sam_deg=sam(estimate, reference),
        nmse_percent=nmse(estimate.ravel(), reference.ravel()),
        per_band_psnr=per_band,
    )
