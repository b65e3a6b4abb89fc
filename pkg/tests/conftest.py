"""Shared fixtures: small optical systems reused across the test modules."""

from __future__ import annotations

import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csid.model import DetectorResponse, generate_mask
from csid.optics import KernelTruncationWarning, LensDesign, build_psf_stack

HOLE = 8e-6
FOCAL = 2.56e-2
PITCH = 4e-6


def fresnel_stack(num_frames: int, wavelengths: np.ndarray, kernel_side: int):
    """Small physical PSF bank; focus wavelengths spread across the band."""
    span = wavelengths[-1] - wavelengths[0]
    focus = wavelengths[0] + span * (np.arange(num_frames) + 0.5) / num_frames
    designs = [LensDesign.from_focus(float(lam), HOLE, FOCAL) for lam in focus]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelTruncationWarning)
        return build_psf_stack(designs, wavelengths, PITCH, kernel_side)


@pytest.fixture(scope="session")
def small_system():
    """32x32 grid, S=5, K=2 Fresnel system with a Bernoulli mask."""
    wavelengths = (560 + 10 * np.arange(5)) * 1e-9
    psfs = fresnel_stack(2, wavelengths, kernel_side=31)
    masks = generate_mask((32, 32), 0.5, seed=42, pixel_pitch=PITCH)
    b = DetectorResponse.flat(5)
    return masks, b, psfs


@pytest.fixture(scope="session")
def tiny_system():
    """8x8 grid, S=3, K=2 system small enough to materialize densely."""
    wavelengths = (560 + 20 * np.arange(3)) * 1e-9
    psfs = fresnel_stack(2, wavelengths, kernel_side=7)
    masks = generate_mask((8, 8), 0.5, seed=11, pixel_pitch=PITCH)
    b = DetectorResponse.flat(3)
    return masks, b, psfs


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
