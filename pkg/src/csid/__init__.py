"""Compressive spectral imaging with a coded aperture and diffractive lenses.

The package simulates compressive spectral measurements taken through a
photon-sieve style diffractive lens whose focal length scales as 1/wavelength,
and reconstructs the full spectral cube from a few coded, blurred frames via
an ADMM solver with a wavelet/DCT sparsity prior.

Subpackage layout:

* :mod:`csid.optics`     - diffractive-lens design rules and defocused PSFs
* :mod:`csid.model`      - coding/blur forward operator, adjoint, measurement
  simulation
* :mod:`csid.transforms` - orthonormal Symmlet-8 wavelet x spectral DCT basis
* :mod:`csid.solver`     - constrained L1 reconstruction (ADMM + inner CG)
* :mod:`csid.metrics`    - PSNR / SSIM / SAM / NMSE evaluation
* :mod:`csid.container`  - binary cube container and PGM import/export
* :mod:`csid.config`     - experiment configuration (JSON, schema validated)
* :mod:`csid.cli`        - command-line pipeline (simulate/reconstruct/...)
"""

from csid.optics import (
    LensDesign,
    PsfKernel,
    PsfStack,
    build_psf_stack,
    compute_psf,
    focal_length,
    spectral_resolution,
)
from csid.model import (
    CodedApertureSet,
    DetectorResponse,
    MeasurementSet,
    SpectralCube,
    SystemOperator,
    adjoint_apply,
    apply_coding,
    compression_level,
    forward_apply,
    generate_mask,
    simulate_measurements,
)
from csid.transforms import CoefficientCube, analysis, soft_threshold, synthesis
from csid.solver import SolverConfig, admm_reconstruct, cg_solve_normal, update_z1, update_z2
from csid.metrics import EvaluationReport, evaluate_cubes, nmse, psnr, sam, ssim

__all__ = [
    "LensDesign",
    "PsfKernel",
    "PsfStack",
    "build_psf_stack",
    "compute_psf",
    "focal_length",
    "spectral_resolution",
    "CodedApertureSet",
    "DetectorResponse",
    "MeasurementSet",
    "SpectralCube",
    "SystemOperator",
    "adjoint_apply",
    "apply_coding",
    "compression_level",
    "forward_apply",
    "generate_mask",
    "simulate_measurements",
    "CoefficientCube",
    "analysis",
    "soft_threshold",
    "synthesis",
    "SolverConfig",
    "admm_reconstruct",
    "cg_solve_normal",
    "update_z1",
    "update_z2",
    "EvaluationReport",
    "evaluate_cubes",
    "nmse",
    "psnr",
    "sam",
    "ssim",
]

__version__ = "0.1.0"
