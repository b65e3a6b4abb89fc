"""Design-rule arithmetic and Fresnel PSF behavior."""

import warnings

import numpy as np
import pytest

from csid.optics import (
    KernelTruncationWarning,
    LensDesign,
    build_psf_stack,
    central_lobe_fwhm,
    compute_psf,
    default_kernel_side,
    focal_length,
    spectral_resolution,
)
from helpers import fresnel_axial_intensity

HOLE = 8e-6
FOCAL = 2.56e-2
PITCH = 4e-6


class TestFocalLength:
    def test_reference_bench(self):
        # D = 1.792 mm, delta = 8 um, lambda = 560 nm focuses at 2.56 cm
        assert focal_length(1.792e-3, 8e-6, 560e-9) == pytest.approx(2.56e-2, rel=1e-12)

    def test_inverse_proportional_in_wavelength(self):
        f1 = focal_length(2e-3, 8e-6, 500e-9)
        f2 = focal_length(2e-3, 8e-6, 1000e-9)
        assert f2 == pytest.approx(f1 / 2, rel=1e-12)

    def test_direct_arithmetic(self):
        assert focal_length(2e-3, 10e-6, 500e-9) == pytest.approx(4.0e-2, rel=1e-12)

    @pytest.mark.parametrize("bad", [(0, 8e-6, 560e-9), (1e-3, -1e-6, 560e-9), (1e-3, 8e-6, 0)])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            focal_length(*bad)


class TestSpectralResolution:
    def test_reference_bench(self):
        assert spectral_resolution(8e-6, 2.56e-2) == pytest.approx(10e-9, rel=1e-12)

    def test_scaling_symmetry(self):
        assert spectral_resolution(16e-6, 4 * 2.56e-2) == pytest.approx(
            spectral_resolution(8e-6, 2.56e-2), rel=1e-12
        )

    def test_direct_arithmetic(self):
        assert spectral_resolution(10e-6, 4e-2) == pytest.approx(10e-9, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            spectral_resolution(-8e-6, 2.56e-2)
        with pytest.raises(ValueError):
            spectral_resolution(8e-6, 0.0)


class TestLensDesign:
    def test_design_rule_reciprocity(self):
        for lam in (430e-9, 560e-9, 680e-9):
            design = LensDesign.from_focus(lam, HOLE, FOCAL)
            assert design.focal_length_at(lam) == pytest.approx(FOCAL, rel=1e-12)

    def test_from_diameter_derives_focus(self):
        design = LensDesign.from_diameter(1.792e-3, HOLE, FOCAL)
        assert design.focus_wavelength == pytest.approx(560e-9, rel=1e-12)

    def test_inconsistent_design_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            LensDesign(1.792e-3, HOLE, FOCAL, 600e-9)

    def test_blur_diameter_vanishes_in_focus(self):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        assert design.defocus_blur_diameter(560e-9) == 0.0
        assert design.defocus_blur_diameter(610e-9) == pytest.approx(
            FOCAL * 50e-9 / HOLE, rel=1e-9
        )


@pytest.fixture(scope="module")
def focused_kernel():
    design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelTruncationWarning)
        return compute_psf(design, 560e-9, PITCH, 61)


class TestComputePsf:
    def test_unit_sum_and_nonnegative(self, focused_kernel):
        assert abs(focused_kernel.samples.sum() - 1.0) < 1e-9
        assert (focused_kernel.samples >= 0).all()

    def test_in_focus_fwhm_near_abbe_width(self, focused_kernel):
        fwhm = central_lobe_fwhm(focused_kernel)
        assert 0.5 * HOLE <= fwhm <= 2.0 * HOLE

    def test_even_kernel_side_rejected(self):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        with pytest.raises(ValueError, match="odd"):
            compute_psf(design, 560e-9, PITCH, 32)

    def test_defocused_peak_below_in_focus_peak(self):
        # One design focused at 430 nm, probed in focus and far out of focus.
        design = LensDesign.from_focus(430e-9, HOLE, FOCAL)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            in_focus = compute_psf(design, 430e-9, PITCH, 201)
            defocused = compute_psf(design, 710e-9, PITCH, 201)
        assert defocused.peak < in_focus.peak

        # Independent check: the directly integrated Fresnel intensity shows
        # the same on-axis ordering.  Both intensities integrate to the
        # aperture area over the full plane, so after undoing the window
        # renormalization (multiply back by the captured fraction) the center
        # ratios must agree.
        oracle_focus = fresnel_axial_intensity(design, 430e-9, 0.0)
        oracle_defocus = fresnel_axial_intensity(design, 710e-9, 0.0)
        assert oracle_defocus < oracle_focus
        center = in_focus.side // 2
        produced_ratio = (defocused.samples[center, center] * defocused.energy_fraction) / (
            in_focus.samples[center, center] * in_focus.energy_fraction
        )
        assert produced_ratio == pytest.approx(oracle_defocus / oracle_focus, rel=0.05)

    def test_in_focus_profile_matches_quadrature_oracle(self, focused_kernel):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        center = focused_kernel.side // 2
        row = focused_kernel.samples[center]
        oracle = np.array(
            [fresnel_axial_intensity(design, 560e-9, r * PITCH) for r in range(4)]
        )
        produced = row[center : center + 4]
        # 2% headroom: the hard aperture edge is pixelated on the pupil grid
        assert produced / produced[0] == pytest.approx(oracle / oracle[0], rel=2e-2)

    def test_truncation_reported_not_silent(self):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        with pytest.warns(KernelTruncationWarning):
            psf = compute_psf(design, 560e-9, PITCH, 11)
        assert psf.energy_fraction < 0.99
        assert abs(psf.samples.sum() - 1.0) < 1e-9  # renormalized anyway

    def test_deterministic(self):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            a = compute_psf(design, 590e-9, PITCH, 41)
            b = compute_psf(design, 590e-9, PITCH, 41)
        assert np.array_equal(a.samples, b.samples)


class TestBuildPsfStack:
    def test_full_bench_shape(self):
        wavelengths = (410 + 10 * np.arange(31)) * 1e-9
        designs = [LensDesign.from_focus(lam, HOLE, FOCAL) for lam in (430e-9, 560e-9, 680e-9)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            stack = build_psf_stack(designs, wavelengths, PITCH, 31)
        assert stack.kernels.shape == (3, 31, 31, 31)
        assert stack.num_measurements * stack.num_bands == 93

    def test_single_in_focus_kernel(self):
        design = LensDesign.from_focus(560e-9, HOLE, FOCAL)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            stack = build_psf_stack([design], np.array([560e-9]), PITCH, 61)
            lone = compute_psf(design, 560e-9, PITCH, 61)
        assert np.array_equal(stack.kernels[0, 0], lone.samples)
        assert stack.kernel(0, 0).wavelength == 560e-9

    def test_peak_concentrates_at_focused_band(self):
        wavelengths = (530 + 10 * np.arange(7)) * 1e-9
        designs = [LensDesign.from_focus(lam, HOLE, FOCAL) for lam in (540e-9, 580e-9)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            stack = build_psf_stack(designs, wavelengths, PITCH, 41)
        peaks = stack.kernels.max(axis=(2, 3))
        for k, design in enumerate(designs):
            expected = int(np.argmin(np.abs(wavelengths - design.focus_wavelength)))
            assert int(np.argmax(peaks[k])) == expected

    def test_unit_sums_across_stack(self):
        wavelengths = (550 + 20 * np.arange(3)) * 1e-9
        designs = [LensDesign.from_focus(560e-9, HOLE, FOCAL)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            stack = build_psf_stack(designs, wavelengths, PITCH, 41)
        sums = stack.kernels.sum(axis=(2, 3))
        assert np.abs(sums - 1.0).max() < 1e-9

    def test_bad_wavelength_order_rejected(self):
        designs = [LensDesign.from_focus(560e-9, HOLE, FOCAL)]
        with pytest.raises(ValueError, match="increasing"):
            build_psf_stack(designs, np.array([600e-9, 550e-9]), PITCH, 31)

    def test_empty_designs_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            build_psf_stack([], np.array([560e-9]), PITCH, 31)


def test_default_kernel_side_respects_cap():
    designs = [LensDesign.from_focus(560e-9, HOLE, FOCAL)]
    wavelengths = np.array([550e-9, 560e-9, 570e-9])
    side = default_kernel_side(designs, wavelengths, PITCH, target_energy=0.999, max_side=63)
    assert side == 63  # Airy tails cannot reach 99.9% in such a small window


def test_default_kernel_side_reaches_modest_target():
    designs = [LensDesign.from_focus(560e-9, HOLE, FOCAL)]
    wavelengths = np.array([555e-9, 560e-9, 565e-9])
    side = default_kernel_side(designs, wavelengths, PITCH, target_energy=0.95, max_side=201)
    assert side % 2 == 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelTruncationWarning)
        for lam in wavelengths:
            psf = compute_psf(designs[0], float(lam), PITCH, side)
            assert psf.energy_fraction >= 0.95
