"""Metric identities, invariances, and orderings."""

import math

import numpy as np
import pytest

from csid.metrics import EvaluationReport, evaluate_cubes, nmse, psnr, sam, ssim


@pytest.fixture()
def cube(rng):
    return rng.random((5, 32, 32))


class TestPsnr:
    def test_identical_is_infinite(self, cube):
        assert psnr(cube, cube) == math.inf

    def test_known_mse_20db(self):
        x = np.zeros((1, 10, 10))
        y = np.full((1, 10, 10), 0.1)  # MSE = 0.01
        assert psnr(y, x) == pytest.approx(20.0, abs=1e-12)

    def test_known_mse_30db(self):
        x = np.zeros((1, 10, 10))
        y = np.full((1, 10, 10), math.sqrt(0.001))
        assert psnr(y, x) == pytest.approx(30.0, abs=1e-9)

    def test_monotone_in_noise(self, cube, rng):
        values = []
        for scale in (0.01, 0.03, 0.1):
            noisy = cube + scale * rng.standard_normal(cube.shape)
            values.append(psnr(noisy, cube))
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch(self, cube):
        with pytest.raises(ValueError, match="shape"):
            psnr(cube, cube[:, :16, :16])

    def test_bad_peak(self, cube):
        with pytest.raises(ValueError, match="peak"):
            psnr(cube, cube, peak=0.0)


class TestSsim:
    def test_identical_is_one(self, cube):
        assert ssim(cube, cube) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self, cube, rng):
        other = np.clip(cube + 0.05 * rng.standard_normal(cube.shape), 0, 1)
        assert ssim(cube, other) == pytest.approx(ssim(other, cube), abs=1e-12)

    def test_inversion_degrades(self, cube):
        assert ssim(1.0 - cube, cube) < 1.0

    def test_bias_beats_noise(self, cube, rng):
        biased = np.clip(cube + 0.1, 0, 1)
        noise = rng.random(cube.shape)
        assert ssim(biased, cube) < 1.0
        assert ssim(biased, cube) > ssim(noise, cube)

    def test_window_too_large(self, rng):
        small = rng.random((2, 8, 8))
        with pytest.raises(ValueError, match="window"):
            ssim(small, small)


class TestSam:
    def test_positive_scaling_invariant(self, cube):
        assert sam(3.7 * cube, cube) == pytest.approx(0.0, abs=1e-5)

    def test_orthogonal_spectra(self):
        x = np.zeros((2, 4, 4))
        y = np.zeros((2, 4, 4))
        x[0] = 1.0  # spectra along band 0
        y[1] = 1.0  # spectra along band 1
        assert sam(x, y) == pytest.approx(90.0, abs=1e-9)

    def test_single_pixel_45_degrees(self):
        x = np.array([1.0, 0.0]).reshape(2, 1, 1)
        y = np.array([1.0, 1.0]).reshape(2, 1, 1)
        assert sam(x, y) == pytest.approx(45.0, abs=1e-9)

    def test_zero_norm_pixels_excluded(self):
        x = np.zeros((2, 2, 1))
        y = np.zeros((2, 2, 1))
        x[:, 0, 0] = (1.0, 0.0)
        y[:, 0, 0] = (1.0, 1.0)
        # second pixel has zero spectra in both cubes and must not poison the mean
        assert sam(x, y) == pytest.approx(45.0, abs=1e-9)

    def test_all_zero_rejected(self):
        zeros = np.zeros((3, 4, 4))
        with pytest.raises(ValueError, match="zero norm"):
            sam(zeros, zeros)

    def test_per_pixel_scaling_invariance(self, cube, rng):
        gains = rng.uniform(0.5, 2.0, size=(1, *cube.shape[1:]))
        assert sam(cube * gains, cube) == pytest.approx(0.0, abs=1e-5)


class TestNmse:
    def test_identical_is_zero(self, rng):
        s = rng.random(16)
        assert nmse(s, s) == 0.0

    def test_zero_estimate_is_hundred(self, rng):
        s = rng.random(16) + 0.1
        assert nmse(np.zeros_like(s), s) == pytest.approx(100.0, rel=1e-12)

    def test_ten_percent_overshoot_is_one(self, rng):
        s = rng.random(16) + 0.1
        assert nmse(1.1 * s, s) == pytest.approx(1.0, rel=1e-10)

    def test_scale_invariant(self, rng):
        s = rng.random(16) + 0.1
        e = s + 0.05 * rng.standard_normal(16)
        assert nmse(3 * e, 3 * s) == pytest.approx(nmse(e, s), rel=1e-12)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="zero norm"):
            nmse(np.ones(4), np.zeros(4))


class TestEvaluationReport:
    def test_aggregates_and_serializes(self, cube, rng):
        estimate = np.clip(cube + 0.02 * rng.standard_normal(cube.shape), 0, 1)
        report = evaluate_cubes(estimate, cube)
        assert report.per_band_psnr.shape == (5,)
        assert np.isfinite(report.psnr_db)
        assert 0.0 <= report.ssim <= 1.0
        row = report.to_csv_row()
        assert len(row.split(",")) == len(EvaluationReport.CSV_HEADER.split(","))
        text = report.to_text()
        assert "PSNR" in text and "SAM" in text

    def test_identical_cubes(self, cube):
        report = evaluate_cubes(cube, cube)
        assert report.psnr_db == math.inf
        assert report.ssim == pytest.approx(1.0, abs=1e-12)
        assert report.sam_deg == pytest.approx(0.0, abs=1e-5)
        assert report.nmse_percent == 0.0
