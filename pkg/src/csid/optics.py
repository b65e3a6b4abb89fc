"""Diffractive-lens optics: design rules and wavelength-dependent PSFs.

A photon sieve (or Fresnel zone plate) with outer diameter ``D`` and smallest
hole/zone width ``delta`` focuses wavelength ``lam`` at ``f = D * delta / lam``.
Fixing the detector at distance ``f0`` therefore focuses exactly one
wavelength per lens design; every other spectral band arrives defocused by an
amount that grows with its distance from the focused wavelength.  That
chromatic defocus is what encodes spectral information in the measurements.

The sieve is modelled by its first-diffraction-order equivalent lens: a clear
circular pupil of diameter ``D`` carrying a quadratic phase of focal length
``f(lam)``.  The incoherent PSF at the detector is the squared magnitude of a
single-step discrete Fresnel propagation of that pupil over the distance
``f0``.  Individual holes, higher diffraction orders, and order-efficiency
factors are not simulated; any global efficiency constant is absorbed by the
per-band detector response of the forward model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

__all__ = [
    "KernelTruncationWarning",
    "LensDesign",
    "PsfKernel",
    "PsfStack",
    "build_psf_stack",
    "central_lobe_fwhm",
    "compute_psf",
    "default_kernel_side",
    "focal_length",
    "spectral_resolution",
]

# Minimum number of pupil samples across the lens diameter.  Governs how well
# the hard aperture edge (and hence the Airy rings) is resolved when the
# defocus chirp alone would permit a very coarse grid.
_MIN_APERTURE_SAMPLES = 128

# Captured-energy fraction below which a kernel is reported as truncated.
_TRUNCATION_REPORT_FRACTION = 0.99


class KernelTruncationWarning(UserWarning):
    """A PSF kernel window captured less than 99% of the diffracted energy."""


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def focal_length(outer_diameter: float, hole_diameter: float, wavelength: float) -> float:
    """First-order focal length ``D * delta / lam`` of the diffractive lens.

    Parameters are in meters; the result is in meters.  Raises ``ValueError``
    for non-positive input.
    """
    _require_positive(
        outer_diameter=outer_diameter, hole_diameter=hole_diameter, wavelength=wavelength
    )
    return outer_diameter * hole_diameter / wavelength


def spectral_resolution(hole_diameter: float, focal_distance: float) -> float:
    """Expected spectral resolution ``4 * delta**2 / f0`` of the lens, in meters."""
    _require_positive(hole_diameter=hole_diameter, focal_distance=focal_distance)
    return 4.0 * hole_diameter**2 / focal_distance


@dataclass(frozen=True)
class LensDesign:
    """A diffractive lens design focusing one wavelength onto the detector.

    The four quantities satisfy ``focus_wavelength = outer_diameter *
    hole_diameter / focal_distance`` by construction: build a design from any
    three of them through the ``from_*`` constructors and the fourth is
    derived.  Direct construction checks the relation.

    Attributes
    ----------
    outer_diameter:
        Clear diameter D of the lens (m).
    hole_diameter:
        Smallest hole/zone width delta (m); also the Abbe spatial resolution.
    focal_distance:
        Lens-to-detector distance f0 (m).
    focus_wavelength:
        The wavelength brought to focus at the detector plane (m).
    """

    outer_diameter: float
    hole_diameter: float
    focal_distance: float
    focus_wavelength: float

    def __post_init__(self) -> None:
        _require_positive(
            outer_diameter=self.outer_diameter,
            hole_diameter=self.hole_diameter,
            focal_distance=self.focal_distance,
            focus_wavelength=self.focus_wavelength,
        )
        derived = self.outer_diameter * self.hole_diameter / self.focal_distance
        if not math.isclose(derived, self.focus_wavelength, rel_tol=1e-9):
            raise ValueError(
                "inconsistent design: D*delta/f0 = "
                f"{derived:.6e} m but focus_wavelength = {self.focus_wavelength:.6e} m"
            )

    @classmethod
    def from_focus(
        cls, focus_wavelength: float, hole_diameter: float, focal_distance: float
    ) -> "LensDesign":
        """Derive the outer diameter from the wavelength to be focused."""
        _require_positive(
            focus_wavelength=focus_wavelength,
            hole_diameter=hole_diameter,
            focal_distance=focal_distance,
        )
        diameter = focus_wavelength * focal_distance / hole_diameter
        return cls(diameter, hole_diameter, focal_distance, focus_wavelength)

    @classmethod
    def from_diameter(
        cls, outer_diameter: float, hole_diameter: float, focal_distance: float
    ) -> "LensDesign":
        """Derive the focused wavelength from the lens geometry."""
        lam = outer_diameter * hole_diameter / focal_distance
        return cls(outer_diameter, hole_diameter, focal_distance, lam)

    def focal_length_at(self, wavelength: float) -> float:
        """Focal length of this lens at an arbitrary wavelength (m)."""
        return focal_length(self.outer_diameter, self.hole_diameter, wavelength)

    def defocus_blur_diameter(self, wavelength: float) -> float:
        """Geometric defocus blur diameter at the detector plane (m).

        By similar triangles the blur disk of a point source is
        ``D * |1 - f0/f(lam)|``, which reduces to
        ``f0 * |focus_wavelength - lam| / delta``.
        """
        _require_positive(wavelength=wavelength)
        f_lam = self.focal_length_at(wavelength)
        return self.outer_diameter * abs(1.0 - self.focal_distance / f_lam)


@dataclass(frozen=True)
class PsfKernel:
    """A sampled incoherent PSF on the detector grid.

    ``samples`` is a square, odd-sided, nonnegative array normalized to unit
    sum; its center pixel corresponds to the optical axis.  ``energy_fraction``
    records the fraction of total diffracted energy that fell inside the
    kernel window before renormalization.
    """

    samples: np.ndarray
    pixel_pitch: float
    wavelength: float
    measurement_index: int
    energy_fraction: float = 1.0

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"kernel must be square 2D, got shape {s.shape}")
        if s.shape[0] % 2 != 1:
            raise ValueError(f"kernel side must be odd, got {s.shape[0]}")
        object.__setattr__(self, "samples", s)

    @property
    def side(self) -> int:
        return self.samples.shape[0]

    @property
    def peak(self) -> float:
        return float(self.samples.max())


@dataclass
class PsfStack:
    """Bank of PSF kernels for K lens designs times S wavelengths.

    ``kernels`` has shape ``(K, S, side, side)``; ``kernels[k, s]`` is the PSF
    of design ``k`` at ``wavelengths[s]``.  ``designs`` may be ``None`` for
    synthetic banks (for example per-frame delta kernels used in tests).
    """

    kernels: np.ndarray
    wavelengths: np.ndarray
    pixel_pitch: float
    designs: tuple[LensDesign, ...] | None = None
    energy_fractions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if self.kernels.ndim != 4:
            raise ValueError(f"kernels must be (K, S, side, side), got {self.kernels.shape}")
        k, s, side_a, side_b = self.kernels.shape
        if side_a != side_b or side_a % 2 != 1:
            raise ValueError(f"kernels must be square with odd side, got {side_a}x{side_b}")
        if self.wavelengths.shape != (s,):
            raise ValueError(
                f"wavelength grid has {self.wavelengths.size} entries for {s} bands"
            )
        if np.any(np.diff(self.wavelengths) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if self.designs is not None and len(self.designs) != k:
            raise ValueError(f"{len(self.designs)} designs for {k} measurement banks")
        _require_positive(pixel_pitch=self.pixel_pitch)

    @property
    def num_measurements(self) -> int:
        return self.kernels.shape[0]

    @property
    def num_bands(self) -> int:
        return self.kernels.shape[1]

    @property
    def side(self) -> int:
        return self.kernels.shape[2]

    def kernel(self, k: int, s: int) -> PsfKernel:
        """View kernel (k, s) with its optical metadata."""
        frac = 1.0 if self.energy_fractions is None else float(self.energy_fractions[k, s])
        return PsfKernel(
            samples=self.kernels[k, s],
            pixel_pitch=self.pixel_pitch,
            wavelength=float(self.wavelengths[s]),
            measurement_index=k,
            energy_fraction=frac,
        )


def _fresnel_intensity(
    design: LensDesign, wavelength: float, pixel_pitch: float, kernel_side: int
) -> tuple[np.ndarray, float]:
    """Propagate the chirped pupil to the detector and sample the intensity.

    Returns the (unnormalized) kernel samples on the detector grid plus the
    fraction of total grid energy inside the kernel window.

    The detector-plane field is evaluated on a fine grid of pitch
    ``pixel_pitch / m`` where ``m`` is the smallest integer that lets the fine
    grid Nyquist-sample the intensity (band limit ``2 D / (lam f0)``); the
    kernel is then decimated to the detector pitch, matching a detector that
    point-samples the irradiance.  The pupil grid size satisfies the quadratic
    chirp Nyquist rate with a 2x oversampling margin.
    """
    lam = wavelength
    z = design.focal_distance
    diameter = design.outer_diameter
    curvature = 1.0 / z - 1.0 / design.focal_length_at(lam)
    blur = diameter * z * abs(curvature)

    m = max(1, math.ceil(2.0 * diameter * pixel_pitch / (lam * z)))
    fine_pitch = pixel_pitch / m
    pupil_span = lam * z / fine_pitch  # always >= 2 * diameter by choice of m

    half = (kernel_side - 1) // 2
    n_min = max(
        2.0 * blur / fine_pitch,  # chirp Nyquist x2 == output spans twice the blur
        _MIN_APERTURE_SAMPLES * pupil_span / diameter,
        2.0 * ((kernel_side - 1) * m + 1),
    )
    n = next_fast_len(int(math.ceil(n_min)))

    pupil_pitch = pupil_span / n
    coords = (np.arange(n) - n // 2) * pupil_pitch
    rr2 = coords[:, None] ** 2 + coords[None, :] ** 2
    inside = rr2 <= (diameter / 2.0) ** 2
    pupil = np.zeros((n, n), dtype=np.complex128)
    pupil[inside] = np.exp(1j * np.pi / lam * curvature * rr2[inside])

    spectrum = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(pupil)))
    intensity = spectrum.real**2 + spectrum.imag**2

    centers = n // 2 + m * np.arange(-half, half + 1)
    kernel = intensity[np.ix_(centers, centers)].copy()

    fine_coords = (np.arange(n) - n // 2) * fine_pitch
    window = np.flatnonzero(np.abs(fine_coords) <= (half + 0.5) * pixel_pitch)
    captured = float(intensity[np.ix_(window, window)].sum() / intensity.sum())
    return kernel, captured


def compute_psf(
    design: LensDesign, wavelength: float, pixel_pitch: float, kernel_side: int
) -> PsfKernel:
    """Compute the incoherent PSF of a lens design at one wavelength.

    Parameters
    ----------
    design:
        Lens geometry; defines both the aperture and the chromatic focal law.
    wavelength:
        Band wavelength (m), strictly positive.
    pixel_pitch:
        Detector sampling interval (m).
    kernel_side:
        Odd number of detector samples per kernel side.

    Returns
    -------
    PsfKernel
        Unit-sum nonnegative kernel.  When the window captures less than 99%
        of the diffracted energy a :class:`KernelTruncationWarning` is issued
        and the truncated kernel is renormalized; ``energy_fraction`` always
        records the captured fraction.
    """
    _require_positive(wavelength=wavelength, pixel_pitch=pixel_pitch)
    if kernel_side < 1 or kernel_side % 2 != 1:
        raise ValueError(f"kernel_side must be a positive odd integer, got {kernel_side}")

    kernel, captured = _fresnel_intensity(design, wavelength, pixel_pitch, kernel_side)
    if captured < _TRUNCATION_REPORT_FRACTION:
        warnings.warn(
            f"kernel side {kernel_side} captures only {captured:.2%} of the "
            f"diffracted energy for wavelength {wavelength * 1e9:.1f} nm "
            f"(design focus {design.focus_wavelength * 1e9:.1f} nm); "
            "the truncated kernel was renormalized",
            KernelTruncationWarning,
            stacklevel=2,
        )
    kernel /= kernel.sum()
    return PsfKernel(
        samples=kernel,
        pixel_pitch=pixel_pitch,
        wavelength=wavelength,
        measurement_index=-1,
        energy_fraction=captured,
    )


def build_psf_stack(
    designs: list[LensDesign] | tuple[LensDesign, ...],
    wavelengths: np.ndarray,
    pixel_pitch: float,
    kernel_side: int,
) -> PsfStack:
    """Compute the full K x S PSF bank for a measurement schedule.

    ``designs`` must be nonempty and ``wavelengths`` strictly increasing.
    Errors from individual kernels are re-raised with their (k, s) position.
    """
    designs = tuple(designs)
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    if not designs:
        raise ValueError("designs must be nonempty")
    if wavelengths.ndim != 1 or wavelengths.size == 0:
        raise ValueError("wavelengths must be a nonempty 1D array")
    if np.any(np.diff(wavelengths) <= 0):
        raise ValueError("wavelengths must be strictly increasing")

    bank = np.empty((len(designs), wavelengths.size, kernel_side, kernel_side))
    fractions = np.empty((len(designs), wavelengths.size))
    for k, design in enumerate(designs):
        for s, lam in enumerate(wavelengths):
            try:
                psf = compute_psf(design, float(lam), pixel_pitch, kernel_side)
            except ValueError as exc:
                raise ValueError(f"kernel (k={k}, s={s}): {exc}") from exc
            bank[k, s] = psf.samples
            fractions[k, s] = psf.energy_fraction
    return PsfStack(
        kernels=bank,
        wavelengths=wavelengths,
        pixel_pitch=pixel_pitch,
        designs=designs,
        energy_fractions=fractions,
    )


def default_kernel_side(
    designs: list[LensDesign] | tuple[LensDesign, ...],
    wavelengths: np.ndarray,
    pixel_pitch: float,
    target_energy: float = 0.999,
    max_side: int | None = None,
) -> int:
    """Pick an odd kernel side capturing ``target_energy`` of the worst kernel.

    Doubles a geometric initial guess until every (design, wavelength) pair
    reaches the target or ``max_side`` is hit.  Slowly decaying Airy tails can
    make 99.9% unreachable on small grids, which is why callers normally cap
    the search with the simulation grid size; without a cap the search stops
    at 1023 samples per side.
    """
    designs = tuple(designs)
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    blur = max(
        d.defocus_blur_diameter(float(lam)) for d in designs for lam in wavelengths
    )
    side = int(math.ceil(blur / pixel_pitch)) + 9
    side += 1 - side % 2
    if max_side is None:
        max_side = 1023
    max_side -= 1 - max_side % 2

    while True:
        if side >= max_side:
            return max_side
        worst = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KernelTruncationWarning)
            for design in designs:
                for lam in wavelengths:
                    psf = compute_psf(design, float(lam), pixel_pitch, side)
                    worst = min(worst, psf.energy_fraction)
        if worst >= target_energy:
            return side
        side = 2 * side + 1


def central_lobe_fwhm(kernel: PsfKernel) -> float:
    """Full width at half maximum of the central lobe, in meters.

    Measured along the central row with linear interpolation between samples.
    Assumes the peak sits at the center pixel, which holds for in-focus and
    mildly defocused kernels.
    """
    row = kernel.samples[kernel.side // 2]
    center = kernel.side // 2
    half_max = row[center] / 2.0
    j = center
    while j + 1 < row.size and row[j + 1] > half_max:
        j += 1
    if j + 1 == row.size:
        raise ValueError("central lobe wider than the kernel window")
    t = (row[j] - half_max) / (row[j] - row[j + 1])
    return 2.0 * (j - center + t) * kernel.pixel_pitch
