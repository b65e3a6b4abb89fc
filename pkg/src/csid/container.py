"""Binary spectral-cube container and PGM import/export.

Container layout (all integers little-endian):

======== ======================= =========================================
offset   field                   encoding
======== ======================= =========================================
0        magic                   8 bytes, ``b"CSIDCUBE"``
8        version                 u16, currently 1
10       dims (S, Nx, Ny)        3 x u32
22       pixel_pitch_m           f64
30       wavelengths_m           S x f64, strictly increasing
30+8S    payload                 S*Nx*Ny x f32, band-major then row-major
...      metadata length         u32
...      metadata                UTF-8 JSON (sorted keys on write)
======== ======================= =========================================

Payloads are stored at f32 precision; reading converts to f64.  The JSON
metadata block carries seeds, noise level, and other provenance, and is
written deterministically so identical runs produce byte-identical files.

Grayscale images use binary PGM (``P5``), maxval 65535, row-major with
big-endian 16-bit samples as required by the Netpbm format.
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path

import numpy as np

from csid.model import CodedApertureSet, MeasurementSet, SpectralCube
from csid.optics import PsfStack

__all__ = [
    "BadMagicError",
    "ContainerError",
    "DimensionError",
    "TruncatedPayloadError",
    "import_raster_stack",
    "read_cube",
    "read_mask",
    "read_measurements",
    "read_pgm",
    "read_psf_stack",
    "write_cube",
    "write_mask",
    "write_measurements",
    "write_pgm",
    "write_psf_stack",
]

MAGIC = b"CSIDCUBE"
VERSION = 1
PGM_MAXVAL = 65535

# Refuse absurd dimension products rather than attempting the allocation.
_MAX_VOXELS = 2**31


class ContainerError(ValueError):
    """Malformed container file."""


class BadMagicError(ContainerError):
    """The file does not start with the container magic."""


class DimensionError(ContainerError):
    """Declared dimensions are zero, inconsistent, or overflow the format."""


class TruncatedPayloadError(ContainerError):
    """The file ends before the declared payload or metadata."""


def _encode_metadata(metadata: dict | None) -> bytes:
    text = json.dumps(metadata or {}, sort_keys=True, separators=(",", ":"))
    return text.encode("utf-8")


def _write_container(
    path: Path | str,
    values: np.ndarray,
    wavelengths: np.ndarray,
    pixel_pitch: float,
    metadata: dict | None,
) -> None:
    values = np.asarray(values)
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    bands, nx, ny = values.shape
    if wavelengths.shape != (bands,):
        raise DimensionError(f"{wavelengths.size} wavelengths for {bands} bands")
    if np.any(np.diff(wavelengths) <= 0):
        raise ContainerError("wavelengths must be strictly increasing")
    if bands * nx * ny > _MAX_VOXELS:
        raise DimensionError(f"dimension product {bands}x{nx}x{ny} overflows the format")

    meta = _encode_metadata(metadata)
    payload = np.ascontiguousarray(values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<III", bands, nx, ny))
        fh.write(struct.pack("<d", pixel_pitch))
        fh.write(wavelengths.astype("<f8").tobytes())
        fh.write(payload.tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def _read_container(path: Path | str) -> tuple[np.ndarray, np.ndarray, float, dict]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: bad magic, not a cube container")
    offset = len(MAGIC)
    if len(blob) < offset + 14 + 8:
        raise TruncatedPayloadError(f"{path}: header truncated")
    (version,) = struct.unpack_from("<H", blob, offset)
    offset += 2
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    bands, nx, ny = struct.unpack_from("<III", blob, offset)
    offset += 12
    if min(bands, nx, ny) == 0 or bands * nx * ny > _MAX_VOXELS:
        raise DimensionError(f"{path}: bad dimensions {bands}x{nx}x{ny}")
    (pixel_pitch,) = struct.unpack_from("<d", blob, offset)
    offset += 8

    wl_bytes = 8 * bands
    payload_bytes = 4 * bands * nx * ny
    if len(blob) < offset + wl_bytes + payload_bytes + 4:
        raise TruncatedPayloadError(f"{path}: payload truncated")
    wavelengths = np.frombuffer(blob, dtype="<f8", count=bands, offset=offset).copy()
    offset += wl_bytes
    if np.any(np.diff(wavelengths) <= 0):
        raise ContainerError(f"{path}: wavelengths not strictly increasing")
    payload = np.frombuffer(blob, dtype="<f4", count=bands * nx * ny, offset=offset)
    offset += payload_bytes
    (meta_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + meta_len:
        raise TruncatedPayloadError(f"{path}: metadata truncated")
    if len(blob) != offset + meta_len:
        raise ContainerError(f"{path}: {len(blob) - offset - meta_len} trailing bytes")
    try:
        metadata = json.loads(blob[offset : offset + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: metadata is not valid JSON: {exc}") from exc
    values = payload.reshape(bands, nx, ny).astype(np.float64)
    return values, wavelengths, float(pixel_pitch), metadata


def write_cube(cube: SpectralCube, path: Path | str, metadata: dict | None = None) -> None:
    """Serialize a spectral cube (payload stored at f32)."""
    _write_container(path, cube.values, cube.wavelengths, cube.pixel_pitch, metadata)


def read_cube(path: Path | str) -> tuple[SpectralCube, dict]:
    """Read a cube container; returns the cube and its metadata record."""
    values, wavelengths, pitch, metadata = _read_container(path)
    return SpectralCube(values=values, wavelengths=wavelengths, pixel_pitch=pitch), metadata


def write_measurements(
    measurements: MeasurementSet,
    focus_wavelengths: np.ndarray,
    pixel_pitch: float,
    path: Path | str,
    metadata: dict | None = None,
) -> None:
    """Store K measurement frames as bands keyed by their focused wavelengths.

    The container's wavelength slots hold the focus wavelength of each lens
    design, which must therefore be strictly increasing.
    """
    meta = dict(metadata or {})
    meta.update(
        {
            "kind": "measurements",
            "snr_db": measurements.snr_db,
            "noise_sigma": measurements.noise_sigma,
            "noise_seed": measurements.seed,
        }
    )
    _write_container(path, measurements.frames, focus_wavelengths, pixel_pitch, meta)


def read_measurements(path: Path | str) -> tuple[MeasurementSet, np.ndarray, dict]:
    """Read measurement frames plus the focus wavelengths they were keyed by."""
    frames, focus_wavelengths, _pitch, metadata = _read_container(path)
    snr_db = float(metadata.get("snr_db", np.inf))
    sigma = float(metadata.get("noise_sigma", 0.0))
    seed = metadata.get("noise_seed")
    ms = MeasurementSet(frames=frames, noise_sigma=sigma, snr_db=snr_db, seed=seed)
    return ms, focus_wavelengths, metadata


def write_mask(
    masks: CodedApertureSet,
    wavelengths: np.ndarray,
    path: Path | str,
    metadata: dict | None = None,
) -> None:
    """Store a coded-aperture set, broadcasting a shared mask over all bands."""
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    values = np.broadcast_to(
        masks.masks, (wavelengths.size, *masks.grid_shape)
    )
    meta = dict(metadata or {})
    meta.update({"kind": "mask", "mask_seed": masks.seed})
    _write_container(path, values, wavelengths, masks.pixel_pitch, meta)


def read_mask(path: Path | str) -> tuple[CodedApertureSet, dict]:
    values, _wavelengths, pitch, metadata = _read_container(path)
    seed = metadata.get("mask_seed")
    return CodedApertureSet(masks=values, pixel_pitch=pitch, seed=seed), metadata


def write_psf_stack(stack: PsfStack, directory: Path | str, metadata: dict | None = None) -> list[Path]:
    """Write one container per lens design, kernels stored as bands.

    Returns the written paths (``psf_k0.csid``, ``psf_k1.csid``, ...).  A
    per-design split keeps the container invariant of strictly increasing
    wavelengths, which a flat K*S layout would violate.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(stack.num_measurements):
        meta = dict(metadata or {})
        meta.update({"kind": "psf", "measurement_index": k})
        if stack.designs is not None:
            design = stack.designs[k]
            meta.update(
                {
                    "outer_diameter_m": design.outer_diameter,
                    "hole_diameter_m": design.hole_diameter,
                    "focal_distance_m": design.focal_distance,
                    "focus_wavelength_m": design.focus_wavelength,
                }
            )
        path = directory / f"psf_k{k}.csid"
        _write_container(path, stack.kernels[k], stack.wavelengths, stack.pixel_pitch, meta)
        paths.append(path)
    return paths


def read_psf_stack(paths: list[Path | str]) -> PsfStack:
    """Reassemble a PSF stack from per-design containers (ordered by k)."""
    banks = []
    wavelengths = None
    pitch = None
    for path in paths:
        values, wl, p, _meta = _read_container(path)
        if wavelengths is None:
            wavelengths, pitch = wl, p
        elif not np.array_equal(wl, wavelengths):
            raise ContainerError(f"{path}: wavelength grid differs between stack parts")
        banks.append(values)
    if not banks:
        raise ContainerError("no PSF containers given")
    return PsfStack(
        kernels=np.stack(banks), wavelengths=wavelengths, pixel_pitch=pitch
    )


def write_pgm(image: np.ndarray, path: Path | str, max_value: float | None = None) -> None:
    """Write a 2D array as binary 16-bit PGM, scaling ``max_value`` to 65535.

    ``max_value`` defaults to the image maximum (or 1.0 for an all-zero
    image).  Values are clipped to [0, max_value] first.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM export needs a 2D image, got shape {image.shape}")
    if max_value is None:
        max_value = float(image.max()) or 1.0
    scaled = np.clip(image / max_value, 0.0, 1.0)
    samples = np.round(scaled * PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(samples.tobytes())


def read_pgm(path: Path | str) -> np.ndarray:
    """Read a binary PGM (maxval 255 or 65535) as float64 scaled to [0, 1]."""
    blob = Path(path).read_bytes()
    header = re.match(
        rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", blob
    )
    if header is None:
        raise ValueError(f"{path}: not a binary PGM file")
    width, height, maxval = (int(g) for g in header.groups())
    data = blob[header.end() :]
    if maxval < 256:
        samples = np.frombuffer(data, dtype=np.uint8, count=width * height)
    elif maxval < 65536:
        samples = np.frombuffer(data, dtype=">u2", count=width * height)
    else:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    if samples.size != width * height:
        raise ValueError(f"{path}: PGM pixel data truncated")
    return samples.reshape(height, width).astype(np.float64) / maxval


def import_raster_stack(
    directory: Path | str,
    wavelengths: np.ndarray,
    pixel_pitch: float,
    clip_outliers: tuple[int, float] | None = None,
) -> SpectralCube:
    """Build a [0, 1]-normalized cube from per-band PGM files in a directory.

    Files are taken in sorted name order, one per wavelength.  When
    ``clip_outliers = (count, value)`` is given, the ``count`` largest voxel
    values are replaced by ``value`` before the global rescale, suppressing
    isolated hot pixels that would otherwise dominate the normalization.
    """
    directory = Path(directory)
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if len(files) != wavelengths.size:
        raise ValueError(
            f"{directory}: found {len(files)} PGM bands for {wavelengths.size} wavelengths"
        )
    bands = []
    shape = None
    for path in files:
        band = read_pgm(path)
        if shape is None:
            shape = band.shape
        elif band.shape != shape:
            raise ValueError(f"{path}: band shape {band.shape} differs from {shape}")
        bands.append(band)
    values = np.stack(bands)

    if clip_outliers is not None:
        count, value = clip_outliers
        if count > 0:
            flat = values.ravel()
            worst = np.argsort(flat)[-count:]
            flat[worst] = value
    peak = values.max()
    if peak > 0:
        values = values / peak
    return SpectralCube(values=values, wavelengths=wavelengths, pixel_pitch=pixel_pitch)
