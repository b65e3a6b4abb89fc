"""Experiment configuration: JSON document, schema-validated, unit-suffixed.

A config file fully determines a simulation/reconstruction run.  All optics
fields default to the reference bench: 8 um smallest hole, 2.56 cm lens to
detector distance, 4 um detector pitch, 31 bands over 410-710 nm.  Keys carry
explicit unit suffixes (nm, um, cm); everything is converted to meters on
load.  Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from csid.solver import SolverConfig

__all__ = ["ConfigError", "ExperimentConfig", "CONFIG_SCHEMA"]

_NM = 1e-9
_UM = 1e-6
_CM = 1e-2


class ConfigError(ValueError):
    """Invalid experiment configuration."""


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "cube": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["pgm_dir"],
                    "properties": {
                        "pgm_dir": {"type": "string"},
                        "clip_outliers": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["count", "value"],
                            "properties": {
                                "count": {"type": "integer", "minimum": 0},
                                "value": {"type": "number"},
                            },
                        },
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["synthetic"],
                    "properties": {
                        "synthetic": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "grid": {
                                    "type": "array",
                                    "items": {"type": "integer", "minimum": 8},
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                                "seed": {"type": "integer", "minimum": 0},
                            },
                        }
                    },
                },
            ]
        },
        "wavelengths_nm": {
            "oneOf": [
                {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "count"],
                    "properties": {
                        "start": {"type": "number", "exclusiveMinimum": 0},
                        "stop": {"type": "number", "exclusiveMinimum": 0},
                        "count": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "focus_wavelengths_nm": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "hole_diameter_um": {"type": "number", "exclusiveMinimum": 0},
        "focal_distance_cm": {"type": "number", "exclusiveMinimum": 0},
        "pixel_pitch_um": {"type": "number", "exclusiveMinimum": 0},
        "kernel_side": {"type": "integer", "minimum": 1},
        "mask": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_db": {"type": ["number", "null"]},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": ["number", "null"], "minimum": 0},
                "max_admm_iters": {"type": "integer", "minimum": 1},
                "admm_tol": {"type": "number", "exclusiveMinimum": 0},
                "cg_tol": {"type": "number", "exclusiveMinimum": 0},
                "cg_max_iters": {"type": "integer", "minimum": 1},
                "wavelet_levels": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "output_dir": {"type": "string"},
    },
}

_DEFAULT_WAVELENGTHS = {"start": 410.0, "stop": 710.0, "count": 31}
_DEFAULT_FOCUS = [430.0, 560.0, 680.0]


@dataclass
class ExperimentConfig:
    """Parsed experiment description with all quantities in SI units."""

    cube_source: str | dict
    wavelengths: np.ndarray
    focus_wavelengths: np.ndarray
    hole_diameter: float = 8.0 * _UM
    focal_distance: float = 2.56 * _CM
    pixel_pitch: float = 4.0 * _UM
    kernel_side: int | None = None
    mask_p: float = 0.5
    mask_seed: int = 1234
    snr_db: float = 28.0
    noise_seed: int = 5678
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Path | None = None

    def __post_init__(self) -> None:
        self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        self.focus_wavelengths = np.asarray(self.focus_wavelengths, dtype=np.float64)
        if np.any(np.diff(self.wavelengths) <= 0):
            raise ConfigError("wavelengths must be strictly increasing")
        if np.any(np.diff(self.focus_wavelengths) <= 0):
            raise ConfigError("focus wavelengths must be strictly increasing")
        if self.kernel_side is not None and self.kernel_side % 2 == 0:
            raise ConfigError(f"kernel_side must be odd, got {self.kernel_side}")

    @property
    def num_measurements(self) -> int:
        return self.focus_wavelengths.size

    @classmethod
    def from_dict(cls, document: dict) -> "ExperimentConfig":
        """Validate a JSON document against the schema and convert units."""
        try:
            jsonschema.validate(document, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message}") from exc

        wl_spec = document.get("wavelengths_nm", _DEFAULT_WAVELENGTHS)
        if isinstance(wl_spec, dict):
            wavelengths = np.linspace(wl_spec["start"], wl_spec["stop"], wl_spec["count"])
        else:
            wavelengths = np.asarray(wl_spec, dtype=np.float64)
        focus = np.asarray(
            document.get("focus_wavelengths_nm", _DEFAULT_FOCUS), dtype=np.float64
        )

        mask = document.get("mask", {})
        noise = document.get("noise", {})
        snr_db = noise.get("snr_db", 28.0)
        if snr_db is None:  # null requests noiseless frames
            snr_db = np.inf
        solver_doc = document.get("solver", {})
        try:
            solver = SolverConfig(**solver_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver config: {exc}") from exc

        out = document.get("output_dir")
        return cls(
            cube_source=document.get("cube", {"synthetic": {}}),
            wavelengths=wavelengths * _NM,
            focus_wavelengths=focus * _NM,
            hole_diameter=document.get("hole_diameter_um", 8.0) * _UM,
            focal_distance=document.get("focal_distance_cm", 2.56) * _CM,
            pixel_pitch=document.get("pixel_pitch_um", 4.0) * _UM,
            kernel_side=document.get("kernel_side"),
            mask_p=mask.get("p", 0.5),
            mask_seed=mask.get("seed", 1234),
            snr_db=snr_db,
            noise_seed=noise.get("seed", 5678),
            solver=solver,
            output_dir=Path(out) if out is not None else None,
        )

    @classmethod
    def from_file(cls, path: Path | str) -> "ExperimentConfig":
        try:
            document = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
        return cls.from_dict(document)

    def provenance(self) -> dict:
        """Deterministic summary embedded in output container metadata."""
        return {
            "wavelengths_nm": [round(w / _NM, 6) for w in self.wavelengths],
            "focus_wavelengths_nm": [round(w / _NM, 6) for w in self.focus_wavelengths],
            "hole_diameter_um": self.hole_diameter / _UM,
            "focal_distance_cm": self.focal_distance / _CM,
            "pixel_pitch_um": self.pixel_pitch / _UM,
            "mask_p": self.mask_p,
            "mask_seed": self.mask_seed,
            "snr_db": self.snr_db if np.isfinite(self.snr_db) else None,
            "noise_seed": self.noise_seed,
        }
