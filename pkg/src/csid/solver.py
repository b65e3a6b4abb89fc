"""ADMM reconstruction of the spectral cube from compressive measurements.

Solves

    min ||Phi x||_1   subject to   ||y - H C x||_2 <= eps

by variable splitting (z1 = x in the transform-prior term, z2 = H C x in the
data-fidelity ball) and scaled-dual ADMM.  Each sweep performs

1. x-update: conjugate-gradient solve of the SPD normal equation
   (I + C H^H H C) x = z1 + d1 + C H^H (z2 + d2), warm-started at the
   previous iterate;
2. z1-update: transform-domain soft thresholding with threshold 1/mu;
3. z2-update: Euclidean projection onto the eps-ball centered at y;
4/5. dual updates d <- d - (primal residual).

The loop stops when the relative x-change falls below ``admm_tol`` or after
``max_admm_iters`` sweeps.  The returned cube is clamped to [0, 1]; iterates
are never clamped, since the optimization problem carries no range
constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from csid.model import (
    CodedApertureSet,
    DetectorResponse,
    MeasurementSet,
    SpectralCube,
    SystemOperator,
)
from csid.optics import PsfStack
from csid.transforms import analysis_values, default_levels, soft_threshold, synthesis_values

__all__ = [
    "CgResult",
    "IterationRecord",
    "SolverConfig",
    "SolverDivergenceError",
    "SolverState",
    "admm_reconstruct",
    "cg_solve_normal",
    "update_z1",
    "update_z2",
]

# Misfit growth factor that triggers the divergence abort.
_DIVERGENCE_FACTOR = 10.0


class SolverDivergenceError(RuntimeError):
    """Reconstruction aborted: non-finite values or runaway data misfit."""

    def __init__(self, message: str, history: list["IterationRecord"] | None = None):
        super().__init__(message)
        self.history = history or []


@dataclass
class SolverConfig:
    """Tunables of the ADMM reconstruction.

    ``epsilon = None`` selects the expected noise norm
    ``sigma * sqrt(K * Nx * Ny)``; ``wavelet_levels = None`` selects the
    default decomposition depth for the grid.
    """

    mu: float = 1.0
    epsilon: float | None = None
    max_admm_iters: int = 100
    admm_tol: float = 1e-4
    cg_tol: float = 1e-6
    cg_max_iters: int = 50
    wavelet_levels: int | None = None

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.max_admm_iters < 1 or self.cg_max_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if not (self.admm_tol > 0 and self.cg_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class IterationRecord:
    """Per-sweep convergence bookkeeping."""

    iteration: int
    misfit: float
    l1_norm: float
    rel_change: float
    cg_iters: int


@dataclass
class SolverState:
    """All ADMM iterates; owned by a single reconstruction run."""

    x: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)


@dataclass
class CgResult:
    """Solution of one normal-equation solve with its achieved accuracy."""

    x: np.ndarray
    iterations: int
    residual_norm: float
    rhs_norm: float

    @property
    def relative_residual(self) -> float:
        return self.residual_norm / self.rhs_norm if self.rhs_norm > 0 else 0.0


def cg_solve_normal(
    rhs: np.ndarray,
    op: SystemOperator,
    cg_tol: float,
    cg_max_iters: int,
    x0: np.ndarray | None = None,
) -> CgResult:
    """Conjugate-gradient solve of (I + C H^H H C) x = rhs.

    Stops when ``||rhs - A x|| <= cg_tol * ||rhs||`` or after
    ``cg_max_iters`` steps, whichever comes first.  Raises
    :class:`SolverDivergenceError` if non-finite values appear.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if not np.isfinite(rhs).all():
        raise SolverDivergenceError("non-finite right-hand side entering CG")
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CgResult(x=np.zeros_like(rhs), iterations=0, residual_norm=0.0, rhs_norm=0.0)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    r = rhs - op.normal(x)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    target = cg_tol * rhs_norm
    iters = 0
    while iters < cg_max_iters and np.sqrt(rs) > target:
        ap = op.normal(p)
        denom = float(np.vdot(p, ap).real)
        if not np.isfinite(denom) or denom <= 0.0:
            raise SolverDivergenceError(
                f"CG breakdown at inner iteration {iters}: p^T A p = {denom!r}"
            )
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_next = float(np.vdot(r, r).real)
        if not np.isfinite(rs_next):
            raise SolverDivergenceError(
                f"non-finite CG residual at inner iteration {iters}"
            )
        p = r + (rs_next / rs) * p
        rs = rs_next
        iters += 1
    return CgResult(x=x, iterations=iters, residual_norm=float(np.sqrt(rs)), rhs_norm=rhs_norm)


def update_z1(x: np.ndarray, d1: np.ndarray, mu: float, levels: int) -> np.ndarray:
    """Prior step: inverse-transform the soft-thresholded coefficients of x - d1."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    coeffs = analysis_values(np.asarray(x) - np.asarray(d1), levels)
    return synthesis_values(soft_threshold(coeffs, 1.0 / mu), levels)


def update_z2(s: np.ndarray, y: np.ndarray, epsilon: float) -> np.ndarray:
    """Project ``s`` onto the eps-radius ball centered at the measurements.

    Returns ``s`` unchanged inside the ball; otherwise the unique boundary
    point on the segment from ``y`` to ``s``.  ``epsilon = 0`` returns ``y``.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    distance = float(np.linalg.norm(s - y))
    if distance <= epsilon:
        return s.copy()
    if distance == 0.0:
        return y.copy()
    return y + (epsilon / distance) * (s - y)


def default_epsilon(noise_sigma: float, num_values: int) -> float:
    """Expected noise norm sigma * sqrt(K * Nx * Ny)."""
    return noise_sigma * np.sqrt(num_values)


def admm_reconstruct(
    measurements: MeasurementSet,
    masks: CodedApertureSet,
    b: DetectorResponse,
    psfs: PsfStack,
    config: SolverConfig,
) -> tuple[SpectralCube, list[IterationRecord]]:
    """Reconstruct the spectral cube from a measurement set.

    Initialization uses the matched-filter start ``x0 = C H^H y / K`` with
    ``z1 = x0``, ``z2 = H C x0`` and zero duals.  Raises
    :class:`SolverDivergenceError` if the data misfit grows beyond 10x its
    initial value, attaching the history collected so far.

    Returns the final iterate clamped to [0, 1] and the per-sweep history.
    """
    y = measurements.frames
    grid_shape = y.shape[1:]
    op = SystemOperator(masks, b, psfs, grid_shape)
    if y.shape[0] != op.num_frames:
        raise ValueError(f"{y.shape[0]} frames for a {op.num_frames}-frame system")

    levels = config.wavelet_levels
    if levels is None:
        levels = default_levels(grid_shape)
    epsilon = config.epsilon
    if epsilon is None:
        epsilon = default_epsilon(measurements.noise_sigma, y.size)

    state = SolverState(
        x=op.adjoint(y) / op.num_frames,
        z1=np.empty(0),
        z2=np.empty(0),
        d1=np.zeros((op.num_bands, *grid_shape)),
        d2=np.zeros_like(y),
    )
    state.z1 = state.x.copy()
    state.z2 = op.forward(state.x)

    initial_misfit = float(np.linalg.norm(y - state.z2))
    divergence_limit = _DIVERGENCE_FACTOR * max(initial_misfit, np.linalg.norm(y), 1e-300)

    for iteration in range(config.max_admm_iters):
        rhs = state.z1 + state.d1 + op.adjoint(state.z2 + state.d2)
        x_prev = state.x
        cg = cg_solve_normal(rhs, op, config.cg_tol, config.cg_max_iters, x0=state.x)
        state.x = cg.x

        state.z1 = update_z1(state.x, state.d1, config.mu, levels)
        hcx = op.forward(state.x)
        state.z2 = update_z2(hcx - state.d2, y, epsilon)
        state.d1 = state.d1 - (state.x - state.z1)
        state.d2 = state.d2 - (hcx - state.z2)

        misfit = float(np.linalg.norm(y - hcx))
        l1 = float(np.abs(analysis_values(state.x, levels)).sum())
        x_prev_norm = float(np.linalg.norm(x_prev))
        rel_change = (
            float(np.linalg.norm(state.x - x_prev)) / x_prev_norm
            if x_prev_norm > 0
            else np.inf
        )
        state.iteration = iteration + 1
        state.history.append(
            IterationRecord(
                iteration=iteration + 1,
                misfit=misfit,
                l1_norm=l1,
                rel_change=rel_change,
                cg_iters=cg.iterations,
            )
        )

        if not np.isfinite(misfit):
            raise SolverDivergenceError(
                f"non-finite misfit at sweep {iteration + 1}", state.history
            )
        if misfit > divergence_limit:
            raise SolverDivergenceError(
                f"data misfit {misfit:.3e} exceeded 10x its initial value "
                f"{initial_misfit:.3e} at sweep {iteration + 1}",
                state.history,
            )
        # The matched-filter start makes the very first x-update stationary
        # by construction, so the change-based stop only arms afterwards.
        if iteration > 0 and rel_change < config.admm_tol:
            break

    cube = SpectralCube(
        values=np.clip(state.x, 0.0, 1.0),
        wavelengths=psfs.wavelengths,
        pixel_pitch=psfs.pixel_pitch,
    )
    return cube, state.history
