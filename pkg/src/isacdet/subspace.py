"""Iterative subspace (GIC) detection with interference cancellation.

Each iteration scans the grid with a whitened matched filter against the
current interference-plus-noise covariance ``sigma2*I + sum_i v_i s_i s_i^H``,
declares the maximizer a target if it clears the threshold, and folds the new
echo into the covariance as a rank-one term with variance ``|alpha_hat|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .waveform import (
    DelayDopplerGrid,
    FrameConfig,
    Scene,
    assemble_observation,
    correlate_grid,
    frame_from_observation,
    signature,
    synthesize_frame,
)


@dataclass(frozen=True)
class CovarianceState:
    """``C = sigma2 * I + sum_i var_i * s_i s_i^H`` held as a term list."""

    sigma2: float
    terms: tuple[tuple[np.ndarray, float], ...] = ()

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"covariance needs sigma2 > 0, got {self.sigma2!r}")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def rank(self) -> int:
        return len(self.terms)

    @cached_property
    def _active(self) -> tuple[np.ndarray, np.ndarray]:
        # zero-variance terms contribute nothing and would make D singular
        kept = [(s, v) for s, v in self.terms if v > 0]
        if not kept:
            return np.zeros((0, 0), dtype=complex), np.zeros(0)
        U = np.stack([s for s, _ in kept], axis=1)
        return U, np.array([v for _, v in kept], dtype=float)

    @cached_property
    def _core(self) -> np.ndarray:
        """``(sigma2 * D^-1 + U^H U)^-1`` for the Woodbury expansion."""
        U, var = self._active
        gram = U.conj().T @ U
        return np.linalg.inv(np.diag(self.sigma2 / var) + gram)

    def dense(self) -> np.ndarray:
        """Materialize C. Intended for small problems and tests."""
        if not self.terms:
            raise ValueError("dense() needs at least one term to know the dimension")
        dim = len(self.terms[0][0])
        C = self.sigma2 * np.eye(dim, dtype=complex)
        for s, v in self.terms:
            C += v * np.outer(s, s.conj())
        return C


@dataclass(frozen=True)
class DetectorConfig:
    gamma: float
    max_iter: int = 10
    exclusion_radius: int = 1
    estimate_noise: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")
        if self.max_iter < 1 or self.exclusion_radius < 0:
            raise ValueError("need max_iter >= 1 and exclusion_radius >= 0")


@dataclass(frozen=True)
class SubspaceDetection:
    cell: tuple[int, int]
    x: tuple[float, float]
    alpha: complex
    statistic: float
    iteration: int


@dataclass
class DetectionReport:
    detections: list[SubspaceDetection] = field(default_factory=list)
    terminated_by: str = "below-threshold"
    residual: float = 0.0  # grid maximum of the final, rejected scan

    @property
    def cells(self) -> list[tuple[int, int]]:
        return [d.cell for d in self.detections]


def apply_inverse(state: CovarianceState, v: np.ndarray) -> np.ndarray:
    """``C^-1 v`` via the Woodbury identity; ``v`` is a vector or NM x k matrix."""
    v = np.asarray(v)
    U, _ = state._active
    if U.shape[1] == 0:
        return v / state.sigma2
    if U.shape[0] != v.shape[0]:
        raise ValueError(f"vector length {v.shape[0]} does not match covariance {U.shape[0]}")
    return (v - U @ (state._core @ (U.conj().T @ v))) / state.sigma2


def augment(state: CovarianceState, s_hat: np.ndarray, alpha_hat: complex) -> CovarianceState:
    """Append the rank-one term ``|alpha_hat|^2 s_hat s_hat^H``."""
    s_hat = np.asarray(s_hat, dtype=complex)
    return CovarianceState(state.sigma2, state.terms + ((s_hat, float(abs(alpha_hat) ** 2)),))


def ml_amplitude(y: np.ndarray, x: tuple[float, float], H: np.ndarray, cfg: FrameConfig,
                 state: CovarianceState) -> complex:
    return gic_statistic(y, x, H, cfg, state)[1]


def gic_statistic(y: np.ndarray, x: tuple[float, float], H: np.ndarray, cfg: FrameConfig,
                  state: CovarianceState) -> tuple[float, complex]:
    """Whitened matched-filter statistic and ML amplitude at a single point.

    ``J = |s^H C^-1 y|^2 / (s^H C^-1 s)`` and ``alpha = s^H C^-1 y / (s^H C^-1 s)``.
    """
    s = signature(x, H, cfg)
    w = apply_inverse(state, s)
    num = np.vdot(w, y)
    den = float(np.vdot(s, w).real)
    return float(abs(num) ** 2 / den), complex(num / den)


def grid_statistic(y: np.ndarray, grid: DelayDopplerGrid, H: np.ndarray, cfg: FrameConfig,
                   state: CovarianceState) -> tuple[np.ndarray, np.ndarray]:
    """Statistic and ML amplitude at every grid point, each ``(n_delay, n_doppler)``."""
    w = apply_inverse(state, y)
    num = correlate_grid(frame_from_observation(w, cfg), H, cfg, grid)
    energy = float(np.sum(np.abs(H) ** 2))
    U, _ = state._active
    if U.shape[1]:
        blocks = np.moveaxis(U.reshape(cfg.n, cfg.m, -1, order="F"), -1, 0)
        cu = correlate_grid(blocks, H, cfg, grid)  # (q, L, P): s(x)^H u_i
        t = np.einsum("ij,jlp->ilp", state._core, cu.conj())
        quad = np.einsum("ilp,ilp->lp", cu, t).real
    else:
        quad = 0.0
    den = np.maximum((energy - quad) / state.sigma2, np.finfo(float).tiny)
    return np.abs(num) ** 2 / den, num / den


def _best_cell(J: np.ndarray, excluded: np.ndarray | None) -> tuple[int, int]:
    if excluded is not None:
        if excluded.all():
            raise ValueError("every grid point is excluded")
        J = np.where(excluded, -np.inf, J)
    # row-major argmax: ties go to the smallest delay, then smallest Doppler index
    flat = int(np.argmax(J))
    return divmod(flat, J.shape[1])


def scan_grid(y: np.ndarray, grid: DelayDopplerGrid, H: np.ndarray, cfg: FrameConfig,
              state: CovarianceState, excluded: Iterable[tuple[int, int]] = ()
              ) -> tuple[tuple[int, int], float, complex]:
    J, alpha = grid_statistic(y, grid, H, cfg, state)
    mask = np.zeros(grid.shape, dtype=bool)
    for cell in excluded:
        mask[cell] = True
    cell = _best_cell(J, mask)
    return cell, float(J[cell]), complex(alpha[cell])


def estimate_noise_power(y: np.ndarray, grid: DelayDopplerGrid, H: np.ndarray,
                         cfg: FrameConfig) -> float:
    """Median-based noise floor from the normalized matched-filter map.

    Noise-only cells are exponential with mean sigma2, so the median is
    ``sigma2 * ln 2``.
    """
    corr = correlate_grid(frame_from_observation(y, cfg), H, cfg, grid)
    power = np.abs(corr) ** 2 / np.sum(np.abs(H) ** 2)
    return float(np.median(power) / np.log(2.0))


def _exclude(mask: np.ndarray, cell: tuple[int, int], radius: int) -> None:
    l, p = cell
    mask[max(0, l - radius): l + radius + 1, max(0, p - radius): p + radius + 1] = True


def detect_iterative(y: np.ndarray, grid: DelayDopplerGrid, H: np.ndarray, cfg: FrameConfig,
                     det_cfg: DetectorConfig, sigma2: float | None = None) -> DetectionReport:
    """Detect targets one at a time, cancelling each detected echo."""
    if det_cfg.estimate_noise or sigma2 is None:
        sigma2 = estimate_noise_power(y, grid, H, cfg)
    state = CovarianceState(sigma2)
    excluded = np.zeros(grid.shape, dtype=bool)
    report = DetectionReport(terminated_by="max-iter")
    for q in range(1, det_cfg.max_iter + 1):
        if excluded.all():
            report.terminated_by = "grid-exhausted"
            break
        J, alpha = grid_statistic(y, grid, H, cfg, state)
        cell = _best_cell(J, excluded)
        j_max = float(J[cell])
        report.residual = j_max
        if not j_max > det_cfg.gamma:
            report.terminated_by = "below-threshold"
            break
        x = grid.point(cell)
        a = complex(alpha[cell])
        report.detections.append(SubspaceDetection(cell, x, a, j_max, q))
        _exclude(excluded, cell, det_cfg.exclusion_radius)
        state = augment(state, signature(x, H, cfg), a)
    return report


def glrt_cd_benchmark(scene: Scene, target_index: int, H: np.ndarray, cfg: FrameConfig,
                      grid: DelayDopplerGrid, det_cfg: DetectorConfig,
                      rng: np.random.Generator) -> DetectionReport:
    """Single-target benchmark: all other echoes ideally removed, one scan."""
    if not 0 <= target_index < len(scene.targets):
        raise IndexError(f"target index {target_index} out of range")
    clean = Scene((scene.targets[target_index],), scene.sigma2)
    y = assemble_observation(synthesize_frame(H, clean, cfg, rng))
    one_shot = DetectorConfig(det_cfg.gamma, 1, det_cfg.exclusion_radius, det_cfg.estimate_noise)
    return detect_iterative(y, grid, H, cfg, one_shot, scene.sigma2)
