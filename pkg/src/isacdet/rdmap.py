"""FFT matched-filter range-Doppler maps and cell-averaging CFAR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .waveform import DelayDopplerGrid, FrameConfig, correlate_grid


@dataclass(frozen=True)
class RangeDopplerMap:
    values: np.ndarray  # (n_delay, n_doppler), linear power
    grid: DelayDopplerGrid


@dataclass(frozen=True)
class CfarConfig:
    pfa: float = 1e-3
    train: int = 16
    guard: int = 4

    def __post_init__(self):
        if not 0 < self.pfa < 1:
            raise ValueError(f"CFAR pfa must be in (0, 1), got {self.pfa}")
        if self.train < 1 or self.guard < 0:
            raise ValueError(f"need train >= 1 and guard >= 0, got {self.train}/{self.guard}")


@dataclass(frozen=True)
class Detection:
    delay_bin: int
    doppler_bin: int
    statistic: float
    amplitude: complex | None = None

    @property
    def cell(self) -> tuple[int, int]:
        return (self.delay_bin, self.doppler_bin)


def matched_rd_map(R: np.ndarray, H: np.ndarray, cfg: FrameConfig,
                   grid: DelayDopplerGrid) -> RangeDopplerMap:
    """Normalized matched-filter power ``|s(x)^H y|^2 / ||H||_F^2`` over the grid."""
    corr = correlate_grid(R, H, cfg, grid)
    energy = np.sum(np.abs(H) ** 2)
    return RangeDopplerMap(np.abs(corr) ** 2 / energy, grid)


def cfar_threshold_factor(pfa: float, train_total: int) -> float:
    """CA-CFAR multiplier for exponentially distributed cell powers."""
    if train_total < 1:
        raise ValueError(f"train_total must be >= 1, got {train_total}")
    return train_total * (pfa ** (-1.0 / train_total) - 1.0)


def _training_kernel(cfar: CfarConfig, two_d: bool) -> np.ndarray:
    half = cfar.train + cfar.guard
    line = np.zeros(2 * half + 1)
    line[: cfar.train] = 1.0
    line[-cfar.train:] = 1.0
    if not two_d:
        return line[:, None]
    k = np.zeros((2 * half + 1, 2 * half + 1))
    k[:, half] = line
    k[half, :] = line
    return k


def cfar_noise_level(values: np.ndarray, cfar: CfarConfig) -> tuple[np.ndarray, int]:
    """Mean training-cell power around every cell (wrap-around edges)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    two_d = values.shape[1] > 1
    span = 2 * (cfar.train + cfar.guard) + 1
    if values.shape[0] < span or (two_d and values.shape[1] < span):
        raise ValueError(
            f"map of shape {values.shape} too small for CFAR window of {span} cells")
    kernel = _training_kernel(cfar, two_d)
    total = int(kernel.sum())
    sums = ndimage.correlate(values, kernel, mode="wrap")
    return sums / total, total


def ca_cfar(rd: "RangeDopplerMap | np.ndarray", cfar: CfarConfig) -> list[Detection]:
    """Cell-averaging CFAR.

    One-dimensional along delay when the map has a single Doppler column,
    cross-shaped otherwise. Detections are returned in row-major cell order.
    """
    values = rd.values if isinstance(rd, RangeDopplerMap) else np.asarray(rd, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    level, total = cfar_noise_level(values, cfar)
    alpha = cfar_threshold_factor(cfar.pfa, total)
    hits = values > alpha * level
    return [Detection(int(i), int(j), float(values[i, j])) for i, j in np.argwhere(hits)]


def detect_fft_cfar(R: np.ndarray, H: np.ndarray, cfg: FrameConfig,
                    grid: DelayDopplerGrid, cfar: CfarConfig) -> list[Detection]:
    return ca_cfar(matched_rd_map(R, H, cfg, grid), cfar)


def to_db(values: np.ndarray, floor: float = 1e-300) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(values, floor))


def normalized_slice_db(values: np.ndarray) -> np.ndarray:
    """Power profile in dB relative to its maximum."""
    values = np.asarray(values, dtype=float)
    peak = values.max()
    return to_db(values / peak) if peak > 0 else np.full(values.shape, to_db(0.0))


def peak_sidelobe_ratio(values: np.ndarray, peak_cell: tuple[int, int] | None = None) -> float:
    """Largest non-peak cell over the peak cell (linear)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if peak_cell is None:
        peak_cell = np.unravel_index(np.argmax(values), values.shape)
    rest = values.copy()
    rest[peak_cell] = -np.inf
    return float(rest.max() / values[peak_cell])
