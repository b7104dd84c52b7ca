"""Discrete OFDM ISAC frame model.

Conventions: the unitary DFT is ``[F]_{l,n} = exp(-2j*pi*n*l/N)/sqrt(N)``,
frames are ``N x M`` (subcarrier/sample by OFDM symbol) and observations are
column-stacked frames of length ``N*M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Paper-style parameter lists quote rounded durations (1.666 us + 8.333 us
# for a 10 us symbol), so T_sym = T_cp + 1/df is checked loosely.
_TSYM_RTOL = 1e-3


@dataclass(frozen=True)
class FrameConfig:
    fc: float
    df: float
    n: int
    m: int
    t_cp: float
    t_sym: float | None = None

    def __post_init__(self):
        for name in ("fc", "df", "t_cp", "t_sym"):
            val = getattr(self, name)
            if val is None and name == "t_sym":
                continue
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val!r}")
        if self.t_sym is None:
            object.__setattr__(self, "t_sym", self.t_cp + 1.0 / self.df)
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        expected = self.t_cp + 1.0 / self.df
        if abs(self.t_sym - expected) > _TSYM_RTOL * expected:
            raise ValueError(
                f"t_sym={self.t_sym:g} s inconsistent with t_cp + 1/df = {expected:g} s")

    @property
    def bandwidth(self) -> float:
        return self.n * self.df

    @property
    def t_useful(self) -> float:
        return 1.0 / self.df

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.m)


@dataclass(frozen=True)
class Target:
    tau: float
    nu: float = 0.0
    alpha: complex = 1.0

    def check(self, cfg: FrameConfig) -> None:
        if not (0.0 <= self.tau <= cfg.t_cp * (1 + 1e-12)):
            raise ValueError(f"target delay {self.tau:g} s outside [0, t_cp={cfg.t_cp:g} s]")
        if abs(self.nu) * cfg.fc * cfg.t_sym >= 0.5:
            raise ValueError(f"target Doppler {self.nu:g} is ambiguous per symbol")


@dataclass(frozen=True)
class Scene:
    targets: tuple[Target, ...] = ()
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2!r}")


@dataclass(frozen=True)
class DelayDopplerGrid:
    """Uniform delay-Doppler hypothesis grid.

    Delay cell ``l`` sits at ``l / (B * oversample)``; Doppler cell ``p`` at
    ``k_p / (fc * T_sym * M * oversample)`` with integer ``k_p`` centered on
    zero.
    """

    delays: np.ndarray
    dopplers: np.ndarray
    oversample: int
    doppler_index: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.delays), len(self.dopplers))

    @property
    def size(self) -> int:
        return len(self.delays) * len(self.dopplers)

    def point(self, cell: tuple[int, int]) -> tuple[float, float]:
        return float(self.delays[cell[0]]), float(self.dopplers[cell[1]])

    def nearest_cell(self, tau: float, nu: float = 0.0) -> tuple[int, int]:
        li = int(np.argmin(np.abs(self.delays - tau)))
        pi = int(np.argmin(np.abs(self.dopplers - nu)))
        return li, pi


def make_grid(cfg: FrameConfig, oversample: int = 1) -> DelayDopplerGrid:
    if oversample < 1:
        raise ValueError(f"oversample must be >= 1, got {oversample}")
    pitch = 1.0 / (cfg.bandwidth * oversample)
    # half-open [0, t_cp); the small slack absorbs float error in t_cp*B
    n_delay = max(1, int(math.floor(cfg.t_cp / pitch + 1e-9)))
    delays = np.arange(n_delay) * pitch
    if cfg.m == 1:
        kidx = np.zeros(1, dtype=int)
    else:
        p = cfg.m * oversample
        kidx = np.arange(-(p // 2), p - p // 2)
    dopplers = kidx / (cfg.fc * cfg.t_sym * cfg.m * oversample)
    for arr in (delays, dopplers, kidx):
        arr.setflags(write=False)
    return DelayDopplerGrid(delays, dopplers, oversample, kidx)


def range_to_delay(d: float) -> float:
    if d < 0:
        raise ValueError(f"range must be >= 0, got {d}")
    return 2.0 * d / SPEED_OF_LIGHT


def delay_to_range(tau):
    return np.asarray(tau) * SPEED_OF_LIGHT / 2.0


def velocity_to_nu(v: float) -> float:
    """Doppler scale of a target closing at ``v`` m/s (positive = approaching)."""
    return 2.0 * v / SPEED_OF_LIGHT


def steering_delay(tau: float, cfg: FrameConfig) -> np.ndarray:
    n = np.arange(cfg.n)
    return np.exp(-2j * np.pi * n * cfg.df * tau)


def steering_doppler(nu: float, cfg: FrameConfig) -> np.ndarray:
    m = np.arange(cfg.m)
    return np.exp(-2j * np.pi * cfg.fc * m * cfg.t_sym * nu)


def idft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    """Unitary inverse DFT ``F^H x`` along ``axis``."""
    n = x.shape[axis]
    return np.fft.ifft(x, axis=axis) * np.sqrt(n)


def dft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    """Unitary DFT ``F x`` along ``axis``."""
    n = x.shape[axis]
    return np.fft.fft(x, axis=axis) / np.sqrt(n)


def _check_symbols(H: np.ndarray, cfg: FrameConfig) -> None:
    if H.shape[-2:] != cfg.shape:
        raise ValueError(f"symbol matrix shape {H.shape} does not match frame {cfg.shape}")


def echo_frame(x: tuple[float, float], H: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Noise-free unit-amplitude echo ``F^H (H * b(tau) c^H(nu))`` as an N x M frame."""
    _check_symbols(H, cfg)
    tau, nu = x
    b = steering_delay(tau, cfg)
    c = steering_doppler(nu, cfg)
    return idft(H * np.outer(b, np.conj(c)))


def signature(x: tuple[float, float], H: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Stacked NM-length signature s(x) of a unit-amplitude target at ``x = (tau, nu)``.

    Built symbol by symbol: block ``m`` is ``F^H (h_m * b(tau)) * conj(c(nu))[m]``.
    """
    _check_symbols(H, cfg)
    tau, nu = x
    b = steering_delay(tau, cfg)
    c_conj = np.conj(steering_doppler(nu, cfg))
    blocks = [idft(H[:, m] * b, axis=0) * c_conj[m] for m in range(cfg.m)]
    return np.concatenate(blocks)


def noise_frame(cfg: FrameConfig, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian N x M noise with variance ``sigma2`` per entry."""
    scale = np.sqrt(sigma2 / 2.0)
    z = rng.standard_normal((cfg.n, cfg.m, 2))
    return scale * (z[..., 0] + 1j * z[..., 1])


def synthesize_frame(H: np.ndarray, scene: Scene, cfg: FrameConfig,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Received frame R = sum_k alpha_k F^H(H * b c^H) + Z.

    ``rng`` may be omitted only for noise-free scenes.
    """
    _check_symbols(H, cfg)
    for t in scene.targets:
        t.check(cfg)
    R = np.zeros(cfg.shape, dtype=complex)
    for t in scene.targets:
        R += t.alpha * echo_frame((t.tau, t.nu), H, cfg)
    if scene.sigma2 > 0:
        if rng is None:
            raise ValueError("a random generator is required when sigma2 > 0")
        R += noise_frame(cfg, scene.sigma2, rng)
    return R


def assemble_observation(R: np.ndarray) -> np.ndarray:
    """Column-stack frame ``R`` (N x M) into the observation vector y."""
    return np.asarray(R).reshape(-1, order="F")


def frame_from_observation(y: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    return np.asarray(y).reshape(cfg.shape, order="F")


def correlate_grid(frames: np.ndarray, H: np.ndarray, cfg: FrameConfig,
                   grid: DelayDopplerGrid) -> np.ndarray:
    """Inner products ``s(x)^H v`` for every grid point ``x``.

    ``frames`` holds one or more N x M frames (trailing two axes); ``H``
    broadcasts against it. Returns ``(..., n_delay, n_doppler)``. Delay is
    resolved with a zero-padded IFFT across subcarriers and Doppler with an
    FFT across symbols.
    """
    frames = np.asarray(frames)
    _check_symbols(frames, cfg)
    os_ = grid.oversample
    X = np.conj(H) * dft(frames)
    n_fft = cfg.n * os_
    # sum_n X[n] exp(+2j pi n l / (N os))
    d = np.fft.ifft(X, n=n_fft, axis=-2)[..., : len(grid.delays), :] * n_fft
    if cfg.m == 1:
        return d
    p_fft = cfg.m * os_
    # sum_m exp(-2j pi m k / (M os)) d[m]
    out = np.fft.fft(d, n=p_fft, axis=-1)
    return out[..., np.mod(grid.doppler_index, p_fft)]


def scene_from_ranges(ranges_m: Sequence[float], alphas: Sequence[complex],
                      velocities_mps: Sequence[float] | None = None,
                      sigma2: float = 1.0) -> Scene:
    velocities_mps = velocities_mps or [0.0] * len(ranges_m)
    targets = tuple(
        Target(range_to_delay(d), velocity_to_nu(v), complex(a))
        for d, v, a in zip(ranges_m, velocities_mps, alphas)
    )
    return Scene(targets, sigma2)
