"""Monte-Carlo experiments: threshold calibration, Pd estimation and sweeps.

Every trial draws from its own generator seeded by ``(seed, stream, index)``,
so results do not depend on evaluation order and trials are shared across
sweep points (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .constellation import ALL_KINDS, ConstellationKind, draw_symbols
from .rdmap import CfarConfig, detect_fft_cfar, matched_rd_map, normalized_slice_db, peak_sidelobe_ratio, to_db
from .subspace import CovarianceState, DetectorConfig, augment, detect_iterative, grid_statistic
from .waveform import (
    DelayDopplerGrid,
    FrameConfig,
    Target,
    assemble_observation,
    correlate_grid,
    echo_frame,
    make_grid,
    noise_frame,
    range_to_delay,
    signature,
    velocity_to_nu,
)

DETECTORS = ("fft_cfar", "subspace", "glrt_cd")

STREAM_CALIBRATION = 0
STREAM_VALIDATION = 1
STREAM_PD = 2
STREAM_SLICE = 3
STREAM_PSL = 4

SIGMA2 = 1.0


def trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


@dataclass(frozen=True)
class TargetSpec:
    range_m: float
    snr_db: float
    velocity_mps: float = 0.0
    on_grid: bool = True

    @property
    def amplitude(self) -> float:
        if self.snr_db == -math.inf:
            return 0.0
        return math.sqrt(SIGMA2 * 10.0 ** (self.snr_db / 10.0))


@dataclass(frozen=True)
class Scenario:
    frame: FrameConfig
    constellation: ConstellationKind = ConstellationKind.QAM1024
    targets: tuple[TargetSpec, ...] = ()
    pfa: float = 1e-2
    oversample: int = 1
    cfar: CfarConfig = field(default_factory=CfarConfig)
    seed: int = 0
    trials: int = 1000
    calibration_trials: int | None = None
    target_of_interest: int = 1
    max_iter: int = 10
    exclusion_radius: int = 1

    def __post_init__(self):
        object.__setattr__(self, "constellation", ConstellationKind.parse(self.constellation))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 0 < self.pfa < 1:
            raise ValueError(f"pfa must be in (0, 1), got {self.pfa}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for t in self.targets:
            Target(range_to_delay(t.range_m), velocity_to_nu(t.velocity_mps)).check(self.frame)

    @property
    def grid(self) -> DelayDopplerGrid:
        return _grid(self.frame, self.oversample)

    @property
    def n_calibration(self) -> int:
        if self.calibration_trials is not None:
            return self.calibration_trials
        return math.ceil(100.0 / self.pfa - 1e-9)

    def positions(self) -> list[tuple[float, float]]:
        """True (delay, Doppler) of every target, snapped to the grid when requested."""
        grid = self.grid
        out = []
        for t in self.targets:
            tau, nu = range_to_delay(t.range_m), velocity_to_nu(t.velocity_mps)
            if t.on_grid:
                tau, nu = grid.point(grid.nearest_cell(tau, nu))
            out.append((tau, nu))
        return out

    def cells(self) -> list[tuple[int, int]]:
        grid = self.grid
        return [grid.nearest_cell(tau, nu) for tau, nu in self.positions()]

    def with_snr(self, index: int, snr_db: float) -> "Scenario":
        targets = list(self.targets)
        targets[index] = replace(targets[index], snr_db=snr_db)
        return replace(self, targets=tuple(targets))


_GRIDS: dict[tuple[FrameConfig, int], DelayDopplerGrid] = {}


def _grid(frame: FrameConfig, oversample: int) -> DelayDopplerGrid:
    key = (frame, oversample)
    if key not in _GRIDS:
        _GRIDS[key] = make_grid(frame, oversample)
    return _GRIDS[key]


@dataclass(frozen=True)
class PdPoint:
    detector: str
    hits: int
    trials: int

    @property
    def pd(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        p = self.pd
        return math.sqrt(p * (1.0 - p) / self.trials)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float | str
    detector: str
    constellation: ConstellationKind
    point: PdPoint


# --- calibration -----------------------------------------------------------

def noise_only_maxima(scenario: Scenario, trials: int, stream: int = STREAM_CALIBRATION,
                      batch: int = 2048) -> np.ndarray:
    """Grid maximum of the first-iteration statistic for noise-only trials."""
    cfg, grid = scenario.frame, scenario.grid
    out = np.empty(trials)
    for start in range(0, trials, batch):
        idx = range(start, min(start + batch, trials))
        H = np.empty((len(idx), cfg.n, cfg.m), dtype=complex)
        Z = np.empty_like(H)
        for k, i in enumerate(idx):
            rng = trial_rng(scenario.seed, stream, i)
            H[k] = draw_symbols(scenario.constellation, cfg.n, cfg.m, rng)
            Z[k] = noise_frame(cfg, SIGMA2, rng)
        corr = correlate_grid(Z, H, cfg, grid)
        energy = np.sum(np.abs(H) ** 2, axis=(-2, -1))
        stat = np.abs(corr) ** 2 / (SIGMA2 * energy[:, None, None])
        out[start: start + len(idx)] = stat.reshape(len(idx), -1).max(axis=1)
    return out


def calibrate_threshold(scenario: Scenario, trials: int | None = None,
                        override: bool = False) -> float:
    """Empirical (1 - pfa) quantile of the noise-only per-scan maximum.

    Fewer than ``100/pfa`` trials is refused unless ``override`` is set or
    the scenario pins ``calibration_trials`` itself.
    """
    n = scenario.n_calibration if trials is None else trials
    explicit = override or scenario.calibration_trials is not None
    if n < 1 or (not explicit and n * scenario.pfa < 100 - 1e-9):
        raise ValueError(f"{n} calibration trials is below 100/pfa = {100 / scenario.pfa:.0f}")
    maxima = noise_only_maxima(scenario, n)
    return float(np.quantile(maxima, 1.0 - scenario.pfa))


def empirical_pfa(scenario: Scenario, gamma: float, trials: int,
                  stream: int = STREAM_VALIDATION) -> PdPoint:
    """Per-scan false-alarm rate of the subspace detector on fresh noise-only trials."""
    cfg, grid = scenario.frame, scenario.grid
    det = DetectorConfig(gamma, 1, scenario.exclusion_radius)
    hits = 0
    for i in range(trials):
        rng = trial_rng(scenario.seed, stream, i)
        H = draw_symbols(scenario.constellation, cfg.n, cfg.m, rng)
        y = assemble_observation(noise_frame(cfg, SIGMA2, rng))
        hits += bool(detect_iterative(y, grid, H, cfg, det, SIGMA2).detections)
    return PdPoint("subspace", hits, trials)


# --- detection trials --------------------------------------------------------

@dataclass
class TrialFrames:
    H: np.ndarray
    echoes: list[np.ndarray]
    noise: np.ndarray

    def received(self, include: Iterable[int] | None = None) -> np.ndarray:
        idx = range(len(self.echoes)) if include is None else include
        R = self.noise.copy()
        for k in idx:
            R += self.echoes[k]
        return R


def draw_trial(scenario: Scenario, index: int, stream: int = STREAM_PD,
               noise: bool = True) -> TrialFrames:
    """Symbols, per-target echoes (random phase) and noise for one trial.

    Draw order is fixed (symbols, phases, noise) and independent of SNRs.
    """
    cfg = scenario.frame
    rng = trial_rng(scenario.seed, stream, index)
    H = draw_symbols(scenario.constellation, cfg.n, cfg.m, rng)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(scenario.targets))
    Z = noise_frame(cfg, SIGMA2, rng) if noise else np.zeros(cfg.shape, dtype=complex)
    echoes = [
        t.amplitude * np.exp(1j * ph) * echo_frame(x, H, cfg)
        for t, ph, x in zip(scenario.targets, phases, scenario.positions())
    ]
    return TrialFrames(H, echoes, Z)


def _hit(cells: Iterable[tuple[int, int]], truth: tuple[int, int], m: int) -> bool:
    for l, p in cells:
        if abs(l - truth[0]) <= 1 and (m == 1 or abs(p - truth[1]) <= 1):
            return True
    return False


def run_trial(scenario: Scenario, gamma: float | None, index: int,
              detectors: Sequence[str] = DETECTORS) -> dict[str, bool]:
    """Whether each detector finds the target of interest in trial ``index``."""
    cfg, grid = scenario.frame, scenario.grid
    toi = scenario.target_of_interest
    truth = scenario.cells()[toi]
    tf = draw_trial(scenario, index)
    out = {}
    if "fft_cfar" in detectors:
        dets = detect_fft_cfar(tf.received(), tf.H, cfg, grid, scenario.cfar)
        out["fft_cfar"] = _hit((d.cell for d in dets), truth, cfg.m)
    if "subspace" in detectors or "glrt_cd" in detectors:
        if gamma is None:
            raise ValueError("subspace detectors need a calibrated threshold")
    if "subspace" in detectors:
        det = DetectorConfig(gamma, scenario.max_iter, scenario.exclusion_radius)
        y = assemble_observation(tf.received())
        rep = detect_iterative(y, grid, tf.H, cfg, det, SIGMA2)
        out["subspace"] = _hit(rep.cells, truth, cfg.m)
    if "glrt_cd" in detectors:
        det = DetectorConfig(gamma, 1, scenario.exclusion_radius)
        y = assemble_observation(tf.received([toi]))
        rep = detect_iterative(y, grid, tf.H, cfg, det, SIGMA2)
        out["glrt_cd"] = _hit(rep.cells, truth, cfg.m)
    return out


def estimate_pd_all(scenario: Scenario, gamma: float | None,
                    detectors: Sequence[str] = DETECTORS) -> dict[str, PdPoint]:
    hits = dict.fromkeys(detectors, 0)
    for i in range(scenario.trials):
        for name, ok in run_trial(scenario, gamma, i, detectors).items():
            hits[name] += ok
    return {name: PdPoint(name, hits[name], scenario.trials) for name in detectors}


def estimate_pd(scenario: Scenario, gamma: float | None, detector_kind: str) -> PdPoint:
    if detector_kind not in DETECTORS:
        raise ValueError(f"unknown detector {detector_kind!r}")
    return estimate_pd_all(scenario, gamma, (detector_kind,))[detector_kind]


# --- sweeps -------------------------------------------------------------------

class ThresholdCache:
    """Calibrated thresholds keyed by the fields that affect noise-only statistics."""

    def __init__(self, preset: dict[ConstellationKind, float] | None = None):
        self._preset = dict(preset or {})
        self._cache: dict[tuple, float] = {}

    def __call__(self, scenario: Scenario) -> float:
        if scenario.constellation in self._preset:
            return self._preset[scenario.constellation]
        key = (scenario.frame, scenario.constellation, scenario.oversample, scenario.pfa,
               scenario.seed, scenario.n_calibration)
        if key not in self._cache:
            self._cache[key] = calibrate_threshold(scenario)
        return self._cache[key]


def sweep(scenario: Scenario, axis: str, points: Sequence, detectors: Sequence[str] = DETECTORS,
          thresholds: ThresholdCache | None = None) -> list[SweepRow]:
    """Pd of the target of interest for every detector along ``axis``.

    ``axis`` is ``snr1``/``snr2`` (target 1/2 SNR in dB) or ``constellation``.
    """
    thresholds = thresholds or ThresholdCache()
    rows = []
    for value in points:
        if axis in ("snr1", "snr2"):
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"sweep points must be finite, got {value}")
            sc = scenario.with_snr(int(axis[-1]) - 1, value)
        elif axis == "constellation":
            sc = replace(scenario, constellation=ConstellationKind.parse(value))
            value = sc.constellation.value
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        gamma = thresholds(sc) if set(detectors) - {"fft_cfar"} else None
        for name, pt in estimate_pd_all(sc, gamma, detectors).items():
            rows.append(SweepRow(value, name, sc.constellation, pt))
    return rows


def find_snr_for_pd(scenario: Scenario, gamma: float, target_pd: float, detector: str = "subspace",
                    lo: float = -30.0, hi: float = 10.0, tol: float = 0.25) -> float:
    """Bisect the target-of-interest SNR (dB) at which ``detector`` reaches ``target_pd``."""
    toi = scenario.target_of_interest
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if estimate_pd(scenario.with_snr(toi, mid), gamma, detector).pd < target_pd:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- range slices and sidelobes ---------------------------------------------

def slice_profiles(scenario: Scenario, kind: ConstellationKind | str, seed: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """First- and second-iteration statistic profiles (linear) for one frame.

    The second profile is computed after cancelling the first-iteration
    maximizer, whatever the threshold.
    """
    sc = replace(scenario, constellation=ConstellationKind.parse(kind), seed=seed)
    cfg, grid = sc.frame, sc.grid
    tf = draw_trial(sc, 0, stream=STREAM_SLICE)
    y = assemble_observation(tf.received())
    state = CovarianceState(SIGMA2)
    J1, alpha = grid_statistic(y, grid, tf.H, cfg, state)
    cell = np.unravel_index(int(np.argmax(J1)), J1.shape)
    state = augment(state, signature(grid.point(cell), tf.H, cfg), alpha[cell])
    J2, _ = grid_statistic(y, grid, tf.H, cfg, state)
    return J1, J2


def range_slice(scenario: Scenario, seed: int, iteration: int,
                kinds: Sequence[ConstellationKind] = ALL_KINDS) -> dict[ConstellationKind, np.ndarray]:
    """Peak-normalized dB range profiles (Doppler bin 0) per constellation."""
    if iteration not in (1, 2):
        raise ValueError("iteration must be 1 or 2")
    out = {}
    zero_dop = int(np.argmin(np.abs(scenario.grid.dopplers)))
    for kind in kinds:
        prof = slice_profiles(scenario, kind, seed)[iteration - 1][:, zero_dop]
        out[ConstellationKind.parse(kind)] = normalized_slice_db(prof)
    return out


def psl_statistics(scenario: Scenario, kind: ConstellationKind | str, trials: int
                   ) -> tuple[float, float]:
    """Mean and 95th percentile PSL (dB) of noise-free single-target maps."""
    sc = replace(scenario, constellation=ConstellationKind.parse(kind))
    cfg, grid = sc.frame, sc.grid
    x = sc.positions()[0] if sc.targets else (0.0, 0.0)
    if not sc.targets or not sc.targets[0].on_grid:
        x = grid.point(grid.nearest_cell(*x))
    peak = grid.nearest_cell(*x)
    psl = np.empty(trials)
    for i in range(trials):
        rng = trial_rng(sc.seed, STREAM_PSL, i)
        H = draw_symbols(sc.constellation, cfg.n, cfg.m, rng)
        rd = matched_rd_map(echo_frame(x, H, cfg), H, cfg, grid)
        psl[i] = to_db(peak_sidelobe_ratio(rd.values, peak))
    return float(np.mean(psl)), float(np.percentile(psl, 95))
