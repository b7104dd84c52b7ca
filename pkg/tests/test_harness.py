import math
from dataclasses import replace

import numpy as np
import pytest

from isacdet.constellation import ALL_KINDS, ConstellationKind
from isacdet.harness import (
    PdPoint,
    Scenario,
    TargetSpec,
    ThresholdCache,
    calibrate_threshold,
    draw_trial,
    empirical_pfa,
    estimate_pd,
    estimate_pd_all,
    find_snr_for_pd,
    noise_only_maxima,
    psl_statistics,
    range_slice,
    run_trial,
    slice_profiles,
    sweep,
)
from isacdet.rdmap import CfarConfig
from isacdet.waveform import FrameConfig


@pytest.fixture
def fast_frame():
    return FrameConfig(28e9, 61.44e6 / 256, 256, 1, 1.666e-6)


@pytest.fixture
def scenario(fast_frame):
    return Scenario(fast_frame, "qam1024", (TargetSpec(30, 30), TargetSpec(90, -10)),
                    pfa=0.05, trials=200, seed=3, cfar=CfarConfig(pfa=0.05))


def test_scenario_cells(scenario):
    assert scenario.cells() == [(12, 0), (37, 0)]
    tau0, _ = scenario.positions()[0]
    assert tau0 == scenario.grid.delays[12]


def test_off_grid_positions(scenario):
    sc = replace(scenario, targets=(TargetSpec(30, 30, on_grid=False),))
    assert sc.positions()[0][0] == pytest.approx(2 * 30 / 299_792_458)


def test_target_outside_cp_rejected(fast_frame):
    with pytest.raises(ValueError, match="t_cp"):
        Scenario(fast_frame, "bpsk", (TargetSpec(300, 0),))


def test_amplitude_from_snr():
    assert TargetSpec(0, 20).amplitude == pytest.approx(10.0)
    assert TargetSpec(0, -math.inf).amplitude == 0.0


def test_calibration_default_budget(scenario):
    assert scenario.n_calibration == 2000
    assert replace(scenario, pfa=1e-4).n_calibration == 1_000_000


def test_calibration_refuses_small_budget(scenario):
    with pytest.raises(ValueError, match="100/pfa"):
        calibrate_threshold(scenario, trials=100)
    calibrate_threshold(scenario, trials=100, override=True)


def test_calibration_deterministic(scenario):
    assert calibrate_threshold(scenario) == calibrate_threshold(scenario)
    assert calibrate_threshold(scenario) != calibrate_threshold(replace(scenario, seed=4))


def test_batching_does_not_change_maxima(scenario):
    np.testing.assert_array_equal(noise_only_maxima(scenario, 300, batch=7),
                                  noise_only_maxima(scenario, 300, batch=1000))


def test_calibrated_pfa_on_fresh_trials(scenario):
    sc = replace(scenario, pfa=0.1)
    gamma = calibrate_threshold(sc, trials=2000)
    rate = empirical_pfa(sc, gamma, 2000).pd
    assert 0.07 <= rate <= 0.13


def test_threshold_constellation_dependence(scenario):
    g_bpsk = calibrate_threshold(replace(scenario, constellation="bpsk"))
    g_qam = calibrate_threshold(scenario)
    # same exponential marginals; only inter-cell correlation differs
    assert g_bpsk == pytest.approx(g_qam, rel=0.1)


def test_trial_draws_independent_of_snr(scenario):
    a = draw_trial(scenario, 5)
    b = draw_trial(scenario.with_snr(0, 10.0), 5)
    np.testing.assert_array_equal(a.noise, b.noise)
    np.testing.assert_array_equal(a.echoes[1], b.echoes[1])


def test_pd_high_snr(scenario):
    sc = replace(scenario.with_snr(1, 30.0), trials=30)
    gamma = calibrate_threshold(sc)
    for name, pt in estimate_pd_all(sc, gamma).items():
        assert pt.pd == 1.0, name


def test_pd_absent_target(scenario):
    sc = replace(scenario.with_snr(1, -math.inf), trials=300)
    gamma = calibrate_threshold(sc)
    pt = estimate_pd(sc, gamma, "glrt_cd")
    # hit needs the false alarm to land within +-1 cell: well under pfa
    assert pt.pd <= sc.pfa + 3 * math.sqrt(sc.pfa / sc.trials)


def test_unknown_detector(scenario):
    with pytest.raises(ValueError):
        estimate_pd(scenario, 1.0, "music")


def test_subspace_needs_threshold(scenario):
    with pytest.raises(ValueError):
        run_trial(scenario, None, 0, ("subspace",))


def test_stderr():
    pt = PdPoint("x", 30, 100)
    assert pt.pd == 0.3
    assert pt.stderr == pytest.approx(math.sqrt(0.3 * 0.7 / 100))


def test_sweep_snr2_monotone(scenario):
    rows = sweep(scenario, "snr2", [-20, -16, -12, -8], ("subspace",))
    pds = [r.point for r in rows]
    for lo, hi in zip(pds, pds[1:]):
        assert hi.pd >= lo.pd - 2 * math.hypot(lo.stderr, hi.stderr)


def test_glrt_cd_flat_in_snr1(scenario):
    rows = sweep(scenario, "snr1", [10, 20, 30, 40], ("glrt_cd",))
    assert len({r.point.hits for r in rows}) == 1


def test_sweep_constellation_axis(scenario):
    sc = replace(scenario, trials=20)
    rows = sweep(sc, "constellation", ["bpsk", "qam16"], thresholds=ThresholdCache({k: 9.0 for k in ALL_KINDS}))
    assert [(r.axis_value, r.detector) for r in rows][:3] == [
        ("bpsk", "fft_cfar"), ("bpsk", "subspace"), ("bpsk", "glrt_cd")]
    assert len(rows) == 6


def test_sweep_rejects_bad_axis(scenario):
    with pytest.raises(ValueError):
        sweep(scenario, "range", [1.0])
    with pytest.raises(ValueError):
        sweep(scenario, "snr2", [math.inf])


def test_find_snr_for_pd(scenario):
    sc = replace(scenario, constellation="bpsk", trials=200)
    gamma = calibrate_threshold(sc)
    snr = find_snr_for_pd(sc, gamma, 0.5, tol=0.5)
    pd = estimate_pd(sc.with_snr(1, snr), gamma, "subspace").pd
    assert 0.35 <= pd <= 0.65


class TestSlices:
    @pytest.fixture
    def slices(self):
        frame = FrameConfig(28e9, 120e3, 512, 1, 1.666e-6, 10e-6)
        return Scenario(frame, "bpsk", (TargetSpec(30, 40), TargetSpec(90, 10)))

    def test_normalized(self, slices):
        sl = range_slice(slices, seed=1, iteration=1)
        assert set(sl) == set(ALL_KINDS)
        for v in sl.values():
            assert v.max() == 0.0
            assert v.shape == (102,)

    def test_bpsk_weak_target_visible(self, slices):
        v = range_slice(slices, 1, 1, kinds=[ConstellationKind.BPSK])[ConstellationKind.BPSK]
        others = np.delete(v, [11, 12, 13, 36, 37, 38])
        assert v[37] > others.max() + 10

    def test_qam1024_first_iteration_masked(self, slices):
        J1, _ = slice_profiles(slices, "qam1024", 2)
        floor = np.median(np.delete(J1[:, 0], [12, 37]))
        # Target-1 sidelobe floor sits within ~10 dB of the weak mainlobe
        assert J1[37, 0] < 10 * floor

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_second_iteration_reveals_weak_target(self, slices, kind):
        v = range_slice(slices, 4, 2, kinds=[kind])[kind]
        assert int(np.argmax(v)) == 37

    def test_bad_iteration(self, slices):
        with pytest.raises(ValueError):
            range_slice(slices, 0, 3)


def test_psl_statistics(fast_frame):
    sc = Scenario(fast_frame, "bpsk", (TargetSpec(30, 0),))
    mean_b, _ = psl_statistics(sc, "bpsk", 20)
    assert mean_b < -200
    mean_q16, p95_q16 = psl_statistics(sc, "qam16", 50)
    mean_q1024, _ = psl_statistics(sc, "qam1024", 50)
    assert -40 < mean_q16 < p95_q16 < 0
    assert -40 < mean_q1024 < 0
