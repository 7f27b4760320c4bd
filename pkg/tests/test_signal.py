import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from helpers import NS, rest_pose_signal, sine_signal
from actiscreen.errors import CutoffAboveNyquist, EmptyRecording, NotEnoughStillData
from actiscreen.ingest import RawRecording
from actiscreen.signal import (UniformSignal, autocalibrate, bandpass, butter_bandpass_sos,
                               butterworth_bandpass_gain, detect_nonwear, grid_times, resample,
                               sos_frequency_response, stationary)


def _rec(t, codes=None, rate=100):
    n = len(t)
    if codes is None:
        codes = np.arange(3 * n).reshape(n, 3) % 30000
    return RawRecording("d", rate, 8, t, codes)


# resample ---------------------------------------------------------------------


def test_uniform_input_is_identity():
    t = np.arange(1000, dtype=np.int64) * 10_000_000 + 123
    rec = _rec(t)
    sig = resample(rec, 100)
    assert len(sig) == 1000
    assert np.array_equal(sig.x, rec.acc[:, 0])
    assert np.array_equal(sig.z, rec.acc[:, 2])
    assert sig.wear_mask.all()


def test_drifted_clock_resampled_to_real_duration():
    n = 100_000
    t = (np.arange(n) * NS / 100.02).astype(np.int64)
    sig = resample(_rec(t), 100)
    span = int(t[-1])
    assert len(sig) == -(-(span + 1) * 100 // NS)
    times = sig.times()
    assert np.all(np.diff(times) == 10_000_000)
    assert times[-1] <= span < times[-1] + 10_000_000


def test_equidistant_tie_picks_earlier():
    # grid point 10 ms sits exactly between inputs at 5 ms and 15 ms
    t = np.array([0, 5_000_000, 15_000_000, 20_000_000])
    codes = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]])
    sig = resample(_rec(t, codes), 100)
    assert sig.x[1] == pytest.approx(1 * 8 / 32768)


def test_grid_has_no_drift_over_a_week():
    k = np.array([0, 1, 7 * 86400 * 30 - 1], dtype=np.int64)
    t = grid_times(0, 30.0, k)
    assert t[-1] == (7 * 86400 * 30 - 1) * NS // 30


def test_empty_recording():
    with pytest.raises(EmptyRecording):
        resample(None)


# calibration --------------------------------------------------------------------


def test_calibrated_data_is_fixed_point():
    sig = rest_pose_signal(13, 5, np.random.default_rng(1))
    _, p = autocalibrate(sig)
    assert np.allclose(p.gain, 1, atol=0.005)
    assert np.all(np.abs(p.offset) < 0.002)
    assert p.residual_after <= p.residual_before


def test_miscalibration_recovered():
    gain, off = np.array([1.05, 0.97, 1.02]), np.array([0.020, -0.015, 0.008])
    sig = rest_pose_signal(13, 5, np.random.default_rng(2), gain=gain, offset=off)
    _, p = autocalibrate(sig)
    # the fit inverts the distortion: g_fit * (g a + o) + o_fit = a
    assert np.allclose(np.array(p.gain) * gain, 1, atol=0.005)
    assert np.all(np.abs(np.array(p.gain) * off + np.array(p.offset)) < 0.003)
    assert p.residual_after < 5.0
    assert p.residual_after <= p.residual_before


def test_too_short_for_calibration():
    sig = rest_pose_signal(2, 5, np.random.default_rng(3))
    with pytest.raises(NotEnoughStillData):
        autocalibrate(sig)


def test_poor_coverage_returns_identity_with_warning():
    sig = rest_pose_signal(13, 5, np.random.default_rng(4))
    sig.x[:] = np.abs(sig.x)  # x never negative
    out, p = autocalibrate(sig)
    assert p.gain == (1.0, 1.0, 1.0) and p.warning
    assert out is sig


# band-pass ------------------------------------------------------------------------


def _steady_gain(freq, rate=100.0, seconds=60.0):
    sig = sine_signal(freq, rate, seconds)
    out = bandpass(sig, 0.8, 20.0)
    tail = len(sig) // 2
    return np.sqrt(2 * np.mean(out.x[tail:] ** 2))


def test_dc_is_rejected():
    sig = sine_signal(1.0, 100, 120, amp=0.0, dc=1.0)
    out = bandpass(sig)
    assert np.max(np.abs(out.x[-1000:])) < 1e-3


def test_4hz_gain_matches_analytic():
    want = butterworth_bandpass_gain([4.0], 0.8, 20.0, 100.0)[0]
    assert _steady_gain(4.0) == pytest.approx(want, rel=0.01)


def test_slow_sine_suppressed():
    assert _steady_gain(0.1, seconds=600) < 0.01


def test_sos_response_equals_closed_form():
    sos = butter_bandpass_sos(0.8, 20.0, 100.0)
    f = np.linspace(0.05, 49.9, 400)
    assert np.allclose(np.abs(sos_frequency_response(sos, f, 100.0)),
                       butterworth_bandpass_gain(f, 0.8, 20.0, 100.0), rtol=1e-9, atol=1e-12)


def test_sos_matches_reference_design():
    from scipy import signal as sps
    ours = butter_bandpass_sos(0.8, 20.0, 100.0)
    ref = sps.butter(4, [0.8, 20.0], btype="bandpass", fs=100.0, output="sos")
    f = np.linspace(0.01, 49.9, 300)
    _, h_ref = sps.sosfreqz(ref, worN=f, fs=100.0)
    assert np.allclose(np.abs(sos_frequency_response(ours, f, 100.0)), np.abs(h_ref), atol=1e-9)


def test_cutoff_above_nyquist():
    with pytest.raises(CutoffAboveNyquist):
        butter_bandpass_sos(0.8, 20.0, 40.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_bandpass_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    n = 500
    x = rng.standard_normal((3, n))
    y = rng.standard_normal((3, n))
    sx, sy = UniformSignal(0, 100, *x), UniformSignal(0, 100, *y)
    sc = UniformSignal(0, 100, *(a * x + b * y))
    fx, fy, fc = bandpass(sx), bandpass(sy), bandpass(sc)
    for ax in "xyz":
        lhs = getattr(fc, ax)
        rhs = a * getattr(fx, ax) + b * getattr(fy, ax)
        assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (1 + np.max(np.abs(rhs))))


def test_filter_restarts_at_nonwear_boundary():
    sig = sine_signal(3.0, 100, 20)
    sig.wear_mask[1000:] = False
    out = bandpass(sig)
    fresh = bandpass(UniformSignal(0, 100, sig.x[1000:], sig.y[1000:], sig.z[1000:]))
    assert np.allclose(out.x[1000:], fresh.x)


# non-wear ---------------------------------------------------------------------------


def test_two_hours_constant_is_one_nonwear_segment():
    n = 2 * 3600 * 10
    sig = UniformSignal(0, 10, np.zeros(n), np.zeros(n), np.ones(n))
    assert detect_nonwear(sig).segments == [(0, n, False)]


def test_45_minutes_still_stays_wear():
    rng = np.random.default_rng(5)
    rate = 10
    act = lambda m: rng.normal(0, 0.2, int(m * 60 * rate))
    still = np.zeros(45 * 60 * rate)
    x = np.concatenate([act(30), still, act(30)])
    sig = UniformSignal(0, rate, x, x.copy(), x.copy())
    assert all(w for _, _, w in detect_nonwear(sig).segments)


def test_stationary_matches_bruteforce():
    rng = np.random.default_rng(6)
    rate, parts = 4, []
    for _ in range(12):
        m = int(rng.integers(5, 200))
        parts.append(rng.normal(0, 0.05, (m, 3)) if rng.random() < 0.5 else np.full((m, 3), rng.normal()))
    a = np.concatenate(parts)
    sig = UniformSignal(0, rate, *a.T.copy())
    want = oracles.rolling_std_stationary(a[:, 0], a[:, 1], a[:, 2], 40, 0.015)
    assert np.array_equal(stationary(sig), want)
