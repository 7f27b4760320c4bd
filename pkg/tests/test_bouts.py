import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from actiscreen.bouts import bout_threshold, detect_bouts
from actiscreen.errors import EmptyWindow
from actiscreen.signal import UniformSignal
from actiscreen.sleep import SleepWindow

RATE = 100


def _sig(mag, wear=None):
    mag = np.asarray(mag, dtype=float)
    # split the norm over three axes so that the Euclidean norm is exactly representable
    x = mag * 0.6
    y = mag * 0.8
    z = np.zeros_like(mag)
    return UniformSignal(0, RATE, x, y, z, None if wear is None else np.asarray(wear, bool))


def _win(n):
    return SleepWindow(0, int(n * 1e9 / RATE))


def _bouts(sig):
    return [(b.start_idx, b.end_idx) for b in detect_bouts(sig, _win(len(sig)))]


def test_silence_gives_clamped_threshold_and_no_bouts():
    mag = np.full(5000, 1e-4)
    assert bout_threshold(mag) == 0.1
    assert _bouts(_sig(mag)) == []


def test_small_signal_clamps():
    rng = np.random.default_rng(0)
    mag = 0.05 + 0.02 * rng.standard_normal(10000)
    assert bout_threshold(mag) == 0.1


def test_spike_train_gaps_and_durations():
    n = 200 * RATE
    mag = np.zeros(n)

    def on(t0, dur):
        mag[int(t0 * RATE): int(t0 * RATE) + int(round(dur * RATE))] = 1.0

    on(10, 1.0); on(11.8, 1.0)       # 0.8 s gap -> merged
    on(20, 1.0); on(22.2, 1.0)       # 1.2 s gap -> split
    on(30, 0.4)                      # too short
    on(40, 55.0)                     # too long
    got = _bouts(_sig(mag))
    assert got == [(1000, 1280), (2000, 2100), (2220, 2320)]
    assert got == oracles.bouts_brute(mag * 1.0, np.ones(n, bool), RATE)


def test_nonworn_samples_never_active():
    mag = np.zeros(3000)
    mag[1000:1200] = 1.0
    wear = np.ones(3000, bool)
    wear[900:1300] = False
    assert _bouts(_sig(mag, wear)) == []


def test_empty_window():
    with pytest.raises(EmptyWindow):
        detect_bouts(_sig(np.ones(100)), SleepWindow(int(5e9), int(6e9)))


def _random_mag(rng, n):
    mag = np.abs(rng.normal(0, 0.03, n))
    for _ in range(int(rng.integers(0, 40))):
        a = int(rng.integers(0, n))
        mag[a: a + int(rng.integers(1, 6000))] += rng.uniform(0.05, 2.0)
    return mag


@given(st.integers(0, 2**32 - 1), st.integers(200, 60_000))
def test_equals_bruteforce(seed, n):
    rng = np.random.default_rng(seed)
    mag = _random_mag(rng, n)
    wear = rng.random(n) > 0.002
    sig = _sig(mag, wear)
    exact = np.sqrt(sig.x**2 + sig.y**2 + sig.z**2)
    assert _bouts(sig) == oracles.bouts_brute(exact, wear, RATE)


@given(st.integers(0, 2**32 - 1), st.floats(1.5, 40.0))
def test_scaling_invariance_when_clamp_inactive(seed, c):
    rng = np.random.default_rng(seed)
    mag = _random_mag(rng, 20_000) + 0.5
    base = _bouts(_sig(mag))
    scaled = _sig(mag * c)
    if bout_threshold(np.sqrt(scaled.x**2 + scaled.y**2)) > 0.1 and \
            bout_threshold(np.sqrt(_sig(mag).x**2 + _sig(mag).y**2)) > 0.1:
        got = _bouts(scaled)
        # boundaries may only move where a sample sits on the threshold to rounding
        assert len(got) == len(base)
        assert all(abs(a - b) <= 1 and abs(e - f) <= 1 for (a, e), (b, f) in zip(got, base))


def test_clamp_regime_follows_fixed_threshold():
    mag = np.zeros(10_000)
    mag[2000:2200] = 0.15
    mag[5000:5200] = 0.3
    base = _bouts(_sig(mag))
    assert base == [(2000, 2200), (5000, 5200)]
    # halving drops the first group below the fixed 0.1 g floor
    assert _bouts(_sig(mag * 0.5)) == [(5000, 5200)]
