"""Small signal builders shared by the tests."""

import numpy as np

from actiscreen.signal import UniformSignal

NS = 1_000_000_000


def random_unit_vectors(n, rng):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def rest_pose_signal(hours, rate, rng, gain=(1, 1, 1), offset=(0, 0, 0), noise_g=0.002, pose_s=60):
    """Piecewise-constant random orientations plus white noise, distorted as ``a * gain + offset``."""
    n = int(hours * 3600 * rate)
    per = int(pose_s * rate)
    poses = random_unit_vectors(n // per + 1, rng)
    acc = np.repeat(poses, per, axis=0)[:n] + rng.normal(0, noise_g, (n, 3))
    acc = acc * np.asarray(gain) + np.asarray(offset)
    return UniformSignal(0, rate, acc[:, 0].copy(), acc[:, 1].copy(), acc[:, 2].copy())


def sine_signal(freq, rate, seconds, amp=1.0, dc=0.0):
    t = np.arange(int(seconds * rate)) / rate
    v = dc + amp * np.sin(2 * np.pi * freq * t)
    return UniformSignal(0, rate, v.copy(), v.copy(), v.copy())
