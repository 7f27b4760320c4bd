"""Per-bout motion features.

Every function returns a dict of floats in which ``nan`` marks a value that
is undefined for the input (constant series, no peaks, too short). The
caller turns those into 0 plus a missing flag.
"""

import math

import numpy as np
from scipy import signal as sps

from .. import kernels
from ..errors import TooShort, TooShortForSpectrum

NAN = float("nan")
QUANTILES = (0, 25, 50, 75, 100)
ASD_FREQS = (1, 2, 4, 8, 16)


def _moments(v):
    """Mean, population std, skew and excess kurtosis (``nan`` when constant)."""
    mu = float(v.mean())
    d = v - mu
    m2 = float(np.dot(d, d)) / v.size
    sd = math.sqrt(m2)
    if sd <= 1e-12 * max(1.0, abs(mu)):
        return mu, 0.0, NAN, NAN
    d2 = d * d
    m3 = float(np.dot(d2, d)) / v.size
    m4 = float(np.dot(d2, d2)) / v.size
    return mu, sd, m3 / m2**1.5, m4 / (m2 * m2) - 3.0


def distributional(v):
    v = np.asarray(v, dtype=np.float64)
    mu, sd, sk, ku = _moments(v)
    out = {"mean": mu, "std": sd, "skew": sk, "kurt": ku}
    for q, val in zip(QUANTILES, np.percentile(v, QUANTILES)):
        out[f"q{q}"] = float(val)
    return out


def energy(x, y, z):
    """SMA, Power and RMS of the norm, plus per-axis mean |a|, mean a^2 and its root."""
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    ax, ay, az = (np.abs(a) for a in (x, y, z))
    p = float(np.mean(x * x + y * y + z * z))
    out = {"sma": float(np.mean(ax + ay + az)), "power": p, "rms": math.sqrt(p)}
    for name, a, aa in (("x", x, ax), ("y", y, ay), ("z", z, az)):
        pa = float(np.dot(a, a)) / a.size
        out[f"sma_{name}"] = float(aa.mean())
        out[f"power_{name}"] = pa
        out[f"rms_{name}"] = math.sqrt(pa)
    return out


def asd(v, rate, nfft_min=256):
    """One-sided amplitude spectral density (Hann window, mean removed, zero padded)."""
    v = np.asarray(v, dtype=np.float64)
    nfft = 1 << max(int(nfft_min) - 1, v.size - 1).bit_length()
    f, pxx = sps.periodogram(v, fs=rate, window="hann", nfft=nfft, detrend="constant", scaling="density")
    return f, np.sqrt(pxx)


def _top_peaks(spec, k=3):
    """Indices of the ``k`` largest interior local maxima; ties go to the lower index."""
    if spec.size < 3:
        return []
    c = spec[1:-1]
    idx = np.flatnonzero((c > spec[:-2]) & (c >= spec[2:])) + 1
    order = np.lexsort((idx, -spec[idx]))
    return idx[order[:k]].tolist()


def spectral_features(v, rate, nfft_min=256, min_s=1.0):
    v = np.asarray(v, dtype=np.float64)
    if v.size < min_s * rate or v.size < 2:
        raise TooShortForSpectrum(f"spectral features need at least {min_s} s")
    f, a = asd(v, rate, nfft_min)
    df = f[1] - f[0]
    out = {}
    peaks = _top_peaks(a)
    for j in range(3):
        if j < len(peaks):
            out[f"f{j + 1}"] = float(f[peaks[j]])
            out[f"asd_f{j + 1}"] = float(a[peaks[j]])
        else:
            out[f"f{j + 1}"] = NAN
            out[f"asd_f{j + 1}"] = NAN
    for fq in ASD_FREQS:
        k = int(round(fq / df))
        out[f"asd_{fq}hz"] = float(a[k]) if k < a.size else NAN
    out["asd_sum"] = float(a.sum())
    p = a * a
    tot = p.sum()
    if tot <= 0:
        out["spectral_entropy"] = 0.0
    else:
        p = p[p > 0] / tot
        out["spectral_entropy"] = float(-(p * np.log(p)).sum() / math.log(a.size))
    return out


def autocorrelation(v, max_lag):
    """Biased normalised autocorrelation for lags 0..max_lag (``None`` if constant)."""
    v = np.asarray(v, dtype=np.float64)
    d = v - v.mean()
    den = float(np.dot(d, d))
    if den <= 1e-24 * v.size:
        return None
    full = np.correlate(d, d, mode="full")[v.size - 1 : v.size + max_lag]
    return full / den


def autocorr_features(v, rate, max_lag_s=10.0):
    """Extremes of AC(tau) for tau >= 1, their lags and the first local minimum (s), zero crossings."""
    v = np.asarray(v, dtype=np.float64)
    keys = ("ac_max", "ac_max_lag", "ac_min", "ac_min_lag", "ac_first_min_lag", "ac_zero_cross")
    L = min(v.size - 1, int(max_lag_s * rate))
    ac = autocorrelation(v, L) if L >= 1 else None
    if ac is None:
        return dict.fromkeys(keys, NAN)
    tail = ac[1:]
    i_max = int(np.argmax(tail))
    i_min = int(np.argmin(tail))
    first = NAN
    for t in range(1, L):
        if ac[t] < ac[t - 1] and ac[t] <= ac[t + 1]:
            first = t / rate
            break
    s = np.sign(ac)
    s = s[s != 0]
    zc = int(np.count_nonzero(s[1:] != s[:-1]))
    return {
        "ac_max": float(tail[i_max]),
        "ac_max_lag": (i_max + 1) / rate,
        "ac_min": float(tail[i_min]),
        "ac_min_lag": (i_min + 1) / rate,
        "ac_first_min_lag": first,
        "ac_zero_cross": float(zc),
    }


def sample_entropy(v, m=2, r_frac=0.2):
    """SampEn with tolerance ``r_frac * std`` and Chebyshev distance.

    Returns ``(value, capped)``; when no template pair matches, the value is
    the upper bound ``ln(N - m) + ln(N - m - 1)`` and ``capped`` is True.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    n = v.size
    if n < m + 3:
        raise TooShort(f"sample entropy needs at least {m + 3} samples")
    r = r_frac * float(v.std())
    A, B = kernels.sampen_counts(v, m, r)
    if A == 0 or B == 0:
        return math.log(n - m) + math.log(n - m - 1), True
    return -math.log(A / B), False


def hurst_rs(v, min_window=16):
    """Rescaled-range Hurst exponent over window sizes 16, 32, ... <= N/2 (``nan`` if constant)."""
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    if n < 4 * min_window:
        raise TooShort(f"Hurst R/S needs at least {4 * min_window} samples")
    sizes, rs = [], []
    s = min_window
    while s <= n // 2:
        k = n // s
        w = v[: k * s].reshape(k, s)
        dev = w - w.mean(axis=1, keepdims=True)
        z = np.cumsum(dev, axis=1)
        r = z.max(axis=1) - z.min(axis=1)
        sd = w.std(axis=1)
        ok = sd > 1e-12
        if ok.any():
            sizes.append(s)
            rs.append(float(np.mean(r[ok] / sd[ok])))
        s *= 2
    if len(sizes) < 2 or min(rs) <= 0:
        return NAN
    slope = np.polyfit(np.log(sizes), np.log(rs), 1)[0]
    return float(slope)


def poincare(v):
    v = np.asarray(v, dtype=np.float64)
    a, b = v[:-1], v[1:]
    sd1 = float(np.std((b - a) / math.sqrt(2.0)))
    sd2 = float(np.std((b + a) / math.sqrt(2.0)))
    return {"sd1": sd1, "sd2": sd2, "poincare_area": math.pi * sd1 * sd2}


def peak_features(v, rate, min_prominence=0.05):
    v = np.asarray(v, dtype=np.float64)
    _, props = sps.find_peaks(v, prominence=min_prominence)
    prom = props["prominences"]
    out = {"peaks_per_sec": prom.size / (v.size / rate)}
    if prom.size:
        out.update(prom_mean=float(prom.mean()), prom_min=float(prom.min()), prom_max=float(prom.max()))
    else:
        out.update(prom_mean=NAN, prom_min=NAN, prom_max=NAN)
    return out
