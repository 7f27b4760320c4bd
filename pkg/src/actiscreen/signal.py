"""Uniform resampling, gravity auto-calibration, band-pass filtering, non-wear."""

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import CutoffAboveNyquist, EmptyRecording, IllConditioned, NotEnoughStillData

log = logging.getLogger(__name__)

NS = 1_000_000_000


@dataclass(eq=False)
class UniformSignal:
    """Fixed-rate tri-axial signal in g with a per-sample wear mask (True = worn)."""

    start_t: int
    rate: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    wear_mask: np.ndarray = None

    def __post_init__(self):
        self.start_t = int(self.start_t)
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        n = len(self.x)
        if n == 0 or len(self.y) != n or len(self.z) != n:
            raise ValueError("axes must have equal, non-zero length")
        if self.wear_mask is None:
            self.wear_mask = np.ones(n, dtype=bool)
        elif len(self.wear_mask) != n:
            raise ValueError("wear mask length differs from signal length")

    def __len__(self):
        return len(self.x)

    @property
    def duration_s(self):
        return len(self) / self.rate

    @property
    def magnitude(self):
        return np.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def times(self, idx=None):
        """Integer-nanosecond grid times (all samples, or the given indices)."""
        k = np.arange(len(self), dtype=np.int64) if idx is None else np.asarray(idx, dtype=np.int64)
        return grid_times(self.start_t, self.rate, k)

    def index_at(self, t_ns, side="left"):
        """First grid index with time >= t_ns (``side="left"``) or > t_ns."""
        num, den = _period(self.rate)
        d = int(t_ns) - self.start_t + (1 if side == "right" else 0)
        # smallest k with floor(k*num/den) >= d  <=>  k*num >= d*den
        k = -((-d * den) // num)
        return int(min(max(k, 0), len(self)))


def _period(rate):
    """Sample period in ns as an exact fraction (numerator, denominator)."""
    p = Fraction(NS) / Fraction(rate).limit_denominator(1000)
    return p.numerator, p.denominator


def grid_times(start_t, rate, k):
    """``start_t + floor(k * 1e9 / rate)`` in exact integer arithmetic."""
    num, den = _period(rate)
    k = np.asarray(k, dtype=np.int64)
    if num * den < 2**62:
        a, b = np.divmod(k, den)
        return start_t + a * num + (b * num) // den
    return np.array([start_t + (int(v) * num) // den for v in k], dtype=np.int64)


def resample(rec, target_rate=None):
    """Nearest-neighbour resampling of a raw recording onto a uniform grid.

    The grid starts at the first timestamp and covers the last one; ties
    between two equidistant inputs pick the earlier sample. ``target_rate``
    defaults to the recording's nominal rate.
    """
    if rec is None or len(rec) == 0:
        raise EmptyRecording("cannot resample an empty recording")
    rate = float(rec.nominal_rate if target_rate is None else target_rate)
    if not 1 < rate < 10_000:
        raise ValueError(f"target rate {rate} Hz outside (1, 10000)")
    num, den = _period(rate)
    first = int(rec.t[0])
    span = int(rec.t[-1]) - first
    n_out = -(-((span + 1) * den) // num)  # k*num/den < span+1
    grid = grid_times(first, rate, np.arange(n_out, dtype=np.int64))
    idx = kernels.nearest_indices(rec.t, grid)
    del grid
    scale = rec.scale
    axes = [rec.codes[idx, a].astype(np.float64) * scale for a in range(3)]
    return UniformSignal(first, rate, *axes)


# calibration ------------------------------------------------------------------------


@dataclass
class CalibrationParams:
    """Per-axis correction ``a' = gain * a + offset`` and the sphere residuals (mg)."""

    gain: tuple = (1.0, 1.0, 1.0)
    offset: tuple = (0.0, 0.0, 0.0)
    residual_before: float = 0.0
    residual_after: float = 0.0
    n_rest_segments: int = 0
    iterations: int = 0
    warning: str = None

    def to_dict(self):
        return {
            "gain": list(self.gain),
            "offset": list(self.offset),
            "residual_before_mg": self.residual_before,
            "residual_after_mg": self.residual_after,
            "n_rest_segments": self.n_rest_segments,
            "iterations": self.iterations,
            "warning": self.warning,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            gain=tuple(d["gain"]),
            offset=tuple(d["offset"]),
            residual_before=d["residual_before_mg"],
            residual_after=d["residual_after_mg"],
            n_rest_segments=d["n_rest_segments"],
            iterations=d.get("iterations", 0),
            warning=d.get("warning"),
        )


def rest_segment_means(sig, window_s=10.0, std_thr=0.013):
    """Per-axis means of non-overlapping windows whose per-axis std is below ``std_thr``."""
    w = int(round(window_s * sig.rate))
    nwin = len(sig) // w
    if nwin == 0:
        return np.empty((0, 3))
    means = []
    still = np.ones(nwin, dtype=bool)
    for a in (sig.x, sig.y, sig.z):
        blk = a[: nwin * w].reshape(nwin, w)
        means.append(blk.mean(axis=1))
        still &= blk.std(axis=1) < std_thr
    return np.column_stack(means)[still]


def sphere_residual_mg(means, gain=(1.0, 1.0, 1.0), offset=(0.0, 0.0, 0.0)):
    cal = means * np.asarray(gain) + np.asarray(offset)
    return float(np.mean(np.abs(np.linalg.norm(cal, axis=1) - 1.0)) * 1000.0)


def apply_calibration(sig, params, inplace=False):
    g, o = params.gain, params.offset
    if inplace:
        for a, name in enumerate("xyz"):
            arr = getattr(sig, name)
            arr *= g[a]
            arr += o[a]
        return sig
    return replace(
        sig,
        x=sig.x * g[0] + o[0],
        y=sig.y * g[1] + o[1],
        z=sig.z * g[2] + o[2],
        wear_mask=sig.wear_mask.copy(),
    )


def fit_calibration(means, max_iter=100, tol_mg=0.001, weight_floor=0.001):
    """Iterative weighted least squares of rest means onto the unit sphere.

    Returns ``(gain, offset, residual_mg, iterations)`` for the iterate with
    the smallest unweighted residual.
    """
    gain = np.ones(3)
    offset = np.zeros(3)
    best = (gain.copy(), offset.copy(), sphere_residual_mg(means), 0)
    prev = best[2]
    it = 0
    for it in range(1, max_iter + 1):
        cal = means * gain + offset
        norms = np.linalg.norm(cal, axis=1)
        target = cal / norms[:, None]
        w = 1.0 / np.maximum(np.abs(norms - 1.0), weight_floor)
        sw = w.sum()
        for a in range(3):
            xa = means[:, a]
            ya = target[:, a]
            mx = (w * xa).sum() / sw
            my = (w * ya).sum() / sw
            sxx = (w * (xa - mx) ** 2).sum()
            if sxx <= 1e-12 * sw:
                raise IllConditioned(f"axis {'xyz'[a]} has no spread among rest segments")
            gain[a] = (w * (xa - mx) * (ya - my)).sum() / sxx
            offset[a] = my - gain[a] * mx
        if not (np.all(np.isfinite(gain)) and np.all(np.isfinite(offset))):
            raise IllConditioned("calibration fit diverged")
        eps = sphere_residual_mg(means, gain, offset)
        if eps < best[2]:
            best = (gain.copy(), offset.copy(), eps, it)
        if abs(prev - eps) < tol_mg:
            break
        prev = eps
    return best[0], best[1], best[2], it


def autocalibrate(sig, *, window_s=10.0, std_thr=0.013, min_segments=300, coverage=0.3,
                  max_iter=100, tol_mg=0.001, min_hours=12.0, strict=False, inplace=False):
    """Fit and apply gain/offset so still-period means lie on the unit sphere.

    Too few rest segments, or rest segments that do not reach both
    ``-coverage`` and ``+coverage`` g on every axis, leave the signal
    unchanged with identity parameters and ``warning`` set (``strict=True``
    raises :class:`NotEnoughStillData` instead).
    """
    hours = sig.duration_s / 3600.0
    if hours < min_hours:
        raise NotEnoughStillData(f"{hours:.2f} h of data, need at least {min_hours} h")
    means = rest_segment_means(sig, window_s, std_thr)
    before = sphere_residual_mg(means) if len(means) else 0.0
    problem = None
    if len(means) < min_segments:
        problem = f"only {len(means)} rest segments (need {min_segments})"
    elif not (np.all(means.min(axis=0) < -coverage) and np.all(means.max(axis=0) > coverage)):
        problem = f"rest segments do not cover +/-{coverage} g on every axis"
    if problem is not None:
        if strict:
            raise NotEnoughStillData(problem)
        log.warning("calibration skipped: %s", problem)
        params = CalibrationParams(residual_before=before, residual_after=before,
                                   n_rest_segments=len(means), warning=problem)
        return sig, params
    gain, offset, after, iters = fit_calibration(means, max_iter, tol_mg)
    if np.any(gain <= 0.5) or np.any(gain >= 1.5) or np.any(np.abs(offset) >= 0.5):
        raise IllConditioned(f"implausible calibration gain={gain} offset={offset}")
    params = CalibrationParams(
        gain=tuple(float(v) for v in gain),
        offset=tuple(float(v) for v in offset),
        residual_before=before,
        residual_after=after,
        n_rest_segments=len(means),
        iterations=iters,
    )
    return apply_calibration(sig, params, inplace), params


# band-pass --------------------------------------------------------------------------------


def butter_bandpass_sos(lo, hi, rate, order=4):
    """Digital Butterworth band-pass as second-order sections.

    ``order`` is the low-pass prototype order, so the band-pass has
    ``2 * order`` poles in ``order`` sections. Band edges are pre-warped and
    mapped with the bilinear transform.
    """
    nyq = rate / 2.0
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if hi >= nyq:
        raise CutoffAboveNyquist(f"upper cutoff {hi} Hz >= Nyquist {nyq} Hz")
    fs2 = 2.0 * rate
    wl = fs2 * math.tan(math.pi * lo / rate)
    wh = fs2 * math.tan(math.pi * hi / rate)
    bw = wh - wl
    w0sq = wl * wh
    proto = [np.exp(1j * math.pi * (2 * k + order - 1) / (2 * order)) for k in range(1, order + 1)]
    poles = []
    for p in proto:
        pb = p * bw
        disc = np.sqrt(pb * pb - 4.0 * w0sq + 0j)
        poles.extend([(pb + disc) / 2.0, (pb - disc) / 2.0])
    poles = np.array(poles)
    zpoles = (fs2 + poles) / (fs2 - poles)
    # analog gain bw**order with `order` zeros at s=0 and `order` at infinity
    k = bw**order * np.real(fs2**order / np.prod(fs2 - poles))
    upper = zpoles[zpoles.imag > 0]
    upper = upper[np.argsort(np.abs(upper))]
    if len(upper) != order:
        raise IllConditioned("band-pass poles are not in conjugate pairs")
    sos = np.zeros((order, 6))
    for i, p in enumerate(upper):
        sos[i, :3] = [1.0, 0.0, -1.0]
        sos[i, 3:] = [1.0, -2.0 * p.real, abs(p) ** 2]
    sos[0, :3] *= k
    return sos


def sos_frequency_response(sos, freqs, rate):
    """Complex response of an SOS cascade at the given frequencies (Hz)."""
    zinv = np.exp(-2j * np.pi * np.asarray(freqs, dtype=float) / rate)
    h = np.ones_like(zinv)
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 * zinv + b2 * zinv**2) / (a0 + a1 * zinv + a2 * zinv**2)
    return h


def butterworth_bandpass_gain(freqs, lo, hi, rate, order=4):
    """Closed-form magnitude of the pre-warped bilinear Butterworth band-pass."""
    f = np.asarray(freqs, dtype=float)
    fs2 = 2.0 * rate
    om = fs2 * np.tan(np.pi * f / rate)
    wl = fs2 * math.tan(math.pi * lo / rate)
    wh = fs2 * math.tan(math.pi * hi / rate)
    with np.errstate(divide="ignore"):
        u = (om**2 - wl * wh) / (om * (wh - wl))
    return 1.0 / np.sqrt(1.0 + u ** (2 * order))


def _segment_starts(mask):
    return np.concatenate(([0], np.flatnonzero(np.diff(mask.astype(np.int8))) + 1)).astype(np.int64)


def bandpass(sig, lo=0.8, hi=20.0, order=4, inplace=False):
    """Causal band-pass of each axis; filter state restarts at every wear/non-wear change.

    ``inplace=True`` swaps the filtered axes into ``sig`` one at a time,
    which keeps peak memory near one extra axis.
    """
    sos = butter_bandpass_sos(lo, hi, sig.rate, order)
    starts = _segment_starts(sig.wear_mask)
    if inplace:
        for name in "xyz":
            setattr(sig, name, kernels.sos_filter(sos, np.ascontiguousarray(getattr(sig, name), dtype=np.float64),
                                                  starts))
        return sig
    out = [kernels.sos_filter(sos, np.ascontiguousarray(a, dtype=np.float64), starts)
           for a in (sig.x, sig.y, sig.z)]
    return replace(sig, x=out[0], y=out[1], z=out[2], wear_mask=sig.wear_mask.copy())


# non-wear -------------------------------------------------------------------------------------


@dataclass
class WearSegments:
    """Contiguous ``(start_idx, end_idx, is_wear)`` runs covering a signal (end exclusive)."""

    segments: list = field(default_factory=list)

    def mask(self, n=None):
        n = self.segments[-1][1] if n is None else n
        m = np.ones(n, dtype=bool)
        for a, b, wear in self.segments:
            if not wear:
                m[a:b] = False
        return m

    def nonwear(self):
        return [(a, b) for a, b, wear in self.segments if not wear]

    def to_list(self):
        return [[int(a), int(b), bool(w)] for a, b, w in self.segments]

    @classmethod
    def from_list(cls, rows):
        return cls([(int(a), int(b), bool(w)) for a, b, w in rows])


def runs(mask):
    """``(start, end)`` index pairs of consecutive True values (end exclusive)."""
    m = np.concatenate(([0], np.asarray(mask, dtype=np.int8), [0]))
    d = np.diff(m)
    return np.flatnonzero(d == 1), np.flatnonzero(d == -1)


def stationary(sig, window_s=10.0, std_thr=0.015):
    w = max(1, int(round(window_s * sig.rate)))
    return kernels.stationary_mask(
        np.ascontiguousarray(sig.x, dtype=np.float64),
        np.ascontiguousarray(sig.y, dtype=np.float64),
        np.ascontiguousarray(sig.z, dtype=np.float64),
        w,
        std_thr,
    ).astype(bool)


def detect_nonwear(sig, window_s=10.0, std_thr=0.015, min_minutes=60.0):
    """Stationary runs (all axes' centred rolling std < ``std_thr``) longer than ``min_minutes``.

    Operates on the calibrated, unfiltered signal.
    """
    still = stationary(sig, window_s, std_thr)
    starts, ends = runs(still)
    min_len = min_minutes * 60.0 * sig.rate
    segs = []
    pos = 0
    for a, b in zip(starts.tolist(), ends.tolist()):
        if b - a > min_len:
            if a > pos:
                segs.append((pos, a, True))
            segs.append((a, b, False))
            pos = b
    if pos < len(sig):
        segs.append((pos, len(sig), True))
    return WearSegments(segs)


def with_wear(sig, segments):
    return replace(sig, wear_mask=segments.mask(len(sig)))
