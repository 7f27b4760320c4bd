"""Z-angle based sleep-period-time detection and analysis-window selection."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InsufficientData, NoOverlap
from .metrics import auroc
from .signal import NS, runs

HOUR_NS = 3600 * NS
DAY_NS = 24 * HOUR_NS


@dataclass(frozen=True)
class SleepWindow:
    onset_t: int
    wake_t: int
    night_index: int = -1
    overlap_with_typical: float = 0.0

    def __post_init__(self):
        if self.wake_t <= self.onset_t:
            raise ValueError("wake_t must be after onset_t")

    @property
    def duration_h(self):
        return (self.wake_t - self.onset_t) / HOUR_NS

    def to_dict(self):
        return {
            "night": self.night_index,
            "onset_t": int(self.onset_t),
            "wake_t": int(self.wake_t),
            "overlap_with_typical_h": self.overlap_with_typical,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["onset_t"]), int(d["wake_t"]), int(d.get("night", -1)),
                   float(d.get("overlap_with_typical_h", 0.0)))


@dataclass(eq=False)
class ZAngle:
    """Z-angle (degrees) per fixed epoch; ``wear`` is False for mostly non-worn epochs."""

    start_t: int
    epoch_s: float
    angle: np.ndarray
    wear: np.ndarray

    def epoch_time(self, i):
        return self.start_t + int(round(i * self.epoch_s * NS))


def _chunked_median(a, w, chunk):
    n = len(a)
    if n <= chunk + 2 * w:
        return kernels.rolling_median(np.ascontiguousarray(a, dtype=np.float64), w)
    out = np.empty(n)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        lo = max(0, s - w)
        hi = min(n, e + w)
        med = kernels.rolling_median(np.ascontiguousarray(a[lo:hi], dtype=np.float64), w)
        out[s:e] = med[s - lo : e - lo]
    return out


def z_angle(sig, epoch_s=5.0, median_s=5.0):
    """Epoch-mean of ``atan(mz / hypot(mx, my))`` over 5-s rolling per-axis medians.

    Expects the calibrated, unfiltered signal. Trailing samples that do not
    fill an epoch are dropped.
    """
    w = max(1, int(round(median_s * sig.rate)))
    e = max(1, int(round(epoch_s * sig.rate)))
    n_ep = len(sig) // e
    if n_ep == 0:
        raise InsufficientData("signal shorter than one epoch")
    n = n_ep * e
    chunk = max(e, (4_000_000 // e) * e)
    angle = np.empty(n_ep)
    wear = np.empty(n_ep, dtype=bool)
    for s in range(0, n, chunk):
        stop = min(n, s + chunk)
        lo = max(0, s - w)
        hi = min(len(sig), stop + w)
        meds = [
            kernels.rolling_median(np.ascontiguousarray(a[lo:hi], dtype=np.float64), w)[s - lo : stop - lo]
            if (lo > 0 or hi < len(sig))
            else kernels.rolling_median(np.ascontiguousarray(a, dtype=np.float64), w)[s:stop]
            for a in (sig.x, sig.y, sig.z)
        ]
        ang = np.degrees(np.arctan2(meds[2], np.hypot(meds[0], meds[1])))
        angle[s // e : stop // e] = ang.reshape(-1, e).mean(axis=1)
        wear[s // e : stop // e] = sig.wear_mask[s:stop].reshape(-1, e).mean(axis=1) >= 0.5
    return ZAngle(sig.start_t, e / sig.rate, angle, wear)


def _local_noon_before(t_ns, utc_offset_s):
    off = int(utc_offset_s * NS)
    local = t_ns + off
    noon = (local - 12 * HOUR_NS) // DAY_NS * DAY_NS + 12 * HOUR_NS
    return noon - off


def detect_spt_windows(z, *, utc_offset_s=0.0, percentile=10.0, multiplier=15.0,
                       clamp=(0.13, 0.50), min_block_min=30.0, max_gap_min=60.0,
                       diff_median_min=5.0, min_day_coverage=0.99):
    """Candidate sleep blocks per noon-to-noon day from sustained z-angle stillness.

    Absolute epoch-to-epoch z-angle changes are smoothed with a centred
    ``diff_median_min`` rolling median (0 disables it); the per-day threshold
    is ``multiplier`` times their ``percentile``-th percentile over worn
    epochs, clamped to ``clamp``. Quiet runs of at least ``min_block_min``
    merge across gaps shorter than ``max_gap_min``; all merged blocks are
    returned. Non-worn epochs never count as quiet.
    """
    ang = z.angle
    n = len(ang)
    if n < 2:
        raise InsufficientData("need at least two z-angle epochs")
    d = np.abs(np.diff(ang))
    d = np.concatenate(([d[0]], d))
    k = int(round(diff_median_min * 60.0 / z.epoch_s))
    if k > 1:
        d = _chunked_median(d, k, 1_000_000)
    per_day = int(round(86400.0 / z.epoch_s))
    ep_ns = z.epoch_s * NS
    first = z.start_t
    day0 = _local_noon_before(first, utc_offset_s)
    out = []
    analysed = 0
    day_start = day0
    end_t = z.epoch_time(n)
    while day_start < end_t:
        a = max(0, int(math.ceil((day_start - first) / ep_ns)))
        b = min(n, int(math.ceil((day_start + DAY_NS - first) / ep_ns)))
        day_start += DAY_NS
        if b - a < min_day_coverage * per_day:
            continue
        analysed += 1
        dd = d[a:b]
        worn = z.wear[a:b]
        if not worn.any():
            continue
        thr = float(np.clip(multiplier * np.percentile(dd[worn], percentile), *clamp))
        quiet = (dd < thr) & worn
        starts, ends = runs(quiet)
        keep = (ends - starts) * z.epoch_s >= min_block_min * 60.0
        blocks = list(zip(starts[keep].tolist(), ends[keep].tolist()))
        merged = []
        for s, e in blocks:
            if merged and (s - merged[-1][1]) * z.epoch_s < max_gap_min * 60.0:
                merged[-1] = (merged[-1][0], e)
            else:
                merged.append((s, e))
        for s, e in merged:
            out.append(SleepWindow(z.epoch_time(a + s), z.epoch_time(a + e)))
    if analysed == 0:
        raise InsufficientData("no noon-to-noon day with a full 24 h of data")
    return out


def _typical_overlap(w, utc_offset_s, typical):
    """Best overlap (hours) with one typical sleep period and that period's local start."""
    off = int(utc_offset_s * NS)
    start_h, end_h = typical
    span_ns = ((end_h - start_h) % 24) * HOUR_NS
    local_on = w.onset_t + off
    base = local_on // DAY_NS * DAY_NS
    best = (0.0, None)
    for dd in (-1, 0, 1):
        ts = base + dd * DAY_NS + start_h * HOUR_NS
        te = ts + span_ns
        ov = max(0, min(w.wake_t + off, te) - max(local_on, ts)) / HOUR_NS
        if ov > best[0]:
            best = (ov, ts)
    return best


def select_analysis_windows(cands, *, utc_offset_s=0.0, min_hours=4.0, min_overlap_hours=2.0,
                            typical=(22, 9), max_hours=16.0, ref_t=None):
    """Keep windows longer than ``min_hours`` overlapping the typical period by at least
    ``min_overlap_hours``; one window per night (longest, then earliest)."""
    by_night = {}
    for w in cands:
        ov, night_start = _typical_overlap(w, utc_offset_s, typical)
        if not (min_hours < w.duration_h <= max_hours) or ov < min_overlap_hours:
            continue
        cur = by_night.get(night_start)
        cand = (w, ov)
        if cur is None or (w.duration_h, -w.onset_t) > (cur[0].duration_h, -cur[0].onset_t):
            by_night[night_start] = cand
    if not by_night:
        return []
    off = int(utc_offset_s * NS)
    if ref_t is None:
        ref_t = min(w.onset_t for w, _ in by_night.values())
    ref_day = (ref_t + off - 12 * HOUR_NS) // DAY_NS
    out = []
    for night_start in sorted(by_night):
        w, ov = by_night[night_start]
        idx = int((night_start - 12 * HOUR_NS) // DAY_NS - ref_day)
        out.append(SleepWindow(w.onset_t, w.wake_t, idx, ov))
    return out


def drop_nonwear_windows(windows, sig, max_minutes=30.0):
    """Remove windows whose intersection with non-wear exceeds ``max_minutes``."""
    keep = []
    for w in windows:
        a = sig.index_at(w.onset_t)
        b = sig.index_at(w.wake_t)
        nonworn = int(np.count_nonzero(~sig.wear_mask[a:b]))
        if nonworn / sig.rate <= max_minutes * 60.0:
            keep.append(w)
    return keep


def binarize(windows, start_t, end_t, epoch_s=30.0):
    """Sleep (1) / wake (0) labels per epoch over ``[start_t, end_t)``."""
    ep = int(epoch_s * NS)
    n = int((end_t - start_t) // ep)
    mids = start_t + np.arange(n, dtype=np.int64) * ep + ep // 2
    lab = np.zeros(n, dtype=np.int8)
    for w in windows:
        lab[(mids >= w.onset_t) & (mids < w.wake_t)] = 1
    return lab


def _minutes_of_day(t_ns, utc_offset_s):
    """Minutes since the preceding local noon (keeps nights contiguous)."""
    off = int(utc_offset_s * NS)
    return (((t_ns + off) - 12 * HOUR_NS) % DAY_NS) / (60 * NS)


def sleep_agreement(pred, ref, span=None, epoch_s=30.0, utc_offset_s=0.0):
    """c-statistic of 30-s sleep/wake labels, onset/wake MAE (min) and Pearson r of times."""
    if not pred or not ref:
        raise NoOverlap("both window lists must be non-empty")
    if span is None:
        span = (min(w.onset_t for w in pred + ref), max(w.wake_t for w in pred + ref))
    yp = binarize(pred, span[0], span[1], epoch_s)
    yr = binarize(ref, span[0], span[1], epoch_s)
    c = auroc(yp.astype(float), yr) if 0 < yr.sum() < len(yr) else float("nan")
    pairs = []
    for r in ref:
        best, best_ov = None, 0
        for p in pred:
            ov = min(p.wake_t, r.wake_t) - max(p.onset_t, r.onset_t)
            if ov > best_ov:
                best, best_ov = p, ov
        if best is not None:
            pairs.append((best, r))
    if not pairs:
        raise NoOverlap("no predicted window overlaps a reference window")
    on_err = [abs(p.onset_t - r.onset_t) / (60 * NS) for p, r in pairs]
    wk_err = [abs(p.wake_t - r.wake_t) / (60 * NS) for p, r in pairs]
    pt = np.array([_minutes_of_day(p.onset_t, utc_offset_s) for p, _ in pairs]
                  + [_minutes_of_day(p.wake_t, utc_offset_s) for p, _ in pairs])
    rt = np.array([_minutes_of_day(r.onset_t, utc_offset_s) for _, r in pairs]
                  + [_minutes_of_day(r.wake_t, utc_offset_s) for _, r in pairs])
    r_val = float(np.corrcoef(pt, rt)[0, 1]) if len(pt) > 2 and pt.std() > 0 and rt.std() > 0 else float("nan")
    return {
        "c_statistic": c,
        "onset_mae_min": float(np.mean(on_err)),
        "wake_mae_min": float(np.mean(wk_err)),
        "pearson_r": r_val,
        "n_matched": len(pairs),
    }
