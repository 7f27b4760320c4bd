"""Activity bouts inside a sleep window by thresholding the acceleration norm."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow
from .signal import runs

MIN_THRESHOLD_G = 0.1


@dataclass(frozen=True)
class ActivityBout:
    night_index: int
    start_idx: int  # inclusive, sample index into the signal
    end_idx: int  # exclusive
    rate: float

    @property
    def n_samples(self):
        return self.end_idx - self.start_idx

    @property
    def duration(self):
        return self.n_samples / self.rate

    @property
    def mid_idx(self):
        return 0.5 * (self.start_idx + self.end_idx)


def bout_threshold(mag, wear=None, floor=MIN_THRESHOLD_G):
    """``max(mean + std, floor)`` of the norm over worn samples (population std)."""
    m = mag if wear is None else mag[wear]
    if m.size == 0:
        raise EmptyWindow("no worn samples in window")
    return max(float(m.mean() + m.std()), floor)


def group_active(active, rate, max_gap_s=1.0, min_dur_s=0.5, max_dur_s=50.0):
    """Runs of ``active`` merged across gaps shorter than ``max_gap_s``, then duration-filtered.

    Returns (starts, ends) sample indices, end exclusive.
    """
    starts, ends = runs(active)
    if starts.size == 0:
        return starts, ends
    gaps = (starts[1:] - ends[:-1]) / rate
    new_group = np.concatenate(([True], gaps >= max_gap_s))
    gid = np.cumsum(new_group) - 1
    s = starts[new_group]
    e = np.zeros(len(s), dtype=ends.dtype)
    np.maximum.at(e, gid, ends)
    dur = (e - s) / rate
    keep = (dur >= min_dur_s) & (dur <= max_dur_s)
    return s[keep], e[keep]


def detect_bouts(sig, win, *, floor=MIN_THRESHOLD_G, max_gap_s=1.0, min_dur_s=0.5, max_dur_s=50.0):
    """Bouts of the band-passed ``sig`` inside sleep window ``win``.

    The threshold uses worn samples of the window only, and non-worn samples
    are never active. Groups merge first, then the duration limits apply.
    """
    a = sig.index_at(win.onset_t)
    b = sig.index_at(win.wake_t)
    if b <= a:
        raise EmptyWindow("sleep window contains no samples")
    mag = np.sqrt(sig.x[a:b] ** 2 + sig.y[a:b] ** 2 + sig.z[a:b] ** 2)
    wear = sig.wear_mask[a:b]
    theta = bout_threshold(mag, wear, floor)
    active = (mag > theta) & wear
    s, e = group_active(active, sig.rate, max_gap_s, min_dur_s, max_dur_s)
    return [ActivityBout(win.night_index, int(i) + a, int(j) + a, sig.rate) for i, j in zip(s, e)]
