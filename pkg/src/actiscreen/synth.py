"""Synthetic multi-night wrist recordings with known sleep windows and bouts.

Each recording starts at local noon and spans ``nights`` noon-to-noon
days. Days carry colored-noise activity with frequent wrist re-orientation
and short still spells in random orientations. Nights are still apart
from posture changes and injected movement bouts:

* controls (HC): sparse, longer, smooth 1-2.5 Hz bouts;
* RBD-like: more frequent, shorter bouts clustered in periodic REM-like
  spells, a mix of smooth and broadband jerky bursts with heavy-tailed
  power. A fraction of RBD nights (``1 - expressive_frac``) is generated
  with control behaviour, so single nights are harder to classify than
  whole patients.

The effect sizes are chosen to make a desk-scale cohort separable. They
exercise the pipeline; they are not a model of the clinical condition.
"""

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal as sps

from .ingest import RawRecording, save_act1
from .signal import NS

HOUR = 3600.0
DAY = 24 * HOUR


@dataclass(frozen=True)
class SynthConfig:
    n_rbd: int = 40
    n_hc: int = 40
    nights: int = 7
    rate: float = 100.0
    dynamic_range: float = 8.0
    noise_mg: float = 3.0
    start_unix_s: int = 1704110400  # 2024-01-01 12:00 UTC
    onset_h: float = 23.0
    wake_h: float = 7.0
    timing_jitter_min: float = 30.0
    hc_bouts_per_h: float = 6.0
    rbd_bouts_per_h: float = 14.0
    hc_duration_s: float = 8.0
    rbd_duration_s: float = 3.0
    duration_sigma: float = 0.6
    hc_amplitude_g: float = 0.25
    rbd_amplitude_g: float = 0.3
    rbd_power_sigma: float = 0.8
    rbd_jerky_frac: float = 0.5
    rbd_rem_frac: float = 0.75
    expressive_frac: float = 0.7
    patient_sd: float = 0.25
    max_gap_min: float = 40.0
    gain_error: float = 0.0  # injected gains drawn from 1 +/- this
    offset_error_mg: float = 0.0  # injected offsets drawn from +/- this
    device_offset_mg: float = 0.0  # fixed offset added on every axis
    drift_ppm: float = 0.0
    nonwear: bool = False
    dataset: str = "synthetic"
    seed: int = 0

    def validate(self):
        positive = ("nights", "rate", "dynamic_range", "hc_bouts_per_h", "rbd_bouts_per_h", "hc_duration_s",
                    "rbd_duration_s", "duration_sigma", "hc_amplitude_g", "rbd_amplitude_g",
                    "rbd_power_sigma", "max_gap_min")
        for k in positive:
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        for k in ("noise_mg", "gain_error", "offset_error_mg", "patient_sd", "timing_jitter_min"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be non-negative")
        for k in ("rbd_jerky_frac", "rbd_rem_frac", "expressive_frac"):
            if not 0 <= getattr(self, k) <= 1:
                raise ValueError(f"{k} must lie in [0, 1]")
        if self.n_rbd < 0 or self.n_hc < 0:
            raise ValueError("patient counts must be non-negative")
        if self.rate <= 40.0:
            raise ValueError("rate must exceed 40 Hz for the 20 Hz band edge")
        return self


def patient_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0] >> 1)


def _unit(rng, k):
    v = rng.standard_normal((k, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _tukey(m, alpha=0.3):
    return sps.windows.tukey(m, alpha) if m > 1 else np.ones(m)


class _Night:
    """Bout plan for one night: (start_s, duration_s, kind, amplitude) relative to onset."""

    def __init__(self, rng, cfg, rbd_like, length_s, pmult):
        self.bouts = []
        if rbd_like:
            rate_h = cfg.rbd_bouts_per_h * pmult["rate"]
            n = rng.poisson(rate_h * length_s / HOUR)
            rem = self._rem_spells(rng, length_s)
            rem_len = sum(b - a for a, b in rem)
            starts = []
            for _ in range(n):
                if rem and rng.random() < cfg.rbd_rem_frac:
                    u = rng.random() * rem_len
                    for a, b in rem:
                        if u < b - a:
                            starts.append(a + u)
                            break
                        u -= b - a
                else:
                    starts.append(rng.random() * length_s)
            for s in starts:
                dur = cfg.rbd_duration_s * pmult["dur"] * math.exp(cfg.duration_sigma * rng.standard_normal())
                if rng.random() < cfg.rbd_jerky_frac:
                    amp = cfg.rbd_amplitude_g * math.exp(cfg.rbd_power_sigma * rng.standard_normal())
                    self.bouts.append((s, dur, "jerky", amp))
                else:
                    amp = cfg.hc_amplitude_g * math.exp(0.2 * rng.standard_normal())
                    self.bouts.append((s, dur, "smooth", amp))
        else:
            rate_h = cfg.hc_bouts_per_h * pmult["rate"]
            n = rng.poisson(rate_h * length_s / HOUR)
            for s in rng.random(n) * length_s:
                dur = cfg.hc_duration_s * pmult["dur"] * math.exp(cfg.duration_sigma * rng.standard_normal())
                amp = cfg.hc_amplitude_g * math.exp(0.2 * rng.standard_normal())
                self.bouts.append((s, dur, "smooth", amp))
        self._fill_gaps(rng, cfg, length_s)
        self.bouts = [(s, min(max(d, 0.7), 45.0), k, min(a, 2.0)) for s, d, k, a in self.bouts]
        self.bouts.sort()
        # keep bouts apart and inside the night
        kept, end = [], 60.0
        for s, d, k, a in self.bouts:
            if s >= end + 2.0 and s + d < length_s - 60.0:
                kept.append((s, d, k, a))
                end = s + d
        self.bouts = kept

    @staticmethod
    def _rem_spells(rng, length_s):
        spells = []
        t = rng.uniform(70, 100) * 60.0
        i = 0
        while t < length_s - 300:
            dur = min((10 + 6 * i) * 60.0 * rng.uniform(0.8, 1.2), length_s - 60 - t)
            spells.append((t, t + dur))
            t += rng.uniform(85, 100) * 60.0
            i += 1
        return spells

    def _fill_gaps(self, rng, cfg, length_s):
        cap = cfg.max_gap_min * 60.0
        starts = sorted(s for s, *_ in self.bouts)
        edges = [0.0] + starts + [length_s]
        for a, b in zip(edges[:-1], edges[1:]):
            t = a
            while b - t > cap:
                t += rng.uniform(0.4, 0.9) * cap
                if t < b:
                    dur = cfg.hc_duration_s * math.exp(cfg.duration_sigma * rng.standard_normal())
                    self.bouts.append((t, dur, "smooth", cfg.hc_amplitude_g * math.exp(0.2 * rng.standard_normal())))


def _bout_wave(rng, kind, m, rate, amp, jerky_sos):
    env = _tukey(m)
    if kind == "smooth":
        f = rng.uniform(1.0, 2.5)
        t = np.arange(m) / rate
        w = amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) * env
        return w[:, None] * _unit(rng, 1)[0]
    noise = sps.sosfilt(jerky_sos, rng.standard_normal((m + 64, 3)), axis=0)[64:]
    noise /= max(float(np.sqrt(np.mean(noise**2))), 1e-12)
    return amp / math.sqrt(3.0) * noise * env[:, None]


def _orientation_track(rng, m, rate, seg_lo, seg_hi):
    """Linearly interpolated random orientations with knots every seg_lo..seg_hi seconds."""
    knots = [0]
    while knots[-1] < m - 1:
        knots.append(min(m - 1, knots[-1] + int(rng.uniform(seg_lo, seg_hi) * rate)))
    knots = np.array(knots)
    dirs = _unit(rng, len(knots))
    idx = np.arange(m)
    g = np.column_stack([np.interp(idx, knots, dirs[:, a]) for a in range(3)])
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-6)
    return g


def _active_segment(rng, m, rate, level):
    """Daytime movement: wandering orientation, colored noise, short still spells."""
    g = _orientation_track(rng, m, rate, 5.0, 40.0)
    white = rng.standard_normal((m, 3))
    a = math.exp(-2 * math.pi * 2.0 / rate)
    dyn = sps.lfilter([1 - a], [1, -a], white, axis=0) * (level / math.sqrt((1 - a) / (1 + a)))
    blk = int(60 * rate)
    nb = -(-m // blk)
    env = np.repeat(np.exp(0.5 * rng.standard_normal(nb)), blk)[:m]
    dyn *= env[:, None]
    # still spells (2-10 min) roughly twice an hour
    t = rng.uniform(5, 30) * 60 * rate
    while t < m:
        a0 = int(t)
        a1 = min(m, a0 + int(rng.uniform(2, 10) * 60 * rate))
        g[a0:a1] = _unit(rng, 1)[0]
        dyn[a0:a1] = 0.0
        t = a1 + rng.uniform(15, 45) * 60 * rate
    return g + dyn


def _night_segment(rng, m, rate, plan, jerky_sos):
    """Still postures with a few turns plus the planned bouts; returns (acc, bout sample ranges)."""
    n_turns = int(rng.integers(2, 7))
    turn_at = np.sort(rng.integers(int(10 * 60 * rate), max(int(10 * 60 * rate) + 1, m - int(10 * 60 * rate)),
                                   n_turns))
    dirs = _unit(rng, n_turns + 1)
    g = np.empty((m, 3))
    prev = 0
    for i, t in enumerate(list(turn_at) + [m]):
        g[prev:t] = dirs[i]
        prev = t
    tw = int(3 * rate)
    for i, t in enumerate(turn_at):
        a0, a1 = max(0, t - tw // 2), min(m, t + tw // 2)
        w = np.linspace(0, 1, a1 - a0)[:, None]
        mix = (1 - w) * dirs[i] + w * dirs[i + 1]
        g[a0:a1] = mix / np.linalg.norm(mix, axis=1, keepdims=True)
    ranges = []
    for s, d, kind, amp in plan.bouts:
        a0 = int(round(s * rate))
        k = int(round(d * rate))
        if a0 + k >= m:
            continue
        g[a0 : a0 + k] += _bout_wave(rng, kind, k, rate, amp, jerky_sos)
        ranges.append((a0, a0 + k, kind))
    return g, ranges


def generate_recording(cfg, cls, seed, patient_id="P000"):
    """One recording and its ground truth.

    ``cls`` is ``"RBD"`` or ``"HC"`` (or 1/0). Returns ``(RawRecording, truth)``
    where ``truth`` is JSON-serialisable.
    """
    cfg.validate()
    rbd = cls in ("RBD", 1, True)
    rng = np.random.default_rng(seed)
    rate = float(np.float32(cfg.rate))
    n_total = int(round((cfg.nights * DAY + 60.0) * rate))
    pmult = {
        "rate": math.exp(cfg.patient_sd * rng.standard_normal()),
        "dur": math.exp(cfg.patient_sd * rng.standard_normal()),
    }
    level = 0.08 * math.exp(cfg.patient_sd * rng.standard_normal())
    jerky_sos = sps.butter(4, [2.0, min(15.0, 0.45 * rate)], btype="bandpass", fs=rate, output="sos")
    gain = 1.0 + cfg.gain_error * rng.uniform(-1, 1, 3)
    offset = cfg.offset_error_mg / 1000.0 * rng.uniform(-1, 1, 3) + cfg.device_offset_mg / 1000.0
    noise = cfg.noise_mg / 1000.0
    codes = np.empty((n_total, 3), dtype=np.int16)
    scale = float(np.float32(cfg.dynamic_range)) / 32768.0
    windows, bouts, nonwear = [], [], []
    nonwear_day = int(rng.integers(0, cfg.nights)) if cfg.nonwear else -1
    for d in range(cfg.nights + 1):
        a = int(round(d * DAY * rate))
        b = min(n_total, int(round((d + 1) * DAY * rate)))
        if a >= b:
            break
        m = b - a
        chunk = np.empty((m, 3))
        if d < cfg.nights:
            jit = cfg.timing_jitter_min * 60.0
            on_s = (cfg.onset_h - 12.0) % 24 * HOUR + rng.uniform(-jit, jit)
            off_s = (cfg.wake_h - 12.0) % 24 * HOUR + rng.uniform(-jit, jit)
            i_on, i_off = int(round(on_s * rate)), int(round(off_s * rate))
            expressive = bool(rbd and rng.random() < cfg.expressive_frac)
            plan = _Night(rng, cfg, expressive, (i_off - i_on) / rate, pmult)
            chunk[:i_on] = _active_segment(rng, i_on, rate, level)
            night, ranges = _night_segment(rng, i_off - i_on, rate, plan, jerky_sos)
            chunk[i_on:i_off] = night
            chunk[i_off:] = _active_segment(rng, m - i_off, rate, level)
            if d == nonwear_day:
                s0 = int(rng.uniform(1.0, 4.0) * HOUR * rate)
                s1 = s0 + int(rng.uniform(1.5, 3.0) * HOUR * rate)
                chunk[s0:s1] = (0.0, 0.0, 1.0)
                nonwear.append([a + s0, a + s1])
            windows.append({"night": d, "onset_idx": a + i_on, "wake_idx": a + i_off, "expressive": expressive})
            bouts.append([[a + i_on + r0, a + i_on + r1, kind] for r0, r1, kind in ranges])
        else:
            chunk[:] = _active_segment(rng, m, rate, level)
        chunk += noise * rng.standard_normal((m, 3))
        chunk = chunk * gain + offset
        np.clip(np.rint(chunk / scale), -32768, 32767, out=chunk)
        codes[a:b] = chunk
        del chunk
    start_ns = int(cfg.start_unix_s) * NS
    period = NS / rate * (1.0 + cfg.drift_ppm * 1e-6)
    t = start_ns + np.rint(np.arange(n_total, dtype=np.float64) * period).astype(np.int64)
    rec = RawRecording(patient_id, rate, cfg.dynamic_range, t, codes)

    def t_of(i):
        return int(start_ns + round(i * period))

    truth = {
        "patient_id": patient_id,
        "class": "RBD" if rbd else "HC",
        "label": int(rbd),
        "dataset": cfg.dataset,
        "seed": int(seed),
        "rate": rate,
        "start_t": start_ns,
        "utc_offset_s": 0,
        "windows": [
            {"night": w["night"], "onset_t": t_of(w["onset_idx"]), "wake_t": t_of(w["wake_idx"]),
             "expressive": w["expressive"]}
            for w in windows
        ],
        "bouts": [[[t_of(s), t_of(e), k] for s, e, k in night] for night in bouts],
        "nonwear": [[t_of(s), t_of(e)] for s, e in nonwear],
        "calibration": {"gain": gain.tolist(), "offset": offset.tolist()},
        "drift_ppm": cfg.drift_ppm,
    }
    return rec, truth


def cohort_plan(cfg):
    """(patient_id, class, seed) for every patient of the cohort."""
    out = []
    for i in range(cfg.n_rbd + cfg.n_hc):
        cls = "RBD" if i < cfg.n_rbd else "HC"
        out.append((f"{cfg.dataset}-{i:03d}", cls, patient_seed(cfg.seed, i)))
    return out


def _write_one(args):
    cfg, pid, cls, seed, out_dir = args
    rec, truth = generate_recording(cfg, cls, seed, pid)
    save_act1(rec, os.path.join(out_dir, f"{pid}.act1"))
    with open(os.path.join(out_dir, f"{pid}.truth.json"), "w") as fh:
        json.dump(truth, fh, sort_keys=True)
    return pid


def write_cohort(cfg, out_dir, jobs=1):
    """Generate the cohort into ``out_dir`` (ACT1 files, truth sidecars, manifest.json)."""
    from .evaluation.cv import parallel_map

    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    plan = cohort_plan(cfg)
    parallel_map(_write_one, [(cfg, pid, cls, seed, out_dir) for pid, cls, seed in plan], jobs)
    manifest = {
        "config": asdict(cfg),
        "patients": [
            {"id": pid, "label": int(cls == "RBD"), "class": cls, "dataset": cfg.dataset,
             "files": [f"{pid}.act1"], "artifacts": {"truth": f"{pid}.truth.json"}}
            for pid, cls, _ in plan
        ],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return manifest


