"""Recording-level processing: raw samples to night feature vectors.

The stages mirror the CLI: resample and calibrate, non-wear, z-angle and
sleep windows, band-pass, bouts, features. Arrays are modified in place
where possible so a week at 100 Hz fits in a few GB.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .bouts import detect_bouts
from .errors import EmptyWindow, InsufficientData
from .features import FeatureConfig, extract_night
from .signal import UniformSignal, CalibrationParams, apply_calibration, autocalibrate, bandpass, detect_nonwear, resample, with_wear
from .sleep import detect_spt_windows, drop_nonwear_windows, select_analysis_windows, z_angle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProcessConfig:
    target_rate: float = None  # None keeps the nominal rate
    utc_offset_s: float = 0.0
    calibrate: bool = True
    nonwear_minutes: float = 60.0
    band: tuple = (0.8, 20.0)
    filter_order: int = 4
    sleep_percentile: float = 10.0
    sleep_multiplier: float = 15.0
    sleep_clamp: tuple = (0.13, 0.50)
    sleep_min_block_min: float = 30.0
    sleep_max_gap_min: float = 60.0
    window_min_hours: float = 4.0
    window_min_overlap_hours: float = 2.0
    window_max_nonwear_min: float = 30.0
    bout_floor_g: float = 0.1
    bout_max_gap_s: float = 1.0
    bout_min_dur_s: float = 0.5
    bout_max_dur_s: float = 50.0
    features: FeatureConfig = field(default_factory=FeatureConfig)


@dataclass(eq=False)
class WearTimeline:
    """Sample grid and wear mask without the acceleration data."""

    start_t: int
    rate: float
    wear_mask: np.ndarray

    def __len__(self):
        return len(self.wear_mask)

    index_at = UniformSignal.index_at

    @classmethod
    def from_segments(cls, start_t, rate, segments):
        return cls(int(start_t), float(rate), segments.mask())


@dataclass
class Preprocessed:
    """Calibrated, wear-masked (unfiltered) signal with what was learned on the way."""

    sig: object
    calibration: CalibrationParams
    wear: object
    zangle: object


def preprocess(rec, cfg=ProcessConfig(), calibration=None, wear=None, zangle=True):
    """Resample, calibrate, mark non-wear and compute the z-angle.

    Passing ``calibration`` and ``wear`` from an earlier run re-applies them
    instead of estimating again.
    """
    sig = resample(rec, cfg.target_rate)
    if calibration is not None:
        apply_calibration(sig, calibration, inplace=True)
    elif cfg.calibrate:
        sig, calibration = autocalibrate(sig, inplace=True)
    else:
        calibration = CalibrationParams()
    if wear is None:
        wear = detect_nonwear(sig, min_minutes=cfg.nonwear_minutes)
    sig = with_wear(sig, wear)
    return Preprocessed(sig, calibration, wear, z_angle(sig) if zangle else None)


def windows_from_zangle(z, timeline, cfg=ProcessConfig()):
    """Analysis windows (one per night at most) from a z-angle series.

    ``timeline`` supplies the wear mask on the sample grid (a signal or
    :class:`WearTimeline`).
    """
    try:
        cands = detect_spt_windows(z, utc_offset_s=cfg.utc_offset_s, percentile=cfg.sleep_percentile,
                                   multiplier=cfg.sleep_multiplier, clamp=tuple(cfg.sleep_clamp),
                                   min_block_min=cfg.sleep_min_block_min, max_gap_min=cfg.sleep_max_gap_min)
    except InsufficientData as exc:
        log.warning("no sleep windows: %s", exc)
        return []
    wins = select_analysis_windows(cands, utc_offset_s=cfg.utc_offset_s, min_hours=cfg.window_min_hours,
                                   min_overlap_hours=cfg.window_min_overlap_hours, ref_t=timeline.start_t)
    return drop_nonwear_windows(wins, timeline, cfg.window_max_nonwear_min)


def sleep_windows(pre, cfg=ProcessConfig()):
    return windows_from_zangle(pre.zangle, pre.sig, cfg)


def night_features(sig, windows, patient_id, label, seed, cfg=ProcessConfig(), dataset=""):
    """Bouts and feature vectors per window of the band-passed ``sig``."""
    nights, bouts_out = [], []
    for win in windows:
        try:
            bouts = detect_bouts(sig, win, floor=cfg.bout_floor_g, max_gap_s=cfg.bout_max_gap_s,
                                 min_dur_s=cfg.bout_min_dur_s, max_dur_s=cfg.bout_max_dur_s)
        except EmptyWindow:
            bouts = []
        bouts_out.append(bouts)
        nights.append(extract_night(sig, win, bouts, patient_id, label, [int(seed), win.night_index % 2**32],
                                    cfg.features, dataset))
    return nights, bouts_out


def process_recording(rec, patient_id, label, seed=0, cfg=ProcessConfig(), dataset="", windows=None,
                      calibration=None, wear=None):
    """Full path from a raw recording to night feature vectors.

    ``windows``, ``calibration`` and ``wear`` reuse earlier results instead
    of re-estimating them. Returns ``(nights, info)``.
    """
    pre = preprocess(rec, cfg, calibration, wear, zangle=windows is None)
    del rec
    if windows is None:
        windows = sleep_windows(pre, cfg)
    sig = pre.sig
    pre.sig = None
    pre.zangle = None
    bandpass(sig, cfg.band[0], cfg.band[1], cfg.filter_order, inplace=True)
    nights, bouts = night_features(sig, windows, patient_id, label, seed, cfg, dataset)
    info = {
        "calibration": pre.calibration.to_dict(),
        "wear": pre.wear.to_list(),
        "windows": [w.to_dict() for w in windows],
        "n_bouts": [len(b) for b in bouts],
    }
    return nights, info


def recording_seed(seed, patient_id):
    """Per-recording seed derived from the run seed and the patient id."""
    return int(np.random.SeedSequence([int(seed), *patient_id.encode()]).generate_state(1, np.uint64)[0] >> 1)
