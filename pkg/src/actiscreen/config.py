"""Run configuration: an INI file of stage knobs, validated against fixed ranges.

Example::

    [synth]
    n_rbd = 20
    n_hc = 20

    [train]
    budget = 30

Sections are ``synth``, ``preprocess``, ``sleep``, ``bouts``, ``features``,
``train`` and ``evaluate``. Unknown sections or keys and out-of-range
values raise :class:`ConfigInvalid`. ``--set section.key=value`` on the
command line overrides the file.
"""

import configparser
import math
from dataclasses import dataclass, field, replace

from .errors import ConfigInvalid
from .model import TrainConfig
from .process import ProcessConfig
from .synth import SynthConfig

def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# (section, key) -> (type, lo, hi, target, attribute). ``target`` names the
# dataclass the value lands in; lo/hi are inclusive, None for non-numeric.
KNOBS = {
    ("synth", "n_rbd"): (int, 0, 100000, "synth", "n_rbd"),
    ("synth", "n_hc"): (int, 0, 100000, "synth", "n_hc"),
    ("synth", "nights"): (int, 1, 60, "synth", "nights"),
    ("synth", "rate"): (float, 40.000001, 1000, "synth", "rate"),
    ("synth", "dynamic_range"): (float, 2, 16, "synth", "dynamic_range"),
    ("synth", "noise_mg"): (float, 0, 50, "synth", "noise_mg"),
    ("synth", "start_unix_s"): (int, 0, 2**40, "synth", "start_unix_s"),
    ("synth", "onset_h"): (float, 0, 24, "synth", "onset_h"),
    ("synth", "wake_h"): (float, 0, 24, "synth", "wake_h"),
    ("synth", "timing_jitter_min"): (float, 0, 120, "synth", "timing_jitter_min"),
    ("synth", "hc_bouts_per_h"): (float, 1e-3, 200, "synth", "hc_bouts_per_h"),
    ("synth", "rbd_bouts_per_h"): (float, 1e-3, 200, "synth", "rbd_bouts_per_h"),
    ("synth", "hc_duration_s"): (float, 0.5, 50, "synth", "hc_duration_s"),
    ("synth", "rbd_duration_s"): (float, 0.5, 50, "synth", "rbd_duration_s"),
    ("synth", "duration_sigma"): (float, 1e-3, 3, "synth", "duration_sigma"),
    ("synth", "hc_amplitude_g"): (float, 1e-3, 4, "synth", "hc_amplitude_g"),
    ("synth", "rbd_amplitude_g"): (float, 1e-3, 4, "synth", "rbd_amplitude_g"),
    ("synth", "rbd_power_sigma"): (float, 1e-3, 3, "synth", "rbd_power_sigma"),
    ("synth", "rbd_jerky_frac"): (float, 0, 1, "synth", "rbd_jerky_frac"),
    ("synth", "rbd_rem_frac"): (float, 0, 1, "synth", "rbd_rem_frac"),
    ("synth", "expressive_frac"): (float, 0, 1, "synth", "expressive_frac"),
    ("synth", "patient_sd"): (float, 0, 2, "synth", "patient_sd"),
    ("synth", "max_gap_min"): (float, 1, 240, "synth", "max_gap_min"),
    ("synth", "gain_error"): (float, 0, 0.4, "synth", "gain_error"),
    ("synth", "offset_error_mg"): (float, 0, 400, "synth", "offset_error_mg"),
    ("synth", "device_offset_mg"): (float, -400, 400, "synth", "device_offset_mg"),
    ("synth", "drift_ppm"): (float, -1000, 1000, "synth", "drift_ppm"),
    ("synth", "nonwear"): (_bool, None, None, "synth", "nonwear"),
    ("synth", "dataset"): (str, None, None, "synth", "dataset"),
    ("preprocess", "target_rate"): (float, 0, 1000, "process", "target_rate"),
    ("preprocess", "utc_offset_h"): (float, -14, 14, "process", "utc_offset_s"),
    ("preprocess", "calibrate"): (_bool, None, None, "process", "calibrate"),
    ("preprocess", "nonwear_minutes"): (float, 1, 1440, "process", "nonwear_minutes"),
    ("preprocess", "band_lo_hz"): (float, 0.01, 100, "process", "band"),
    ("preprocess", "band_hi_hz"): (float, 0.02, 500, "process", "band"),
    ("preprocess", "filter_order"): (int, 1, 10, "process", "filter_order"),
    ("sleep", "percentile"): (float, 0, 100, "process", "sleep_percentile"),
    ("sleep", "multiplier"): (float, 1e-3, 1000, "process", "sleep_multiplier"),
    ("sleep", "clamp_lo"): (float, 0, 90, "process", "sleep_clamp"),
    ("sleep", "clamp_hi"): (float, 0, 90, "process", "sleep_clamp"),
    ("sleep", "min_block_min"): (float, 1, 600, "process", "sleep_min_block_min"),
    ("sleep", "max_gap_min"): (float, 0, 600, "process", "sleep_max_gap_min"),
    ("sleep", "min_hours"): (float, 0, 24, "process", "window_min_hours"),
    ("sleep", "min_overlap_hours"): (float, 0, 24, "process", "window_min_overlap_hours"),
    ("sleep", "max_nonwear_min"): (float, 0, 1440, "process", "window_max_nonwear_min"),
    ("bouts", "floor_g"): (float, 0, 8, "process", "bout_floor_g"),
    ("bouts", "max_gap_s"): (float, 0, 60, "process", "bout_max_gap_s"),
    ("bouts", "min_dur_s"): (float, 0, 600, "process", "bout_min_dur_s"),
    ("bouts", "max_dur_s"): (float, 0, 3600, "process", "bout_max_dur_s"),
    ("features", "nfft_min"): (int, 8, 65536, "features", "nfft_min"),
    ("features", "spectral_min_s"): (float, 0, 60, "features", "spectral_min_s"),
    ("features", "ac_max_lag_s"): (float, 0.01, 600, "features", "ac_max_lag_s"),
    ("features", "sampen_m"): (int, 1, 10, "features", "sampen_m"),
    ("features", "sampen_r"): (float, 1e-3, 5, "features", "sampen_r"),
    ("features", "hurst_min_window"): (int, 4, 4096, "features", "hurst_min_window"),
    ("features", "peak_prominence"): (float, 0, 10, "features", "peak_prominence"),
    ("features", "hopkins_resamples"): (int, 1, 10000, "features", "hopkins_resamples"),
    ("features", "hopkins_max_probes"): (int, 1, 10000, "features", "hopkins_max_probes"),
    ("features", "kde_grid"): (int, 16, 65536, "features", "kde_grid"),
    ("train", "budget"): (int, 10, 100000, "train", "budget"),
    ("train", "inner_folds"): (int, 2, 50, "train", "inner_folds"),
    ("train", "patience"): (int, 1, 100000, "train", "patience"),
    ("train", "early_stopping_folds"): (int, 0, 50, "train", "early_stopping_folds"),
    ("train", "platt_folds"): (int, 0, 50, "train", "platt_folds"),
    ("train", "smote_k"): (int, 1, 100, "train", "smote_k"),
    ("train", "rank_method"): (str, None, None, "train", "rank_method"),
    ("evaluate", "outer_folds"): (int, 2, 50, "evaluate", "outer_folds"),
    ("evaluate", "repeats"): (int, 1, 100, "evaluate", "repeats"),
    ("evaluate", "bootstrap"): (int, 0, 1000000, "evaluate", "bootstrap"),
    ("evaluate", "ablation_ks"): (str, None, None, "evaluate", "ablation_ks"),
}

RANK_METHODS = ("ensemble", "mrmr", "shadow", "correlation")


@dataclass(frozen=True)
class EvalConfig:
    outer_folds: int = 5
    repeats: int = 5
    bootstrap: int = 2000
    ablation_ks: tuple = (1, 5, 10, 20, 35)


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    process: ProcessConfig = field(default_factory=ProcessConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self):
        out = {}
        for (sec, key), (_, _, _, target, attr) in KNOBS.items():
            out.setdefault(sec, {})[key] = _current(self, sec, key, target, attr)
        return out


def _current(cfg, sec, key, target, attr):
    if target == "features":
        return getattr(cfg.process.features, attr)
    obj = getattr(cfg, target)
    v = getattr(obj, attr)
    if key == "band_lo_hz" or key == "clamp_lo":
        return v[0]
    if key == "band_hi_hz" or key == "clamp_hi":
        return v[1]
    if key == "utc_offset_h":
        return v / 3600.0
    if key == "target_rate":
        return 0.0 if v is None else v
    if key == "ablation_ks":
        return ",".join(map(str, v))
    return v


def _parse(sec, key, raw):
    if (sec, key) not in KNOBS:
        raise ConfigInvalid(f"unknown config key {sec}.{key}")
    typ, lo, hi, _, _ = KNOBS[(sec, key)]
    try:
        if typ is int:
            f = float(raw)
            if f != int(f):
                raise ValueError("not an integer")
            v = int(f)
        else:
            v = typ(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{sec}.{key}: {exc}") from None
    if lo is not None and not (lo <= v <= hi):
        raise ConfigInvalid(f"{sec}.{key}={v} outside [{lo}, {hi}]")
    if typ is float and not math.isfinite(v):
        raise ConfigInvalid(f"{sec}.{key} must be finite")
    if (sec, key) == ("train", "rank_method") and v not in RANK_METHODS:
        raise ConfigInvalid(f"train.rank_method must be one of {RANK_METHODS}")
    if (sec, key) == ("evaluate", "ablation_ks"):
        try:
            v = tuple(int(k) for k in str(v).split(",") if k.strip())
        except ValueError:
            raise ConfigInvalid("evaluate.ablation_ks must be comma-separated integers") from None
        if not v or min(v) < 1:
            raise ConfigInvalid("evaluate.ablation_ks must list positive integers")
    return v


def _apply(cfg, values):
    parts = {"synth": {}, "process": {}, "features": {}, "train": {}, "evaluate": {}}
    band = list(cfg.process.band)
    clamp = list(cfg.process.sleep_clamp)
    for (sec, key), v in values.items():
        _, _, _, target, attr = KNOBS[(sec, key)]
        if key == "band_lo_hz":
            band[0] = v
        elif key == "band_hi_hz":
            band[1] = v
        elif key == "clamp_lo":
            clamp[0] = v
        elif key == "clamp_hi":
            clamp[1] = v
        elif key == "utc_offset_h":
            parts["process"]["utc_offset_s"] = v * 3600.0
        elif key == "target_rate":
            parts["process"]["target_rate"] = None if v == 0 else v
        else:
            parts[target][attr] = v
    parts["process"]["band"] = tuple(band)
    parts["process"]["sleep_clamp"] = tuple(clamp)
    if not band[0] < band[1]:
        raise ConfigInvalid("preprocess.band_lo_hz must be below band_hi_hz")
    if not clamp[0] < clamp[1]:
        raise ConfigInvalid("sleep.clamp_lo must be below clamp_hi")
    features = replace(cfg.process.features, **parts["features"])
    out = RunConfig(
        synth=replace(cfg.synth, **parts["synth"]),
        process=replace(cfg.process, features=features, **parts["process"]),
        train=replace(cfg.train, **parts["train"]),
        evaluate=replace(cfg.evaluate, **parts["evaluate"]),
    )
    try:
        out.synth.validate()
    except ValueError as exc:
        raise ConfigInvalid(f"synth: {exc}") from None
    return out


def parse_text(text):
    """Values of an INI text as ``{(section, key): value}``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid(f"unreadable config: {exc}") from None
    out = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            out[(sec, key)] = _parse(sec, key, raw)
    return out


def parse_overrides(items):
    """``["section.key=value", ...]`` as ``{(section, key): value}``."""
    out = {}
    for item in items or ():
        name, sep, raw = item.partition("=")
        sec, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigInvalid(f"override must look like section.key=value, got {item!r}")
        out[(sec, key)] = _parse(sec, key.strip(), raw.strip())
    return out


def load_config(path=None, overrides=()):
    """Defaults, then the file at ``path`` (if any), then the overrides."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
        values.update(parse_text(text))
    values.update(parse_overrides(overrides))
    return _apply(RunConfig(), values)


def dump_config(cfg):
    """INI text for ``cfg`` (every knob, current values)."""
    lines = []
    for sec, kv in cfg.to_dict().items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in kv.items())
        lines.append("")
    return "\n".join(lines)

