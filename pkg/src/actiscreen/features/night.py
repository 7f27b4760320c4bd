"""Night-level feature vectors: bout aggregation, global features, registry and I/O."""

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.stats import gaussian_kde

from ..errors import FewerThanThreeBouts, TooShort, TooShortForSpectrum
from . import local

NAN = float("nan")
AXES = ("x", "y", "z")
AGG_STATS = ("mean", "std", "skew", "kurt", "mad", "iqr", "p10", "p90")
DURATION_EXTRA = ("median", "q25", "q75")

_DIST = ("mean", "std", "skew", "kurt") + tuple(f"q{q}" for q in local.QUANTILES)
_AC = ("ac_max", "ac_max_lag", "ac_min", "ac_min_lag", "ac_first_min_lag", "ac_zero_cross")
_SPECTRAL = (
    ("f1", "f2", "f3")
    + tuple(f"asd_{f}hz" for f in local.ASD_FREQS)
    + ("asd_f1", "asd_f2", "asd_f3", "asd_sum", "spectral_entropy")
)
_PEAKS = ("peaks_per_sec", "prom_mean", "prom_min", "prom_max")
_NONLIN = ("sampen", "hurst_rs")
_POINCARE = ("sd1", "sd2", "poincare_area")


def _with_axes(names):
    return tuple(names) + tuple(f"{n}_{a}" for a in AXES for n in names)


LOCAL_FEATURES = (
    _with_axes(_DIST)
    + ("sma", "power", "rms")
    + tuple(f"{n}_{a}" for a in AXES for n in ("sma", "power", "rms"))
    + _SPECTRAL
    + _with_axes(_AC)
    + _PEAKS
    + _with_axes(_NONLIN)
    + _POINCARE
    + ("duration",)
)
GLOBAL_FEATURES = (
    "hopkins",
    "kde_peaks",
    "kde_prom_mean",
    "kde_prom_max",
    "n_moves",
    "moves_per_hour",
) + tuple(f"iei__{s}" for s in AGG_STATS)
NIGHT_FEATURES = (
    tuple(f"{f}__{s}" for f in LOCAL_FEATURES for s in AGG_STATS)
    + tuple(f"duration__{s}" for s in DURATION_EXTRA)
    + GLOBAL_FEATURES
)


@dataclass(frozen=True)
class FeatureConfig:
    """Estimator choices for the features; part of the registry version."""

    nfft_min: int = 256
    spectral_min_s: float = 1.0
    ac_max_lag_s: float = 10.0
    sampen_m: int = 2
    sampen_r: float = 0.2
    hurst_min_window: int = 16
    peak_prominence: float = 0.05
    hopkins_resamples: int = 50
    hopkins_max_probes: int = 20
    kde_grid: int = 512


def registry_version(cfg=FeatureConfig()):
    h = hashlib.sha256()
    h.update("\n".join(NIGHT_FEATURES).encode())
    h.update(json.dumps(asdict(cfg), sort_keys=True).encode())
    return h.hexdigest()[:16]


@dataclass
class BoutFeatures:
    values: dict
    missing: frozenset = frozenset()

    @classmethod
    def from_raw(cls, raw):
        """Non-finite values become a placeholder plus a missing flag.

        The placeholder is 0, except 0.5 for the Hurst exponent (no memory).
        """
        miss = frozenset(k for k, v in raw.items() if not math.isfinite(v))
        return cls({k: (_placeholder(k) if k in miss else float(v)) for k, v in raw.items()}, miss)


def _placeholder(key):
    return 0.5 if key.startswith("hurst_rs") else 0.0


def bout_features(x, y, z, rate, cfg=FeatureConfig()):
    """All local features for one bout given its band-passed axis samples."""
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    mag = np.sqrt(x * x + y * y + z * z)
    chans = (("", mag), ("_x", x), ("_y", y), ("_z", z))
    raw = {}
    for suf, v in chans:
        for k, val in local.distributional(v).items():
            raw[k + suf] = val
    raw.update(local.energy(x, y, z))
    try:
        raw.update(local.spectral_features(mag, rate, cfg.nfft_min, cfg.spectral_min_s))
    except TooShortForSpectrum:
        raw.update(dict.fromkeys(_SPECTRAL, NAN))
    for suf, v in chans:
        for k, val in local.autocorr_features(v, rate, cfg.ac_max_lag_s).items():
            raw[k + suf] = val
        try:
            raw["sampen" + suf] = local.sample_entropy(v, cfg.sampen_m, cfg.sampen_r)[0]
        except TooShort:
            raw["sampen" + suf] = NAN
        try:
            raw["hurst_rs" + suf] = local.hurst_rs(v, cfg.hurst_min_window)
        except TooShort:
            raw["hurst_rs" + suf] = NAN
    raw.update(local.peak_features(mag, rate, cfg.peak_prominence))
    raw.update(local.poincare(mag))
    raw["duration"] = mag.size / rate
    return BoutFeatures.from_raw({k: raw[k] for k in LOCAL_FEATURES})


def summary_stats(values):
    """The eight aggregation statistics; ``nan`` where undefined.

    Values are sorted first so the result does not depend on input order.
    Skew and kurtosis are population (biased) moments; mad is the median
    absolute deviation from the median; quantiles interpolate linearly.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return dict.fromkeys(AGG_STATS, NAN)
    mu, sd, sk, ku = local._moments(v)
    med = float(np.median(v))
    q10, q25, q75, q90 = np.percentile(v, (10, 25, 75, 90))
    return {
        "mean": mu,
        "std": sd,
        "skew": sk,
        "kurt": ku,
        "mad": float(np.median(np.abs(v - med))),
        "iqr": float(q75 - q25),
        "p10": float(q10),
        "p90": float(q90),
    }


def aggregate_night(bouts):
    """Per-feature statistics over the bouts of one night (missing bout values skipped)."""
    out = {}
    for f in LOCAL_FEATURES:
        vals = [b.values[f] for b in bouts if f not in b.missing]
        for s, v in summary_stats(vals).items():
            out[f"{f}__{s}"] = v
    durs = np.array([b.values["duration"] for b in bouts], dtype=np.float64)
    if durs.size:
        q25, med, q75 = np.percentile(np.sort(durs), (25, 50, 75))
        out.update({"duration__median": float(med), "duration__q25": float(q25), "duration__q75": float(q75)})
    else:
        out.update(dict.fromkeys(("duration__median", "duration__q25", "duration__q75"), NAN))
    return out


def hopkins(points, lo, hi, rng, n_resamples=50, max_probes=20):
    """1-D Hopkins statistic of ``points`` against a uniform reference on [lo, hi].

    ~0.5 for uniformly scattered points, towards 1 for clustered ones.
    """
    x = np.sort(np.asarray(points, dtype=np.float64))
    n = x.size
    if n < 3:
        raise FewerThanThreeBouts(f"Hopkins statistic needs >= 3 points, got {n}")
    m = max(1, min(max_probes, int(0.1 * n)))
    hs = np.empty(n_resamples)
    for r in range(n_resamples):
        u = rng.uniform(lo, hi, m)
        j = np.clip(np.searchsorted(x, u), 1, n - 1)
        ud = np.minimum(np.abs(u - x[j - 1]), np.abs(x[j] - u))
        k = rng.choice(n, m, replace=False)
        left = np.where(k > 0, x[k] - x[np.maximum(k - 1, 0)], np.inf)
        right = np.where(k < n - 1, x[np.minimum(k + 1, n - 1)] - x[k], np.inf)
        wd = np.minimum(left, right)
        su, sw = ud.sum(), wd.sum()
        hs[r] = su / (su + sw) if su + sw > 0 else 0.5
    return float(hs.mean())


def kde_peaks(points, lo, hi, grid=512):
    """Local maxima of a Silverman-bandwidth Gaussian KDE over [lo, hi].

    Returns (count, prominences); density is per unit of ``points``.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.size < 3 or np.ptp(x) == 0:
        raise FewerThanThreeBouts("KDE needs >= 3 distinct points")
    kde = gaussian_kde(x, bw_method="silverman")
    g = np.linspace(lo, hi, grid)
    dens = kde(g)
    idx, props = sps.find_peaks(np.concatenate(([0.0], dens, [0.0])), prominence=0)
    return int(idx.size), props["prominences"]


def global_features(mid_times_s, window_s, rng, cfg=FeatureConfig()):
    """Night-wide features from bout midpoints (seconds since window onset)."""
    t = np.sort(np.asarray(mid_times_s, dtype=np.float64))
    hours = window_s / 3600.0
    out = {"n_moves": float(t.size), "moves_per_hour": t.size / hours}
    try:
        out["hopkins"] = hopkins(t, 0.0, window_s, rng, cfg.hopkins_resamples, cfg.hopkins_max_probes)
    except FewerThanThreeBouts:
        out["hopkins"] = NAN
    try:
        cnt, prom = kde_peaks(t / 3600.0, 0.0, hours, cfg.kde_grid)
        out["kde_peaks"] = float(cnt)
        out["kde_prom_mean"] = float(prom.mean()) if prom.size else NAN
        out["kde_prom_max"] = float(prom.max()) if prom.size else NAN
    except FewerThanThreeBouts:
        out.update(kde_peaks=NAN, kde_prom_mean=NAN, kde_prom_max=NAN)
    for s, v in summary_stats(np.diff(t) if t.size > 1 else []).items():
        out[f"iei__{s}"] = v
    return out


@dataclass
class NightFeatureVector:
    patient_id: str
    night_id: int
    label: int  # 1 = RBD, 0 = HC, -1 = unknown
    values: dict
    missing: frozenset = frozenset()
    n_bouts: int = 0
    dataset: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def excluded(self):
        return self.n_bouts == 0

    @classmethod
    def from_raw(cls, patient_id, night_id, label, raw, n_bouts, dataset="", meta=None):
        miss = frozenset(k for k in NIGHT_FEATURES if not math.isfinite(raw.get(k, NAN)))
        vals = {k: (0.0 if k in miss else float(raw[k])) for k in NIGHT_FEATURES}
        return cls(patient_id, int(night_id), int(label), vals, miss, int(n_bouts), dataset, dict(meta or {}))

    def vector(self, keys=NIGHT_FEATURES):
        """Values in ``keys`` order with missing entries as ``nan``."""
        return np.array([NAN if k in self.missing else self.values[k] for k in keys])

    def to_dict(self):
        return {
            "patient_id": self.patient_id,
            "night_id": self.night_id,
            "label": self.label,
            "dataset": self.dataset,
            "n_bouts": self.n_bouts,
            "meta": self.meta,
            "values": {k: (None if k in self.missing else self.values[k]) for k in NIGHT_FEATURES},
        }

    @classmethod
    def from_dict(cls, d):
        raw = {k: (NAN if v is None else v) for k, v in d["values"].items()}
        return cls.from_raw(d["patient_id"], d["night_id"], d["label"], raw, d.get("n_bouts", 0),
                            d.get("dataset", ""), d.get("meta"))


def extract_night(sig, win, bouts, patient_id, label, seed, cfg=FeatureConfig(), dataset=""):
    """Feature vector for one sleep window of the band-passed ``sig``."""
    if not bouts:
        return NightFeatureVector.from_raw(patient_id, win.night_index, label, {}, 0, dataset)
    per_bout = [
        bout_features(sig.x[b.start_idx : b.end_idx], sig.y[b.start_idx : b.end_idx],
                      sig.z[b.start_idx : b.end_idx], sig.rate, cfg)
        for b in bouts
    ]
    raw = aggregate_night(per_bout)
    a = sig.index_at(win.onset_t)
    b = sig.index_at(win.wake_t)
    mids = [(bt.mid_idx - a) / sig.rate for bt in bouts]
    raw.update(global_features(mids, (b - a) / sig.rate, np.random.default_rng(seed), cfg))
    return NightFeatureVector.from_raw(patient_id, win.night_index, label, raw, len(bouts), dataset)


def feature_matrix(nights, keys=NIGHT_FEATURES):
    return np.vstack([n.vector(keys) for n in nights]) if nights else np.empty((0, len(keys)))


_META_COLS = ("patient_id", "night_id", "label", "dataset", "n_bouts")


def nights_to_csv(nights):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_META_COLS + NIGHT_FEATURES)
    for n in nights:
        vals = ["" if k in n.missing else repr(n.values[k]) for k in NIGHT_FEATURES]
        w.writerow([n.patient_id, n.night_id, n.label, n.dataset, n.n_bouts] + vals)
    return buf.getvalue()


def nights_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    meta = len(_META_COLS)
    keys = header[meta:]
    out = []
    for r in rows[1:]:
        raw = {k: (NAN if v == "" else float(v)) for k, v in zip(keys, r[meta:])}
        out.append(NightFeatureVector.from_raw(r[0], int(r[1]), int(r[2]), raw, int(r[4]), r[3]))
    return out


def nights_to_json(nights, cfg=FeatureConfig()):
    return json.dumps({"registry_version": registry_version(cfg), "nights": [n.to_dict() for n in nights]},
                      sort_keys=True)


def nights_json_version(text):
    return json.loads(text).get("registry_version")


def nights_from_json(text):
    return [NightFeatureVector.from_dict(d) for d in json.loads(text)["nights"]]
