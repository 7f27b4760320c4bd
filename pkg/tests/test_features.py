import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from actiscreen import kernels
from actiscreen.features import (NIGHT_FEATURES, LOCAL_FEATURES, BoutFeatures, FeatureConfig,
                                 NightFeatureVector, aggregate_night, autocorr_features, autocorrelation,
                                 bout_features, distributional, energy, global_features, hopkins, hurst_rs,
                                 kde_peaks, nights_from_csv, nights_from_json, nights_to_csv, nights_to_json,
                                 peak_features, poincare, sample_entropy, spectral_features, summary_stats)

RATE = 100.0


# distributional / energy -------------------------------------------------------------


def test_constant_bout_conventions():
    b = bout_features(np.full(200, 0.3), np.zeros(200), np.zeros(200), RATE)
    v = b.values
    assert v["mean"] == pytest.approx(0.3) and v["std"] == 0.0
    assert v["skew"] == 0.0 and "skew" in b.missing
    assert v["kurt"] == 0.0 and "kurt" in b.missing
    assert v["q0"] == v["q100"] == pytest.approx(0.3)
    assert v["duration"] == 2.0


def test_alternating_magnitude_moments_and_iqr():
    d = distributional([0, 1, 0, 1])
    assert d["mean"] == 0.5 and d["std"] == 0.5
    assert d["q75"] - d["q25"] == 1.0  # linear interpolation on sorted [0, 0, 1, 1]


@given(st.integers(0, 2**32 - 1), st.integers(3, 400))
def test_rms_squared_is_power(seed, n):
    rng = np.random.default_rng(seed)
    e = energy(*rng.normal(0, 0.5, (3, n)))
    assert abs(e["rms"] ** 2 - e["power"]) <= 1e-12 * max(1.0, e["power"])


# spectral ---------------------------------------------------------------------------


def test_pure_sine_spectrum():
    t = np.arange(400) / RATE
    s = spectral_features(np.sin(2 * np.pi * 4 * t), RATE)
    df = RATE / 512
    assert abs(s["f1"] - 4.0) <= df
    assert s["spectral_entropy"] < 0.35
    assert s["spectral_entropy"] < spectral_features(np.random.default_rng(0).standard_normal(400), RATE)[
        "spectral_entropy"]


def test_white_noise_entropy_near_one():
    rng = np.random.default_rng(1)
    vals = [spectral_features(rng.standard_normal(512), RATE)["spectral_entropy"] for _ in range(30)]
    assert abs(np.mean(vals) - 1.0) < 0.1


def test_zero_bout_spectrum():
    s = spectral_features(np.zeros(300), RATE)
    assert s["spectral_entropy"] == 0.0 and s["asd_sum"] == 0.0


# autocorrelation ------------------------------------------------------------------------


@pytest.mark.parametrize("period", [8, 10, 25, 37, 64])
def test_sine_first_minimum_at_half_period(period):
    n = 10 * period
    v = np.sin(2 * np.pi * np.arange(n) / period)
    lag = autocorr_features(v, 1.0, max_lag_s=n)["ac_first_min_lag"]
    assert abs(lag - period / 2) <= 1


def test_constant_series_ac_missing():
    b = bout_features(np.full(300, 0.2), np.full(300, 0.1), np.zeros(300), RATE)
    assert "ac_max" in b.missing and b.values["ac_max"] == 0.0
    assert "ac_first_min_lag" in b.missing


def test_ar1_autocorrelation_matches_bruteforce():
    rng = np.random.default_rng(2)
    n = 3000
    v = np.zeros(n)
    e = rng.standard_normal(n)
    for i in range(1, n):
        v[i] = 0.9 * v[i - 1] + e[i]
    ac = autocorrelation(v, 40)
    for lag in (1, 2, 5, 10, 40):
        assert ac[lag] == pytest.approx(oracles.ac_brute(v, lag), abs=1e-12)
    assert abs(ac[1] - 0.9) < 0.05 and abs(ac[5] - 0.9**5) < 0.15
    full = autocorrelation(v, 1000)
    signs = [np.sign(oracles.ac_brute(v, k)) for k in range(0, 1001)]
    signs = [s for s in signs if s != 0]
    want = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    assert autocorr_features(v, 1.0, max_lag_s=1000)["ac_zero_cross"] == want
    assert np.allclose(full[:41], ac)


# sample entropy ---------------------------------------------------------------------------


def test_sampen_constant_is_zero():
    assert sample_entropy(np.ones(50)) == (0.0, False)


@given(st.integers(0, 2**32 - 1), st.integers(10, 300), st.sampled_from([1, 2, 3]))
def test_sampen_counts_equal_bruteforce(seed, n, m):
    rng = np.random.default_rng(seed)
    v = np.round(rng.standard_normal(n), 1)  # ties put samples right on the tolerance
    r = 0.2 * float(v.std())
    assert tuple(kernels.sampen_counts(v, m, r)) == oracles.sampen_brute(v, m, r)


def test_sampen_value_from_counts():
    v = np.random.default_rng(3).standard_normal(200)
    A, B = oracles.sampen_brute(v, 2, 0.2 * v.std())
    assert sample_entropy(v)[0] == -math.log(A / B)


def test_sampen_sine_below_noise():
    wins = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        t = np.arange(500)
        sine = np.sin(2 * np.pi * t / 25 + rng.uniform(0, 6.28))
        wins += sample_entropy(sine)[0] < sample_entropy(rng.standard_normal(500))[0]
    assert wins >= 48


def test_sampen_cap_when_no_matches():
    v = np.arange(20, dtype=float) ** 3
    val, capped = sample_entropy(v, r_frac=1e-9)
    assert capped and val == pytest.approx(math.log(18) + math.log(17))


# Hurst ----------------------------------------------------------------------------------------


def test_hurst_white_noise():
    ok = sum(0.4 <= hurst_rs(np.random.default_rng(s).standard_normal(4096)) <= 0.6 for s in range(50))
    assert ok >= 45


def test_hurst_random_walk():
    h = hurst_rs(np.cumsum(np.random.default_rng(4).standard_normal(4096)))
    assert 0.85 <= h <= 1.05


def test_hurst_constant_placeholder():
    assert math.isnan(hurst_rs(np.ones(128)))
    b = bout_features(np.full(200, 0.3), np.full(200, 0.1), np.zeros(200), RATE)
    assert b.values["hurst_rs"] == 0.5 and "hurst_rs" in b.missing


# Poincare ------------------------------------------------------------------------------------


def test_poincare_alternating_and_constant():
    p = poincare(np.tile([0.0, 1.0], 50)[:-1])  # even number of pairs
    assert p["sd1"] == pytest.approx(1 / math.sqrt(2)) and p["sd2"] == pytest.approx(0, abs=1e-12)
    assert p["poincare_area"] == pytest.approx(0, abs=1e-12)
    c = poincare(np.full(10, 3.0))
    assert c["sd1"] == 0 and c["sd2"] == pytest.approx(0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(3, 500))
def test_poincare_variance_identity(seed, n):
    s = np.random.default_rng(seed).normal(0, 2, n)
    p = poincare(s)
    assert abs(p["sd1"] ** 2 + p["sd2"] ** 2 - (np.var(s[:-1]) + np.var(s[1:]))) < 1e-9


# peaks -----------------------------------------------------------------------------------


def test_single_triangle_pulse():
    v = np.concatenate([np.linspace(0, 0.5, 26), np.linspace(0.5, 0, 26)[1:], np.zeros(20)])
    p = peak_features(v, RATE)
    assert p["peaks_per_sec"] * v.size / RATE == pytest.approx(1)
    assert p["prom_max"] == pytest.approx(0.5)


def test_sine_peaks():
    t = np.arange(500) / RATE
    p = peak_features(0.3 * np.sin(2 * np.pi * 2 * t), RATE)
    assert abs(p["peaks_per_sec"] * 5 - 10) <= 1
    # interior peaks rise 0.6 g above the troughs; the two edge peaks only 0.3 g above the start/end
    assert p["prom_max"] == pytest.approx(0.6, rel=0.01)
    assert 0.5 < p["prom_mean"] <= 0.6


def test_flat_has_no_peaks_and_missing_prominence():
    b = bout_features(np.full(200, 0.2), np.zeros(200), np.zeros(200), RATE)
    assert b.values["peaks_per_sec"] == 0
    assert {"prom_mean", "prom_min", "prom_max"} <= b.missing
    assert b.values["prom_mean"] == 0


# night aggregation -------------------------------------------------------------------------


def _bf(**vals):
    base = {k: 1.0 for k in LOCAL_FEATURES}
    base.update(vals)
    return BoutFeatures(base)


def test_single_bout_night():
    out = aggregate_night([_bf(power=2.5)])
    assert out["power__mean"] == 2.5 and out["power__std"] == 0 and out["power__iqr"] == 0
    assert out["power__p10"] == out["power__p90"] == 2.5


def test_duration_median_and_mad():
    out = aggregate_night([_bf(duration=d) for d in (1, 2, 3, 10)])
    assert out["duration__median"] == 2.5
    assert out["duration__mad"] == 1.0
    assert summary_stats([1, 2, 3, 10])["mad"] == 1.0


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.randoms())
def test_aggregation_order_invariant(vals, rnd):
    bouts = [_bf(power=v, duration=abs(v) + 0.5) for v in vals]
    shuffled = list(bouts)
    rnd.shuffle(shuffled)
    a, b = aggregate_night(bouts), aggregate_night(shuffled)
    assert a.keys() == b.keys()
    for k in a:
        assert (math.isnan(a[k]) and math.isnan(b[k])) or a[k] == b[k]


def test_named_features_in_registry():
    for k in ("power__skew", "ac_first_min_lag__mean", "peaks_per_sec__iqr", "duration__median",
              "duration__q25", "duration__q75", "spectral_entropy__std"):
        assert k in NIGHT_FEATURES


# global features ---------------------------------------------------------------------------


def test_moves_per_hour():
    g = global_features(np.linspace(600, 27000, 12), 8 * 3600, np.random.default_rng(0))
    assert g["moves_per_hour"] == 1.5 and g["n_moves"] == 12


def test_hopkins_uniform_and_clustered():
    win = 8 * 3600.0
    uni = [hopkins(np.random.default_rng(s).uniform(0, win, 200), 0, win, np.random.default_rng(s + 1000))
           for s in range(50)]
    assert sum(abs(h - 0.5) <= 0.1 for h in uni) >= 45
    clus = []
    for s in range(50):
        rng = np.random.default_rng(s)
        pts = np.concatenate([rng.normal(2 * 3600, 300, 100), rng.normal(6 * 3600, 300, 100)])
        clus.append(hopkins(pts, 0, win, np.random.default_rng(s + 1000)))
    assert sum(h > 0.75 for h in clus) >= 45


def test_two_clusters_give_two_kde_peaks():
    rng = np.random.default_rng(5)
    pts = np.concatenate([rng.normal(2, 0.1, 40), rng.normal(6, 0.1, 40)])
    assert kde_peaks(pts, 0, 8)[0] == 2


def test_few_bouts_hopkins_missing_counts_present():
    g = global_features([100.0, 200.0], 3600.0, np.random.default_rng(0))
    assert math.isnan(g["hopkins"]) and g["n_moves"] == 2


def test_zero_bout_night_excluded():
    n = NightFeatureVector.from_raw("p", 0, 1, {}, 0)
    assert n.excluded and n.missing == frozenset(NIGHT_FEATURES)


# serialization ---------------------------------------------------------------------------


def _nights():
    rng = np.random.default_rng(8)
    out = []
    for i in range(4):
        raw = {k: float(rng.normal()) for k in NIGHT_FEATURES}
        raw["hopkins"] = float("nan")
        out.append(NightFeatureVector.from_raw(f"p{i // 2}", i % 2, i % 2, raw, 5, "ds"))
    return out


def test_csv_and_json_round_trip():
    nights = _nights()
    for back in (nights_from_csv(nights_to_csv(nights)), nights_from_json(nights_to_json(nights))):
        assert len(back) == len(nights)
        for a, b in zip(nights, back):
            assert a.patient_id == b.patient_id and a.missing == b.missing
            assert np.array_equal(a.vector(), b.vector(), equal_nan=True)
    assert nights_to_csv(nights).splitlines()[0].split(",")[-len(NIGHT_FEATURES):] == list(NIGHT_FEATURES)


def test_extraction_repeatable():
    rng = np.random.default_rng(11)
    x, y, z = rng.normal(0, 0.3, (3, 300))
    a, b = bout_features(x, y, z, RATE), bout_features(x, y, z, RATE, FeatureConfig())
    assert a.values.keys() == b.values.keys()
    assert all(a.values[k] == b.values[k] for k in a.values)
    assert all(math.isfinite(v) for v in a.values.values())
