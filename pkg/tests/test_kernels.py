import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from actiscreen import kernels
from actiscreen.model import HyperParams, train_gbdt

import oracles

py = kernels.get_backend("python")
needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="extension not built")
BACKENDS = ["python"] + (["compiled"] if kernels.compiled_available() else [])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("gpu")


def test_pure_python_switch():
    code = "from actiscreen import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, ACTISCREEN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", BACKENDS)
def test_nearest_indices(name):
    k = kernels.get_backend(name)
    t = np.array([0, 10, 20, 35, 36], dtype=np.int64)
    grid = np.array([-5, 0, 4, 5, 6, 15, 27, 28, 35, 40], dtype=np.int64)
    # ties go to the earlier sample
    assert k.nearest_indices(t, grid).tolist() == [0, 0, 0, 0, 1, 1, 2, 3, 3, 4]


@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.integers(1, 25))
def test_rolling_median_matches_direct(seed, n, w):
    x = np.round(np.random.default_rng(seed).standard_normal(n), 1)
    want = np.array([np.median(x[max(0, i - w // 2) : min(n, i - w // 2 + w)]) for i in range(n)])
    for name in BACKENDS:
        np.testing.assert_array_equal(kernels.get_backend(name).rolling_median(x, w), want)


@given(st.integers(0, 2**32 - 1), st.integers(1, 80), st.integers(1, 20))
def test_stationary_matches_brute(seed, n, w):
    rng = np.random.default_rng(seed)
    a = [rng.normal(0, rng.choice([0.001, 0.1]), n) for _ in range(3)]
    thr = 0.013  # far from both noise levels, so rounding cannot flip a sample
    want = oracles.rolling_std_stationary(*a, w, thr)
    for name in BACKENDS:
        got = kernels.get_backend(name).stationary_mask(*a, w, thr).astype(bool)
        np.testing.assert_array_equal(got, want)


@pytest.mark.parametrize("name", BACKENDS)
def test_sos_filter_restarts(name):
    rng = np.random.default_rng(0)
    sos = sps.butter(4, [0.8, 20], btype="bandpass", fs=100, output="sos")
    x = rng.standard_normal(3000)
    starts = np.array([0, 1200, 2500], dtype=np.int64)
    got = kernels.get_backend(name).sos_filter(sos, x, starts)
    want = np.concatenate([sps.sosfilt(sos, x[a:b]) for a, b in [(0, 1200), (1200, 2500), (2500, 3000)]])
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(3, 120), st.integers(1, 3))
def test_sampen_counts_backends_agree_with_oracle(seed, n, m):
    x = np.round(np.random.default_rng(seed).standard_normal(n), 1)
    want = oracles.sampen_brute(x, m, 0.2)
    for name in BACKENDS:
        assert tuple(kernels.get_backend(name).sampen_counts(x, m, 0.2)) == want


@needs_compiled
@given(st.integers(0, 2**32 - 1))
def test_level_best_splits_agree(seed):
    rng = np.random.default_rng(seed)
    n, f, nodes = 60, 5, 3
    X = np.round(rng.standard_normal((n, f)), 1)
    xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(xt, axis=1, kind="stable").astype(np.int32))
    node_of = rng.integers(-1, nodes, n).astype(np.int32)
    g = rng.standard_normal(n)
    h = rng.uniform(0.05, 0.25, n)
    act = node_of >= 0
    G = np.bincount(node_of[act], weights=g[act], minlength=nodes)
    H = np.bincount(node_of[act], weights=h[act], minlength=nodes)
    feats = np.arange(f, dtype=np.int32)
    a = py.level_best_splits(xt, order, node_of, g, h, G, H, feats, nodes, 1.0, 0.1)
    b = kernels.get_backend("compiled").level_best_splits(xt, order, node_of, g, h, G, H, feats, nodes, 1.0, 0.1)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-12)
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[2], b[2])


@needs_compiled
def test_trained_models_identical_across_backends(monkeypatch):
    rng = np.random.default_rng(3)
    X = np.round(rng.standard_normal((200, 6)), 2)
    y = (X[:, 0] + 0.5 * rng.standard_normal(200) > 0).astype(int)
    hp = HyperParams(n_estimators=20, max_depth=3)
    models = []
    for name in ("python", "compiled"):
        monkeypatch.setattr(kernels, "level_best_splits", kernels.get_backend(name).level_best_splits)
        models.append(train_gbdt(X, y, hp, seed=1))
    pa, pb = models[0].predict_proba(X), models[1].predict_proba(X)
    np.testing.assert_allclose(pa, pb, rtol=0, atol=1e-12)
    assert [t.feat.tolist() for t in models[0].trees] == [t.feat.tolist() for t in models[1].trees]
