"""Time each hot kernel on both backends and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Prints one line per kernel: best-of-N seconds for the numpy fallback and the
compiled extension, the speed-up, and whether the outputs match.
"""

import argparse
import time

import numpy as np
from scipy import signal as sps

from actiscreen import kernels


def _cases(scale, rng):
    n = int(2_000_000 * scale)
    t = np.cumsum(rng.integers(9_000_000, 11_000_000, n)).astype(np.int64)
    grid = np.arange(t[0], t[-1], 10_000_000, dtype=np.int64)
    x, y, z = (rng.normal(0, 0.01, n) for _ in range(3))
    sos = sps.butter(4, [0.8, 20], btype="bandpass", fs=100, output="sos")
    starts = np.array([0, n // 3, 2 * n // 3], dtype=np.int64)
    sampen_x = np.round(rng.standard_normal(int(3000 * scale) or 300), 2)

    rows, f, nodes = int(2000 * scale) or 200, 50, 8
    X = rng.standard_normal((rows, f))
    xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(xt, axis=1, kind="stable").astype(np.int32))
    node_of = rng.integers(0, nodes, rows).astype(np.int32)
    g = rng.standard_normal(rows)
    h = rng.uniform(0.05, 0.25, rows)
    G = np.bincount(node_of, weights=g, minlength=nodes)
    H = np.bincount(node_of, weights=h, minlength=nodes)
    feats = np.arange(f, dtype=np.int32)

    return {
        "nearest_indices": (t, grid),
        "stationary_mask": (x, y, z, 1000, 0.013),
        "rolling_median": (x[: n // 4].copy(), 500),
        "sos_filter": (sos, x, starts),
        "sampen_counts": (sampen_x, 2, 0.2),
        "level_best_splits": (xt, order, node_of, g, h, G, H, feats, nodes, 1.0, 1e-3),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-12)


def _best(fn, args, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0)
    a = ap.parse_args(argv)
    if not kernels.compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    py, cc = kernels.get_backend("python"), kernels.get_backend("compiled")
    cases = _cases(a.scale, np.random.default_rng(0))
    print(f"{'kernel':<20}{'python s':>12}{'compiled s':>12}{'speed-up':>10}  match")
    for name, args in cases.items():
        tp, op = _best(getattr(py, name), args, a.repeat)
        tc, oc = _best(getattr(cc, name), args, a.repeat)
        print(f"{name:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {_same(op, oc)}")


if __name__ == "__main__":
    main()
