"""Numpy implementations of the compiled kernels.

Signatures and results match :mod:`actiscreen._kernels` exactly (the test
suite runs both backends against each other). These are used when the
extension is not built or ``ACTISCREEN_PURE_PYTHON=1`` is set.
"""

import numpy as np
from scipy import signal as _sps


def nearest_indices(t_in, grid):
    t_in = np.asarray(t_in, dtype=np.int64)
    grid = np.asarray(grid, dtype=np.int64)
    n = t_in.shape[0]
    j = np.searchsorted(t_in, grid, side="right") - 1
    j = np.clip(j, 0, n - 1)
    nxt = np.minimum(j + 1, n - 1)
    take_next = (
        (j + 1 < n)
        & (grid > t_in[j])
        & ((t_in[nxt] - grid) < (grid - t_in[j]))
    )
    return np.where(take_next, nxt, j).astype(np.int64)


def _window_bounds(n, w):
    i = np.arange(n)
    lo = np.clip(i - w // 2, 0, n)
    hi = np.clip(i - w // 2 + w, 0, n)
    return lo, hi


def stationary_mask(x, y, z, w, thr):
    n = len(x)
    lo, hi = _window_bounds(n, w)
    cnt = (hi - lo).astype(np.float64)
    ok = np.ones(n, dtype=bool)
    for a in (x, y, z):
        a = np.asarray(a, dtype=np.float64)
        v = a - a[0]
        c1 = np.concatenate(([0.0], np.cumsum(v)))
        c2 = np.concatenate(([0.0], np.cumsum(v * v)))
        s = c1[hi] - c1[lo]
        q = c2[hi] - c2[lo]
        var = (q - s * s / cnt) / cnt
        ok &= var < thr * thr
    return ok.astype(np.uint8)


def rolling_median(x, w):
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    out = np.empty(n)
    half = w // 2
    lo, hi = _window_bounds(n, w)
    full = (lo == np.arange(n) - half) & (hi - lo == w)
    idx_full = np.flatnonzero(full)
    if idx_full.size:
        view = np.lib.stride_tricks.sliding_window_view(x, w)
        starts = idx_full - half
        step = max(1, (1 << 22) // w)
        for a in range(0, starts.size, step):
            s = starts[a : a + step]
            out[idx_full[a : a + step]] = np.median(view[s], axis=1)
    for i in np.flatnonzero(~full):
        out[i] = np.median(x[lo[i] : hi[i]])
    return out


def sos_filter(sos, x, starts):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    bounds = list(np.asarray(starts, dtype=np.int64)) + [len(x)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b > a:
            out[a:b] = _sps.sosfilt(sos, x[a:b])
    return out


def sampen_counts(x, m, r):
    x = np.asarray(x, dtype=np.float64)
    nt = len(x) - m
    if nt < 2:
        return 0, 0
    templ = np.lib.stride_tricks.sliding_window_view(x, m + 1)[:nt]
    A = 0
    B = 0
    for i in range(nt - 1):
        d = np.abs(templ[i + 1 :] - templ[i])
        match_m = np.all(d[:, :m] <= r, axis=1)
        B += int(match_m.sum())
        A += int((match_m & (d[:, m] <= r)).sum())
    return A, B


def level_best_splits(xt, order, node_of, g, h, g_node, h_node, feats,
                      n_nodes, lam, min_child_weight):
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int32)
    best_thr = np.zeros(n_nodes)
    parent = g_node * g_node / (h_node + lam)
    for f in feats:
        o = order[f]
        nd = node_of[o]
        keep = nd >= 0
        o = o[keep]
        nd = nd[keep]
        s = np.argsort(nd, kind="stable")
        o = o[s]
        nd = nd[s]
        cuts = np.flatnonzero(np.diff(nd)) + 1
        for grp_o, grp_nd in zip(np.split(o, cuts), np.split(nd, cuts)):
            if grp_o.size < 2:
                continue
            k = grp_nd[0]
            xv = xt[f, grp_o]
            gl = np.cumsum(g[grp_o])[:-1]
            hl = np.cumsum(h[grp_o])[:-1]
            valid = xv[1:] > xv[:-1]
            hr = h_node[k] - hl
            valid &= (hl >= min_child_weight) & (hr >= min_child_weight)
            if not valid.any():
                continue
            gr = g_node[k] - gl
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[k])
            gain = np.where(valid, gain, -np.inf)
            j = int(np.argmax(gain))
            if gain[j] > best_gain[k]:
                best_gain[k] = gain[j]
                best_feat[k] = f
                best_thr[k] = 0.5 * (xv[j] + xv[j + 1])
    return best_gain, best_feat, best_thr
